import { describe, expect, it } from "vitest";

import {
  DEFAULT_INPUT,
  mapGamepadAxes,
  mapKeys,
  RateLimiter,
} from "../src/input.js";

const rightHanded = { ...DEFAULT_INPUT, leftHanded: false };
const leftHanded = { ...DEFAULT_INPUT, leftHanded: true };

describe("gamepad mapping", () => {
  it("centered sticks inside the deadzone send exactly zero", () => {
    const u = mapGamepadAxes([0.05, -0.08, 0.1, 0.02], rightHanded);
    expect(u).toEqual([0, 0]);
  });

  it("full forward on the thrust stick gives u1 = 1", () => {
    // right stick pushed fully up: axis 3 = -1
    const [u1, u2] = mapGamepadAxes([0, 0, 0, -1], rightHanded);
    expect(u1).toBe(1);
    expect(u2).toBe(0);
  });

  it("left stick horizontal drives the rotation channel", () => {
    const [u1, u2] = mapGamepadAxes([1, 0, 0, 0], rightHanded);
    expect(u1).toBe(0);
    expect(u2).toBe(1);
  });

  it("handedness toggle swaps the stick roles exactly", () => {
    const axes = [0.6, -0.9, -0.4, 0.2];
    const [t_r, r_r] = mapGamepadAxes(axes, rightHanded);
    const [t_l, r_l] = mapGamepadAxes(axes, leftHanded);
    // right-handed: thrust from -axes[3], rotate from axes[0]
    // left-handed: thrust from -axes[1], rotate from axes[2]
    expect(t_l).toBeGreaterThan(0); // -(-0.9) scaled
    expect(r_l).toBeLessThan(0);
    expect(t_r).not.toBe(t_l);
    expect(r_r).not.toBe(r_l);
  });

  it("outputs are clamped to the control box", () => {
    const u = mapGamepadAxes([5, 0, 0, -5], rightHanded);
    expect(u[0]).toBeLessThanOrEqual(1);
    expect(u[1]).toBeLessThanOrEqual(1);
    expect(u[0]).toBeGreaterThanOrEqual(-1);
  });

  it("deadzone edge is continuous", () => {
    const eps = mapGamepadAxes([DEFAULT_INPUT.deadzone + 1e-4, 0, 0, 0],
                               rightHanded);
    expect(Math.abs(eps[1])).toBeLessThan(0.01);
  });
});

describe("keyboard fallback", () => {
  it("maps onto grid levels", () => {
    expect(mapKeys(new Set(["KeyW"]))).toEqual([1.0, 0]);
    expect(mapKeys(new Set(["KeyS"]))).toEqual([0.5, 0]);
    expect(mapKeys(new Set(["KeyA"]))).toEqual([0, -0.5]);
    expect(mapKeys(new Set(["KeyD", "ShiftLeft"]))).toEqual([0, 1.0]);
    expect(mapKeys(new Set(["ArrowUp", "ArrowLeft"]))).toEqual([1.0, -0.5]);
    expect(mapKeys(new Set())).toEqual([0, 0]);
  });
});

describe("rate limiter", () => {
  it("bounds the emission rate regardless of the caller's loop speed", () => {
    const limiter = new RateLimiter(120);
    let sent = 0;
    // simulate a 1000 Hz render loop for one second
    for (let ms = 0; ms < 1000; ms += 1) {
      if (limiter.ready(ms)) sent += 1;
    }
    expect(sent).toBeLessThanOrEqual(120);
    expect(sent).toBeGreaterThanOrEqual(110);
  });
});
