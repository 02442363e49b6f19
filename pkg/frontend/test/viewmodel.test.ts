import { describe, expect, it } from "vitest";

import type { HelloFrame, OutcomeFrame, StateFrame } from "../src/protocol.js";
import {
  applyHello,
  applyOutcome,
  applyState,
  initialViewModel,
  modeColor,
  resetForNewTrial,
} from "../src/viewmodel.js";

function hello(): HelloFrame {
  return {
    type: "hello",
    session: "s1",
    config_hash: "h",
    geometry: {
      env: "open",
      bounds: [-8, 45, 0, 42],
      ground_y: 0,
      goal: { x: 33, y0: 0, y1: 42 },
      spawn: [5, 6],
      circles: [],
      rects: [],
      dynamic: [],
    },
    d_safe: 2.2,
  };
}

function state(seq: number, mode: StateFrame["mode"] = "accept"): StateFrame {
  return {
    type: "state",
    seq,
    t: seq / 60,
    x: [5, 6, 0, 0, 0, 0],
    u_h: [1, 0],
    u_a: [0, 0],
    applied: [1, 0],
    mode,
    distance: 5,
    unsafe: false,
    status: "running",
  };
}

describe("view model", () => {
  it("renders only the freshest frame: stale seqs are dropped", () => {
    const vm = initialViewModel();
    applyHello(vm, hello());
    expect(applyState(vm, state(5))).toBe(true);
    expect(applyState(vm, state(3))).toBe(false); // stale
    expect(applyState(vm, state(5))).toBe(false); // duplicate
    expect(vm.frame!.seq).toBe(5);
    expect(vm.droppedFrames).toBe(2);
    expect(applyState(vm, state(6))).toBe(true);
    expect(vm.frame!.seq).toBe(6);
  });

  it("indicator reflects the rendered frame's mode, never inferred", () => {
    const vm = initialViewModel();
    applyHello(vm, hello());
    applyState(vm, state(1, "replace"));
    expect(vm.frame!.mode).toBe("replace");
    expect(modeColor(vm.frame!.mode)).toBe("#e23b3b");
    applyState(vm, state(2, "reject"));
    expect(modeColor(vm.frame!.mode)).toBe("#e6a817");
    applyState(vm, state(3, null));
    expect(modeColor(vm.frame!.mode)).toBe("#7f8c99");
  });

  it("accumulates session statistics across trials", () => {
    const vm = initialViewModel();
    applyHello(vm, hello());
    const win: OutcomeFrame = {
      type: "outcome",
      status: "success",
      crash_reason: null,
      metrics: {},
    };
    const crash: OutcomeFrame = {
      type: "outcome",
      status: "crash",
      crash_reason: "ground impact",
      metrics: {},
    };
    applyOutcome(vm, win);
    resetForNewTrial(vm);
    applyOutcome(vm, crash);
    expect(vm.stats).toEqual({
      trials: 2,
      successes: 1,
      crashes: 1,
      timeouts: 0,
    });
    expect(vm.phase).toBe("complete");
  });

  it("a new hello clears trial state", () => {
    const vm = initialViewModel();
    applyHello(vm, hello());
    applyState(vm, state(4));
    applyHello(vm, hello());
    expect(vm.frame).toBeNull();
    expect(vm.outcome).toBeNull();
    expect(vm.phase).toBe("joined");
  });
});
