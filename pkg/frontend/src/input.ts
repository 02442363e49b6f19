/**
 * Operator input: gamepad two-stick scheme with keyboard fallback.
 *
 * Default mapping (right-handed): the right stick's vertical axis fires the
 * main thruster (push up = more thrust), the left stick's horizontal axis
 * fires the rotation jets. The handedness toggle swaps the two sticks, the
 * way a left-handed operator would hold them. A radial deadzone is applied
 * before clamping to [-1, 1].
 *
 * Keyboard fallback maps arrows/WASD onto the control grid: W / ArrowUp =
 * full thrust, S / ArrowDown = half thrust, A/D or Left/Right = half
 * rotation (full with Shift).
 */

export interface InputConfig {
  deadzone: number;
  leftHanded: boolean;
  maxRateHz: number;
}

export const DEFAULT_INPUT: InputConfig = {
  deadzone: 0.12,
  leftHanded: false,
  maxRateHz: 120,
};

function applyDeadzone(v: number, deadzone: number): number {
  if (Math.abs(v) < deadzone) return 0;
  // rescale so output is continuous from the deadzone edge
  const sign = v > 0 ? 1 : -1;
  return sign * Math.min(1, (Math.abs(v) - deadzone) / (1 - deadzone));
}

function clamp(v: number): number {
  return Math.max(-1, Math.min(1, v));
}

/**
 * Map gamepad axes to (u1, u2).
 *
 * Standard-layout axes: 0 = left stick X, 1 = left stick Y,
 * 2 = right stick X, 3 = right stick Y. Stick Y is negative when pushed up,
 * hence the sign flip on the thrust axis.
 */
export function mapGamepadAxes(
  axes: readonly number[],
  config: InputConfig,
): [number, number] {
  const leftX = axes[0] ?? 0;
  const leftY = axes[1] ?? 0;
  const rightX = axes[2] ?? 0;
  const rightY = axes[3] ?? 0;
  const thrustRaw = config.leftHanded ? -leftY : -rightY;
  const rotateRaw = config.leftHanded ? rightX : leftX;
  return [
    clamp(applyDeadzone(thrustRaw, config.deadzone)),
    clamp(applyDeadzone(rotateRaw, config.deadzone)),
  ];
}

/** Key state -> grid-level command (keyboard fallback). */
export function mapKeys(down: ReadonlySet<string>): [number, number] {
  let u1 = 0;
  if (down.has("KeyW") || down.has("ArrowUp")) u1 = 1.0;
  else if (down.has("KeyS") || down.has("ArrowDown")) u1 = 0.5;
  let u2 = 0;
  const boost = down.has("ShiftLeft") || down.has("ShiftRight") ? 1.0 : 0.5;
  if (down.has("KeyD") || down.has("ArrowRight")) u2 = boost;
  else if (down.has("KeyA") || down.has("ArrowLeft")) u2 = -boost;
  return [u1, u2];
}

/**
 * Emission rate limiter: control frames go out at most `maxRateHz` per
 * second regardless of how fast the render loop spins.
 */
export class RateLimiter {
  private lastEmit = -Infinity;

  constructor(private readonly maxRateHz: number) {}

  ready(nowMs: number): boolean {
    const interval = 1000 / this.maxRateHz;
    if (nowMs - this.lastEmit >= interval) {
      this.lastEmit = nowMs;
      return true;
    }
    return false;
  }
}

/** Live keyboard tracker; call attach() once. */
export class KeyTracker {
  readonly down = new Set<string>();

  attach(target: Pick<Window, "addEventListener">): void {
    target.addEventListener("keydown", (e: any) => this.down.add(e.code));
    target.addEventListener("keyup", (e: any) => this.down.delete(e.code));
  }
}

/** Poll the first connected standard gamepad, if any. */
export function pollGamepad(): Gamepad | null {
  if (typeof navigator === "undefined" || !navigator.getGamepads) return null;
  for (const pad of navigator.getGamepads()) {
    if (pad && pad.connected) return pad;
  }
  return null;
}
