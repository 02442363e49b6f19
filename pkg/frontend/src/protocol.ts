/**
 * Wire protocol types and frame validation.
 *
 * The cockpit speaks JSON text frames over a WebSocket. Frames with an
 * unknown `type` are surfaced as errors by the caller; unknown *fields*
 * inside known frames are ignored, so the server may extend frames freely.
 */

export type Mode = "accept" | "reject" | "replace";
export type Status = "running" | "success" | "crash" | "timeout";

export interface GoalGeometry {
  x: number;
  y0: number;
  y1: number;
}

export interface Geometry {
  env: string;
  bounds: [number, number, number, number]; // x_min, x_max, y_min, y_max
  ground_y: number;
  goal: GoalGeometry;
  spawn: [number, number];
  circles: { cx: number; cy: number; r: number }[];
  rects: { x0: number; y0: number; x1: number; y1: number }[];
  dynamic: { cy: number; r: number }[];
}

export interface HelloFrame {
  type: "hello";
  session: string;
  config_hash: string;
  geometry: Geometry;
  d_safe: number;
}

export interface StateFrame {
  type: "state";
  seq: number;
  t: number;
  x: [number, number, number, number, number, number];
  u_h: [number, number];
  u_a: [number, number] | null;
  applied: [number, number];
  mode: Mode | null;
  distance: number;
  unsafe: boolean;
  status: Status;
  /** scripted obstacle positions at this frame's time: [cx, cy, r] */
  obs?: [number, number, number][];
}

export interface OutcomeFrame {
  type: "outcome";
  status: Status;
  crash_reason: string | null;
  metrics: Record<string, number>;
}

export interface ErrorFrame {
  type: "error";
  code: string;
  msg: string;
}

export type ServerFrame = HelloFrame | StateFrame | OutcomeFrame | ErrorFrame;

export interface ControlFrame {
  type: "control";
  seq: number;
  u: [number, number];
}

export interface JoinFrame {
  type: "join";
  env: string;
  paradigm: string;
}

const MODES: readonly string[] = ["accept", "reject", "replace"];
const STATUSES: readonly string[] = ["running", "success", "crash", "timeout"];

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isVec(v: unknown, n: number): boolean {
  return Array.isArray(v) && v.length === n && v.every(isFiniteNumber);
}

/**
 * Parse one raw message into a typed server frame.
 * Returns null for anything malformed; the caller decides how loudly to
 * complain (a corrupt frame must never take the render loop down).
 */
export function parseServerFrame(raw: string): ServerFrame | null {
  let data: any;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  switch (data.type) {
    case "hello":
      if (typeof data.session !== "string" || !data.geometry) return null;
      return data as HelloFrame;
    case "state": {
      if (!Number.isInteger(data.seq)) return null;
      if (!isVec(data.x, 6) || !isVec(data.u_h, 2) || !isVec(data.applied, 2))
        return null;
      if (data.u_a !== null && !isVec(data.u_a, 2)) return null;
      if (data.mode !== null && !MODES.includes(data.mode)) return null;
      if (!STATUSES.includes(data.status)) return null;
      if (!isFiniteNumber(data.distance) || !isFiniteNumber(data.t)) return null;
      return data as StateFrame;
    }
    case "outcome":
      if (!STATUSES.includes(data.status)) return null;
      return data as OutcomeFrame;
    case "error":
      if (typeof data.code !== "string") return null;
      return data as ErrorFrame;
    default:
      return null;
  }
}

export function controlFrame(seq: number, u: [number, number]): string {
  return JSON.stringify({ type: "control", seq, u });
}

export function joinFrame(env: string, paradigm: string): string {
  return JSON.stringify({ type: "join", env, paradigm });
}
