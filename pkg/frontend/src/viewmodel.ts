/**
 * Cockpit view model: a pure reducer over server frames.
 *
 * The cockpit never simulates or infers — every displayed quantity comes
 * from a server frame. Stale state frames (seq at or below the newest one
 * rendered) are dropped so the canvas always shows the latest authoritative
 * state, and the intervention indicator reflects the rendered frame's mode
 * field verbatim.
 */

import type {
  Geometry,
  HelloFrame,
  OutcomeFrame,
  StateFrame,
} from "./protocol.js";

export type ConnectionPhase =
  | "connecting"
  | "joined"
  | "running"
  | "complete"
  | "error"
  | "reconnecting";

export interface SessionStats {
  trials: number;
  successes: number;
  crashes: number;
  timeouts: number;
}

export interface CockpitViewModel {
  phase: ConnectionPhase;
  session: string | null;
  configHash: string | null;
  geometry: Geometry | null;
  dSafe: number;
  frame: StateFrame | null;
  outcome: OutcomeFrame | null;
  inputDevice: string;
  commanded: [number, number];
  banner: string | null;
  stats: SessionStats;
  droppedFrames: number;
}

export function initialViewModel(): CockpitViewModel {
  return {
    phase: "connecting",
    session: null,
    configHash: null,
    geometry: null,
    dSafe: 0,
    frame: null,
    outcome: null,
    inputDevice: "keyboard",
    commanded: [0, 0],
    banner: null,
    stats: { trials: 0, successes: 0, crashes: 0, timeouts: 0 },
    droppedFrames: 0,
  };
}

export function applyHello(vm: CockpitViewModel, hello: HelloFrame): void {
  vm.phase = "joined";
  vm.session = hello.session;
  vm.configHash = hello.config_hash;
  vm.geometry = hello.geometry;
  vm.dSafe = hello.d_safe ?? 0;
  vm.frame = null;
  vm.outcome = null;
  vm.banner = null;
}

/** Returns true when the frame was fresh and is now the rendered one. */
export function applyState(vm: CockpitViewModel, frame: StateFrame): boolean {
  if (vm.frame !== null && frame.seq <= vm.frame.seq) {
    vm.droppedFrames += 1;
    return false;
  }
  vm.frame = frame;
  vm.phase = "running";
  return true;
}

export function applyOutcome(vm: CockpitViewModel, outcome: OutcomeFrame): void {
  vm.outcome = outcome;
  vm.phase = "complete";
  vm.stats.trials += 1;
  if (outcome.status === "success") vm.stats.successes += 1;
  else if (outcome.status === "crash") vm.stats.crashes += 1;
  else if (outcome.status === "timeout") vm.stats.timeouts += 1;
}

export function resetForNewTrial(vm: CockpitViewModel): void {
  vm.frame = null;
  vm.outcome = null;
  vm.phase = "joined";
}

/** Indicator color per allocation mode; neutral when unfiltered. */
export function modeColor(mode: StateFrame["mode"]): string {
  switch (mode) {
    case "reject":
      return "#e6a817"; // amber
    case "replace":
      return "#e23b3b"; // red
    default:
      return "#7f8c99"; // neutral
  }
}

export function modeLabel(mode: StateFrame["mode"]): string {
  if (mode === null) return "direct";
  return mode;
}
