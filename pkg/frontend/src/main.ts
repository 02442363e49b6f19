/**
 * Cockpit wiring: one render loop, event-driven input and network receipt
 * feeding a single view model. The input loop emits control frames at a
 * bounded rate independent of the display rate.
 */

import {
  DEFAULT_INPUT,
  KeyTracker,
  mapGamepadAxes,
  mapKeys,
  pollGamepad,
  RateLimiter,
} from "./input.js";
import { CockpitClient } from "./net.js";
import { Renderer } from "./render.js";
import {
  applyHello,
  applyOutcome,
  applyState,
  initialViewModel,
  resetForNewTrial,
} from "./viewmodel.js";

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

const canvas = document.getElementById("cockpit") as HTMLCanvasElement;
const renderer = new Renderer(canvas);
const vm = initialViewModel();
const inputConfig = { ...DEFAULT_INPUT };
const keys = new KeyTracker();
keys.attach(window);
const limiter = new RateLimiter(inputConfig.maxRateHz);

const env = param("env", "open");
const paradigm = param("paradigm", "shared");
const proto = window.location.protocol === "https:" ? "wss" : "ws";
const url = `${proto}://${window.location.host}/ws`;

const client = new CockpitClient(url, env, paradigm, {
  onFrame: (frame) => {
    switch (frame.type) {
      case "hello":
        applyHello(vm, frame);
        break;
      case "state":
        applyState(vm, frame);
        break;
      case "outcome":
        applyOutcome(vm, frame);
        break;
      case "error":
        vm.banner = `server error [${frame.code}]: ${frame.msg}`;
        vm.phase = "error";
        break;
    }
  },
  onStatusChange: (status) => {
    if (status === "reconnecting") {
      vm.banner = "connection lost - reconnecting...";
      vm.phase = "reconnecting";
    } else if (status === "open") {
      vm.banner = null;
    }
  },
});
client.connect();

// handedness toggle and trial reset
window.addEventListener("keydown", (e) => {
  if (e.code === "KeyH") {
    inputConfig.leftHanded = !inputConfig.leftHanded;
    vm.banner = inputConfig.leftHanded ? "left-handed sticks" : "right-handed sticks";
    setTimeout(() => (vm.banner = null), 1200);
  }
  if (e.code === "KeyR" && vm.outcome) {
    client.sendReset();
    resetForNewTrial(vm);
  }
});

function inputTick(nowMs: number): void {
  if (!limiter.ready(nowMs)) return;
  const pad = pollGamepad();
  let u: [number, number];
  if (pad) {
    vm.inputDevice = `gamepad (${inputConfig.leftHanded ? "left" : "right"}-handed)`;
    u = mapGamepadAxes(pad.axes, inputConfig);
  } else {
    vm.inputDevice = "keyboard (no gamepad found)";
    u = mapKeys(keys.down);
  }
  vm.commanded = u;
  if (vm.phase === "running" || vm.phase === "joined") {
    client.sendControl(u);
  }
}

function frameLoop(nowMs: number): void {
  inputTick(nowMs);
  renderer.draw(vm);
  window.requestAnimationFrame(frameLoop);
}
window.requestAnimationFrame(frameLoop);
