/**
 * Canvas renderer. Pure drawing from the view model: terrain, obstacles,
 * the goal line, the craft with thruster plumes, the clearance ring, the
 * intervention indicator, and the commanded-vs-applied control vectors
 * whenever the filter changed the operator's input.
 */

import type { CockpitViewModel } from "./viewmodel.js";
import { modeColor, modeLabel } from "./viewmodel.js";

const SKY = "#0b1020";
const GROUND = "#3a3f4a";
const OBSTACLE = "#5a6372";
const GOAL = "#3ddc84";
const HULL = "#d8dee9";

export class Renderer {
  constructor(private readonly canvas: HTMLCanvasElement) {}

  private worldToScreen(vm: CockpitViewModel) {
    const g = vm.geometry!;
    const [x0, x1, y0, y1] = [g.bounds[0], g.bounds[1], g.bounds[2], g.bounds[3]];
    const sx = this.canvas.width / (x1 - x0);
    const sy = this.canvas.height / (y1 - y0);
    const s = Math.min(sx, sy);
    return (wx: number, wy: number): [number, number] => [
      (wx - x0) * s,
      this.canvas.height - (wy - y0) * s,
    ];
  }

  private scale(vm: CockpitViewModel): number {
    const g = vm.geometry!;
    return Math.min(
      this.canvas.width / (g.bounds[1] - g.bounds[0]),
      this.canvas.height / (g.bounds[3] - g.bounds[2]),
    );
  }

  draw(vm: CockpitViewModel): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.fillStyle = SKY;
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    if (!vm.geometry) {
      this.drawBanner(ctx, vm.banner ?? "connecting...");
      return;
    }
    const w2s = this.worldToScreen(vm);
    const s = this.scale(vm);
    const g = vm.geometry;

    // terrain
    const [gx0, gy] = w2s(g.bounds[0], g.ground_y);
    const [gx1] = w2s(g.bounds[1], g.ground_y);
    ctx.fillStyle = GROUND;
    ctx.fillRect(gx0, gy, gx1 - gx0, this.canvas.height - gy);

    // static obstacles
    ctx.fillStyle = OBSTACLE;
    for (const r of g.rects) {
      const [rx0, ry1] = w2s(r.x0, r.y1);
      const [rx1, ry0] = w2s(r.x1, r.y0);
      ctx.fillRect(rx0, ry1, rx1 - rx0, ry0 - ry1);
    }
    for (const c of g.circles) {
      const [cx, cy] = w2s(c.cx, c.cy);
      ctx.beginPath();
      ctx.arc(cx, cy, c.r * s, 0, Math.PI * 2);
      ctx.fill();
    }
    // scripted obstacles at server-reported positions
    if (vm.frame?.obs) {
      ctx.fillStyle = "#8a93a5";
      for (const [ox, oy, orad] of vm.frame.obs) {
        const [cx, cy] = w2s(ox, oy);
        ctx.beginPath();
        ctx.arc(cx, cy, orad * s, 0, Math.PI * 2);
        ctx.fill();
      }
    }

    // goal line
    const [qx, qy0] = w2s(g.goal.x, g.goal.y0);
    const [, qy1] = w2s(g.goal.x, g.goal.y1);
    ctx.strokeStyle = GOAL;
    ctx.lineWidth = 3;
    ctx.setLineDash([10, 6]);
    ctx.beginPath();
    ctx.moveTo(qx, qy0);
    ctx.lineTo(qx, qy1);
    ctx.stroke();
    ctx.setLineDash([]);

    if (vm.frame) {
      this.drawLander(ctx, vm, w2s, s);
      this.drawHud(ctx, vm);
    }
    if (vm.outcome) {
      this.drawBanner(
        ctx,
        `trial ${vm.outcome.status}` +
          (vm.outcome.crash_reason ? `: ${vm.outcome.crash_reason}` : "") +
          "  (press R for a new trial)",
      );
    } else if (vm.banner) {
      this.drawBanner(ctx, vm.banner);
    }
  }

  private drawLander(
    ctx: CanvasRenderingContext2D,
    vm: CockpitViewModel,
    w2s: (x: number, y: number) => [number, number],
    s: number,
  ): void {
    const f = vm.frame!;
    const [x, y] = [f.x[0], f.x[1]];
    const heading = f.x[2];
    const [cx, cy] = w2s(x, y);
    const r = 1.0 * s;

    // clearance ring turns red inside d_safe
    ctx.strokeStyle = f.unsafe ? "#e23b3b" : "#31405a";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.arc(cx, cy, (1.0 + vm.dSafe) * s, 0, Math.PI * 2);
    ctx.stroke();

    // body-up axis in world coords is (sin h, cos h); canvas y is flipped
    const ux = Math.sin(heading);
    const uy = Math.cos(heading);

    // main plume, scaled by the applied throttle
    const thrust = Math.max(0, f.applied[0]);
    if (thrust > 0) {
      ctx.strokeStyle = "#ffb05a";
      ctx.lineWidth = 3;
      ctx.beginPath();
      ctx.moveTo(cx - ux * r, cy + uy * r);
      ctx.lineTo(cx - ux * r * (1 + 1.6 * thrust), cy + uy * r * (1 + 1.6 * thrust));
      ctx.stroke();
    }
    // rotation jet puffs
    const rot = f.applied[1];
    if (Math.abs(rot) > 1e-3) {
      ctx.strokeStyle = "#9ad1ff";
      ctx.lineWidth = 2;
      const side = Math.sign(rot);
      ctx.beginPath();
      ctx.moveTo(cx + uy * r * side, cy + ux * r * side);
      ctx.lineTo(
        cx + uy * r * side * (1 + Math.abs(rot)),
        cy + ux * r * side * (1 + Math.abs(rot)),
      );
      ctx.stroke();
    }

    // hull
    ctx.fillStyle = HULL;
    ctx.beginPath();
    ctx.arc(cx, cy, r, 0, Math.PI * 2);
    ctx.fill();
    ctx.strokeStyle = modeColor(f.mode);
    ctx.lineWidth = 3;
    ctx.stroke();
    // nose marker along body-up
    ctx.strokeStyle = "#2e3440";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    ctx.lineTo(cx + ux * r, cy - uy * r);
    ctx.stroke();

    // commanded vs applied vectors, drawn only when they differ
    const changed =
      f.mode === "reject" ||
      f.mode === "replace" ||
      f.u_h[0] !== f.applied[0] ||
      f.u_h[1] !== f.applied[1];
    if (changed) {
      this.drawControlVector(ctx, cx, cy, f.u_h, "#e6a817", s);
      this.drawControlVector(ctx, cx, cy, f.applied, "#3ddc84", s);
    }
  }

  private drawControlVector(
    ctx: CanvasRenderingContext2D,
    cx: number,
    cy: number,
    u: [number, number],
    color: string,
    s: number,
  ): void {
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    ctx.lineTo(cx + u[1] * 2 * s, cy - u[0] * 2 * s);
    ctx.stroke();
  }

  private drawHud(ctx: CanvasRenderingContext2D, vm: CockpitViewModel): void {
    const f = vm.frame!;
    const speed = Math.hypot(f.x[3], f.x[4]);
    const headingDeg = (f.x[2] * 180) / Math.PI;
    ctx.fillStyle = "#c8d0dc";
    ctx.font = "13px monospace";
    const lines = [
      `speed    ${speed.toFixed(2)} m/s`,
      `heading  ${headingDeg.toFixed(1)} deg`,
      `clear    ${f.distance.toFixed(2)} m (d_safe ${vm.dSafe.toFixed(1)})`,
      `input    ${vm.inputDevice}`,
      `trials   ${vm.stats.successes}/${vm.stats.trials} ok, ${vm.stats.crashes} crashed`,
    ];
    lines.forEach((line, i) => ctx.fillText(line, 12, 20 + 16 * i));

    // intervention indicator
    ctx.fillStyle = modeColor(f.mode);
    ctx.fillRect(12, 20 + 16 * lines.length, 14, 14);
    ctx.fillStyle = "#c8d0dc";
    ctx.fillText(modeLabel(f.mode), 32, 31 + 16 * lines.length);
  }

  private drawBanner(ctx: CanvasRenderingContext2D, text: string): void {
    ctx.fillStyle = "rgba(20, 24, 36, 0.85)";
    const w = this.canvas.width;
    ctx.fillRect(0, this.canvas.height / 2 - 24, w, 48);
    ctx.fillStyle = "#e8edf5";
    ctx.font = "16px monospace";
    ctx.textAlign = "center";
    ctx.fillText(text, w / 2, this.canvas.height / 2 + 5);
    ctx.textAlign = "left";
  }
}
