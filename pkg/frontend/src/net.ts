/**
 * Connection management: join handshake, frame dispatch, reconnect with
 * exponential backoff. The socket is the only source of truth; on drop the
 * client reconnects and rejoins, starting a fresh trial.
 */

import { joinFrame, parseServerFrame, ServerFrame } from "./protocol.js";

export interface ClientCallbacks {
  onFrame: (frame: ServerFrame) => void;
  onStatusChange: (status: "open" | "closed" | "reconnecting") => void;
  onProtocolError?: (raw: string) => void;
}

export class CockpitClient {
  private ws: WebSocket | null = null;
  private backoffMs = 500;
  private closed = false;
  private seq = 0;

  constructor(
    private readonly url: string,
    private readonly env: string,
    private readonly paradigm: string,
    private readonly callbacks: ClientCallbacks,
  ) {}

  connect(): void {
    this.closed = false;
    this.open();
  }

  private open(): void {
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.backoffMs = 500;
      ws.send(joinFrame(this.env, this.paradigm));
      this.callbacks.onStatusChange("open");
    };
    ws.onmessage = (event) => {
      const frame = parseServerFrame(String(event.data));
      if (frame === null) {
        this.callbacks.onProtocolError?.(String(event.data));
        return;
      }
      this.callbacks.onFrame(frame);
    };
    ws.onclose = () => {
      this.ws = null;
      if (this.closed) return;
      this.callbacks.onStatusChange("reconnecting");
      setTimeout(() => this.open(), this.backoffMs);
      this.backoffMs = Math.min(this.backoffMs * 2, 8000);
    };
    ws.onerror = () => {
      ws.close();
    };
  }

  sendControl(u: [number, number]): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.seq += 1;
      this.ws.send(JSON.stringify({ type: "control", seq: this.seq, u }));
    }
  }

  sendReset(): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(JSON.stringify({ type: "reset" }));
    }
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
    this.callbacks.onStatusChange("closed");
  }
}
