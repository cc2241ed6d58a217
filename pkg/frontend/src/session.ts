/** Client session state machine.
 *
 * Pure logic over an injectable socket: connects, identifies the subject,
 * consumes server frames, and posts at most one mouse message per server
 * tick (the state frame doubles as the tick acknowledgement).  Rendering
 * is the caller's job via the `frame` callback; the machine never
 * integrates or predicts the dynamics — drawn positions always come from
 * the latest server frame.
 */

import { parseServerMsg, StateMsg } from "./protocol.js";
import { PointerMailbox } from "./input.js";

/** The subset of the WebSocket surface the session uses (mockable). */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: (() => void) | null;
}

export type Phase =
  | { kind: "connecting" }
  | { kind: "waiting" } // hello sent, session not started yet
  | { kind: "countdown"; n: number }
  | { kind: "running"; frame: StateMsg }
  | { kind: "ended"; cause: string }
  | { kind: "disconnected" };

export interface SessionOptions {
  subject: number;
  sessionCode: string;
  onPhase?: (phase: Phase) => void;
}

export class ClientSession {
  readonly subject: number;
  readonly pointer = new PointerMailbox();
  phase: Phase = { kind: "connecting" };
  lastTick = -1;

  private readonly socket: SocketLike;
  private readonly onPhase: (phase: Phase) => void;

  constructor(socket: SocketLike, opts: SessionOptions) {
    this.subject = opts.subject;
    this.onPhase = opts.onPhase ?? (() => {});
    this.socket = socket;
    socket.onopen = () => {
      socket.send(
        JSON.stringify({
          type: "hello",
          subject: opts.subject,
          session: opts.sessionCode,
        }),
      );
      this.setPhase({ kind: "waiting" });
    };
    socket.onmessage = (ev) => this.handle(ev.data);
    socket.onclose = () => {
      if (this.phase.kind !== "ended") {
        this.setPhase({ kind: "disconnected" });
      }
    };
  }

  get inputEnabled(): boolean {
    const k = this.phase.kind;
    return k === "waiting" || k === "countdown" || k === "running";
  }

  /** Feed a pointer movement (canvas x coordinate). */
  pointerMoved(canvasX: number): void {
    if (this.inputEnabled) this.pointer.move(canvasX);
  }

  abort(): void {
    if (this.inputEnabled) this.socket.send(JSON.stringify({ type: "abort" }));
  }

  private setPhase(phase: Phase): void {
    this.phase = phase;
    this.onPhase(phase);
  }

  private handle(raw: string): void {
    const msg = parseServerMsg(raw);
    if (msg === null) return;
    switch (msg.type) {
      case "countdown":
        this.setPhase({ kind: "countdown", n: msg.n });
        break;
      case "state":
        if (msg.tick <= this.lastTick) return; // stale frame: drop
        this.lastTick = msg.tick;
        this.setPhase({ kind: "running", frame: msg });
        // one input per server tick, latest-wins, held value re-sent
        this.socket.send(
          JSON.stringify({ type: "mouse", tick: msg.tick, px: this.pointer.take() }),
        );
        break;
      case "end":
        this.setPhase({ kind: "ended", cause: msg.cause });
        break;
    }
  }
}
