/** In-memory socket pair with a scripted session on the server side.
 *
 * Mirrors the service's frame sequence: validate hello, emit countdowns,
 * then state frames (recording mouse messages per tick), then the end
 * frame.  Delivery is synchronous; tests step the script explicitly.
 */

import { SocketLike } from "../src/session.js";

export class MockSocket implements SocketLike {
  onopen: (() => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  sent: string[] = [];
  closed = false;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  /** Server side: deliver a frame to the client. */
  deliver(msg: object): void {
    this.onmessage?.({ data: JSON.stringify(msg) });
  }

  deliverRaw(data: string): void {
    this.onmessage?.({ data });
  }

  open(): void {
    this.onopen?.();
  }

  lastSent(): object {
    return JSON.parse(this.sent[this.sent.length - 1]);
  }

  sentOfType(type: string): object[] {
    return this.sent.map((s) => JSON.parse(s)).filter((m) => m.type === type);
  }
}

export interface MockFrame {
  thick: number[];
  thin: number[];
}

/** Scripted single-session server: countdown, frames, end. */
export class MockServer {
  readonly socket = new MockSocket();
  helloOk = false;

  constructor(
    readonly sessionCode: string,
    readonly countdown: number = 3,
  ) {}

  start(): void {
    this.socket.open();
    const hello = this.socket.lastSent() as { type: string; session: string };
    this.helloOk = hello.type === "hello" && hello.session === this.sessionCode;
    if (!this.helloOk) {
      this.socket.close();
      return;
    }
    for (let n = this.countdown; n >= 1; n--) {
      this.socket.deliver({ type: "countdown", n });
    }
  }

  /** Emit one state frame; returns the client's mouse reply for that tick. */
  frame(tick: number, f: MockFrame): { tick: number; px: number } | null {
    const before = this.socket.sent.length;
    this.socket.deliver({ type: "state", tick, ...f });
    const replies = this.socket.sent
      .slice(before)
      .map((s) => JSON.parse(s))
      .filter((m) => m.type === "mouse");
    return replies.length > 0 ? replies[replies.length - 1] : null;
  }

  end(cause: string): void {
    this.socket.deliver({ type: "end", cause });
    this.socket.close();
  }
}
