/** Browser entry point: wires the session machine to a real WebSocket,
 * the canvas renderer, and pointer events.
 *
 * Query parameters: ?server=ws://host:port&session=code&subject=1
 */

import { ClientSession, SocketLike } from "./session.js";
import { renderPhase, SCREEN_W, SCREEN_H, Canvas2DLike } from "./renderer.js";

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

export function start(): void {
  const server = param("server", "ws://127.0.0.1:8700");
  const sessionCode = param("session", "trial");
  const subject = parseInt(param("subject", "1"), 10);

  const canvas = document.getElementById("screen") as HTMLCanvasElement;
  canvas.width = SCREEN_W;
  canvas.height = SCREEN_H;
  const ctx = canvas.getContext("2d") as unknown as Canvas2DLike;

  const ws = new WebSocket(`${server}/ws`) as unknown as SocketLike;
  const session = new ClientSession(ws, { subject, sessionCode });

  canvas.addEventListener("mousemove", (ev) => {
    const rect = canvas.getBoundingClientRect();
    const x = ((ev.clientX - rect.left) / rect.width) * SCREEN_W;
    session.pointerMoved(x);
  });
  window.addEventListener("keydown", (ev) => {
    if (ev.key === "Escape") session.abort();
  });

  const ownIndex = subject - 1;
  const draw = () => {
    renderPhase(ctx, session.phase, ownIndex);
    requestAnimationFrame(draw);
  };
  requestAnimationFrame(draw);
}

if (typeof document !== "undefined" && document.getElementById("screen")) {
  start();
}
