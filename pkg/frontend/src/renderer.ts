/** Canvas renderer for the balancing screen.
 *
 * 1200x600 surface; full-height vertical lines: thick lines mark the tip
 * position(s), thin lines the base position(s).  The subject's own base
 * line is tinted so two players can tell their cursor apart; line weights
 * keep the thick/thin convention.  Draws only what the latest server
 * frame says.
 */

import { Phase } from "./session.js";

export const SCREEN_W = 1200;
export const SCREEN_H = 600;
const THICK_WIDTH = 5;
const THIN_WIDTH = 1;
const BG = "#ffffff";
const LINE = "#000000";
const OWN_BASE = "#0055cc";

/** The 2D-context surface the renderer needs (stubbed in tests). */
export interface Canvas2DLike {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  font: string;
  textAlign: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
}

/** Pixel column (1-based) to canvas x coordinate (0-based, line center). */
export function pxToCanvasX(px: number): number {
  return px - 0.5;
}

function vline(ctx: Canvas2DLike, px: number, width: number, color: string): void {
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  const x = pxToCanvasX(px);
  ctx.moveTo(x, 0);
  ctx.lineTo(x, SCREEN_H);
  ctx.stroke();
}

function overlay(ctx: Canvas2DLike, text: string): void {
  ctx.fillStyle = LINE;
  ctx.font = "48px sans-serif";
  ctx.textAlign = "center";
  ctx.fillText(text, SCREEN_W / 2, SCREEN_H / 2);
}

/**
 * Draw one frame for the current phase.  `ownIndex` is the 0-based index
 * of the subject's own entry in the thin-line array.
 */
export function renderPhase(ctx: Canvas2DLike, phase: Phase, ownIndex: number): void {
  ctx.fillStyle = BG;
  ctx.fillRect(0, 0, SCREEN_W, SCREEN_H);
  switch (phase.kind) {
    case "connecting":
      overlay(ctx, "connecting…");
      break;
    case "waiting":
      overlay(ctx, "waiting for session…");
      break;
    case "countdown":
      overlay(ctx, String(phase.n));
      break;
    case "running": {
      const { thick, thin } = phase.frame;
      for (const px of thick) vline(ctx, px, THICK_WIDTH, LINE);
      thin.forEach((px, i) => {
        vline(ctx, px, THIN_WIDTH, i === ownIndex ? OWN_BASE : LINE);
      });
      break;
    }
    case "ended":
      overlay(ctx, `session over: ${phase.cause}`);
      break;
    case "disconnected":
      overlay(ctx, "connection lost — reload to reconnect");
      break;
  }
}
