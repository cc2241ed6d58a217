/** Mouse capture: clamp to the pixel-column range and hold the latest value.
 *
 * The canvas x coordinate is 0-based (0..width-1); pixel columns on the
 * wire are 1-based (1..width).  The left edge maps to column 1.
 */

export const SCREEN_WIDTH = 1200;

export function canvasXToPx(x: number, width: number = SCREEN_WIDTH): number {
  const px = Math.round(x) + 1;
  return Math.min(width, Math.max(1, px));
}

/**
 * Latest-wins pointer mailbox.  `move` may be called at any rate; `take`
 * is called once per server tick and always returns a value (the held
 * position is re-sent when the pointer has not moved).
 */
export class PointerMailbox {
  private px: number;

  constructor(initialPx: number = Math.round(SCREEN_WIDTH / 2)) {
    this.px = initialPx;
  }

  move(canvasX: number, width: number = SCREEN_WIDTH): void {
    this.px = canvasXToPx(canvasX, width);
  }

  take(): number {
    return this.px;
  }
}
