import { describe, expect, it } from "vitest";
import { canvasXToPx, PointerMailbox } from "../src/input.js";

describe("canvasXToPx", () => {
  it("maps the left edge to column 1", () => {
    expect(canvasXToPx(0)).toBe(1);
  });

  it("maps the right edge to column 1200", () => {
    expect(canvasXToPx(1199)).toBe(1200);
  });

  it("clamps out-of-surface coordinates", () => {
    expect(canvasXToPx(-10)).toBe(1);
    expect(canvasXToPx(1500)).toBe(1200);
  });

  it("rounds fractional coordinates", () => {
    expect(canvasXToPx(100.4)).toBe(101);
    expect(canvasXToPx(100.6)).toBe(102);
  });
});

describe("PointerMailbox", () => {
  it("returns the latest of several moves", () => {
    const m = new PointerMailbox();
    m.move(10);
    m.move(20);
    m.move(30);
    expect(m.take()).toBe(31);
  });

  it("holds the value across takes when idle", () => {
    const m = new PointerMailbox();
    m.move(99);
    expect(m.take()).toBe(100);
    expect(m.take()).toBe(100);
  });

  it("starts centered so the first tick always has a value", () => {
    expect(new PointerMailbox().take()).toBe(600);
  });
});
