/** Wire messages exchanged with the session service (JSON text frames). */

export interface CountdownMsg {
  type: "countdown";
  n: number;
}

export interface StateMsg {
  type: "state";
  tick: number;
  /** Pixel columns of the tip line(s): one entry (single) or two (coupled). */
  thick: number[];
  /** Pixel columns of the base line(s). */
  thin: number[];
}

export interface EndMsg {
  type: "end";
  cause: string;
}

export type ServerMsg = CountdownMsg | StateMsg | EndMsg;

export interface HelloMsg {
  type: "hello";
  subject: number;
  session: string;
}

export interface MouseMsg {
  type: "mouse";
  tick: number;
  px: number;
}

export interface AbortMsg {
  type: "abort";
}

export type ClientMsg = HelloMsg | MouseMsg | AbortMsg;

/** Parse a server frame; returns null for anything malformed or unknown. */
export function parseServerMsg(raw: string): ServerMsg | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const m = obj as Record<string, unknown>;
  switch (m.type) {
    case "countdown":
      return typeof m.n === "number" ? { type: "countdown", n: m.n } : null;
    case "state":
      if (
        typeof m.tick === "number" &&
        Array.isArray(m.thick) &&
        Array.isArray(m.thin) &&
        m.thick.every((v) => typeof v === "number") &&
        m.thin.every((v) => typeof v === "number")
      ) {
        return {
          type: "state",
          tick: m.tick,
          thick: m.thick as number[],
          thin: m.thin as number[],
        };
      }
      return null;
    case "end":
      return typeof m.cause === "string" ? { type: "end", cause: m.cause } : null;
    default:
      return null;
  }
}
