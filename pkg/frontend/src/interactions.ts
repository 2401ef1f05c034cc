// Pointer-gesture bookkeeping: stroke capture, long-press detection, and
// measurement of active interaction time.

import type { ActionPayload, SeedLabel } from "./types.js";

export const LONG_PRESS_MS = 500;

/** Accumulates pointer-active milliseconds across a session. */
export class InteractionTimer {
  private activeSince: number | null = null;
  private accumulated = 0;

  constructor(private readonly now: () => number = () => performance.now()) {}

  pointerDown(): void {
    if (this.activeSince === null) this.activeSince = this.now();
  }

  pointerUp(): void {
    if (this.activeSince !== null) {
      this.accumulated += this.now() - this.activeSince;
      this.activeSince = null;
    }
  }

  /** Milliseconds of active input since the last take(), for one action. */
  take(): number {
    if (this.activeSince !== null) {
      const now = this.now();
      this.accumulated += now - this.activeSince;
      this.activeSince = now;
    }
    const out = this.accumulated;
    this.accumulated = 0;
    return out;
  }
}

/**
 * Collects canvas pointer samples into a deduplicated cell path and emits a
 * stroke action on release.
 */
export class StrokeRecorder {
  private cells: [number, number][] = [];
  private seen = new Set<string>();
  private drawing = false;

  start(): void {
    this.drawing = true;
    this.cells = [];
    this.seen.clear();
  }

  move(x: number, y: number): void {
    if (!this.drawing) return;
    const cx = Math.floor(x);
    const cy = Math.floor(y);
    const key = `${cx},${cy}`;
    if (!this.seen.has(key)) {
      this.seen.add(key);
      this.cells.push([cx, cy]);
    }
  }

  /** Ends the stroke; returns the action or null for an empty gesture. */
  end(label: SeedLabel): ActionPayload | null {
    this.drawing = false;
    if (this.cells.length === 0) return null;
    const points = this.cells;
    this.cells = [];
    this.seen.clear();
    return { type: "stroke", points, label };
  }

  get active(): boolean {
    return this.drawing;
  }
}

/**
 * Distinguishes taps from long-presses. Feed pointer events with
 * timestamps; `release` reports which gesture completed.
 */
export class PressTracker {
  private downAt: number | null = null;
  private position: [number, number] | null = null;

  constructor(private readonly thresholdMs: number = LONG_PRESS_MS) {}

  down(x: number, y: number, timestampMs: number): void {
    this.downAt = timestampMs;
    this.position = [Math.floor(x), Math.floor(y)];
  }

  release(timestampMs: number): { kind: "tap" | "longpress"; x: number; y: number } | null {
    if (this.downAt === null || this.position === null) return null;
    const held = timestampMs - this.downAt;
    const [x, y] = this.position;
    this.downAt = null;
    this.position = null;
    return { kind: held >= this.thresholdMs ? "longpress" : "tap", x, y };
  }

  cancel(): void {
    this.downAt = null;
    this.position = null;
  }
}

/** Hit-test a tap against the joint proposal circles. */
export function hitProposal(
  proposals: { index: number; x: number; y: number }[],
  x: number,
  y: number,
  radius = 2.5,
): number | null {
  let best: { index: number; d2: number } | null = null;
  for (const p of proposals) {
    const d2 = (p.x - x) ** 2 + (p.y - y) ** 2;
    if (d2 <= radius * radius && (best === null || d2 < best.d2)) {
      best = { index: p.index, d2 };
    }
  }
  return best === null ? null : best.index;
}
