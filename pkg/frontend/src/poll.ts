// Polling helpers with injectable clocks/timers so tests can drive time.

import type { AttendanceResponse } from "./api.js";

export interface Clock {
  now(): number;
}

export const systemClock: Clock = { now: () => Date.now() };

/** Flags data as stale once its signature stops changing for thresholdMs. */
export class StaleTracker {
  private lastSignature: string | null = null;
  private lastChange = 0;

  constructor(
    private thresholdMs = 5000,
    private clock: Clock = systemClock,
  ) {}

  update(signature: string): void {
    if (signature !== this.lastSignature) {
      this.lastSignature = signature;
      this.lastChange = this.clock.now();
    }
  }

  isStale(): boolean {
    if (this.lastSignature === null) return false; // nothing received yet
    return this.clock.now() - this.lastChange > this.thresholdMs;
  }
}

/** Student ids whose status or reason changed between two polls (for row highlight). */
export function diffChangedStudents(
  prev: AttendanceResponse | null,
  next: AttendanceResponse,
): Set<string> {
  const changed = new Set<string>();
  if (!prev) return changed;
  const before = new Map(prev.results.map((r) => [r.student_id, `${r.status}|${r.reason}`]));
  for (const row of next.results) {
    const sig = `${row.status}|${row.reason}`;
    if (before.has(row.student_id) && before.get(row.student_id) !== sig) {
      changed.add(row.student_id);
    }
  }
  return changed;
}

export type StopPolling = () => void;

/** setInterval wrapper that serializes async ticks and never overlaps them. */
export function startPolling(
  tick: () => Promise<void>,
  intervalMs: number,
  setTimer: (fn: () => void, ms: number) => ReturnType<typeof setInterval> = setInterval,
  clearTimer: (id: ReturnType<typeof setInterval>) => void = clearInterval,
): StopPolling {
  let running = false;
  const id = setTimer(() => {
    if (running) return;
    running = true;
    void tick().finally(() => {
      running = false;
    });
  }, intervalMs);
  void tick();
  return () => clearTimer(id);
}
