// Step-accurate playback over exported crossing logs.

import type { CrossingRecord, OutcomeName } from "./types.js";

export interface Crossing {
  sessionId: string;
  crossingId: number;
  frames: CrossingRecord[];
  winner: OutcomeName | null;
}

export function parseExport(text: string): CrossingRecord[] {
  const records: CrossingRecord[] = [];
  for (const line of text.split("\n")) {
    const trimmed = line.trim();
    if (!trimmed) continue;
    const raw = JSON.parse(trimmed) as Record<string, unknown>;
    for (const field of [
      "session_id",
      "crossing_id",
      "t",
      "interesting",
      "speed_multiplier",
      "winner",
    ]) {
      if (!(field in raw)) {
        throw new Error(`record missing field ${field}`);
      }
    }
    records.push(raw as unknown as CrossingRecord);
  }
  return records;
}

export function groupCrossings(records: CrossingRecord[]): Crossing[] {
  const byKey = new Map<string, CrossingRecord[]>();
  for (const r of records) {
    const key = `${r.session_id}#${r.crossing_id}`;
    const bucket = byKey.get(key);
    if (bucket) {
      bucket.push(r);
    } else {
      byKey.set(key, [r]);
    }
  }
  const crossings: Crossing[] = [];
  for (const frames of byKey.values()) {
    frames.sort((a, b) => a.t - b.t);
    const last = frames[frames.length - 1];
    crossings.push({
      sessionId: frames[0].session_id,
      crossingId: frames[0].crossing_id,
      frames,
      winner: last.winner === "pending" ? null : last.winner,
    });
  }
  crossings.sort(
    (a, b) => a.sessionId.localeCompare(b.sessionId) || a.crossingId - b.crossingId,
  );
  return crossings;
}

export class ReplayCursor {
  private index = 0;

  constructor(readonly crossing: Crossing) {
    if (crossing.frames.length === 0) {
      throw new Error("crossing has no frames");
    }
  }

  get frame(): CrossingRecord {
    return this.crossing.frames[this.index];
  }

  get position(): number {
    return this.index;
  }

  get length(): number {
    return this.crossing.frames.length;
  }

  get atEnd(): boolean {
    return this.index === this.crossing.frames.length - 1;
  }

  // Winner is only known on the final frame, matching the log schema.
  get outcome(): OutcomeName | null {
    return this.atEnd ? this.crossing.winner : null;
  }

  step(): CrossingRecord {
    if (!this.atEnd) {
      this.index += 1;
    }
    return this.frame;
  }

  seek(index: number): CrossingRecord {
    if (index < 0 || index >= this.crossing.frames.length) {
      throw new Error(`frame ${index} out of range`);
    }
    this.index = index;
    return this.frame;
  }

  restart(): CrossingRecord {
    return this.seek(0);
  }
}
