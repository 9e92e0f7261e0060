/**
 * Local staging of spans before submission.
 *
 * Validation mirrors the service exactly: offsets address the served text
 * in code points, spans must stay in bounds and non-overlapping, implicit
 * spans cover exactly one sentinel token, explicit spans never cross one.
 * An empty confidence is full confidence (5).
 */

import { codePointLength, codePointSlice, sentinelRanges } from "./offsets.js";
import { SENTINEL, SpanRecord, TAG_LABELS, TagLabel } from "./types.js";

export interface StagingResult {
  ok: boolean;
  message?: string;
  span?: SpanRecord;
}

export class SpanStage {
  readonly text: string;
  private readonly length: number;
  private readonly sentinels: Array<[number, number]>;
  private spans: SpanRecord[] = [];

  constructor(text: string) {
    this.text = text;
    this.length = codePointLength(text);
    this.sentinels = sentinelRanges(text, SENTINEL);
  }

  get staged(): readonly SpanRecord[] {
    return this.spans;
  }

  /** Problems a candidate span would have; empty array means acceptable. */
  validate(start: number, end: number, label: string, implicit: boolean): string[] {
    const problems: string[] = [];
    if (!TAG_LABELS.includes(label as TagLabel)) {
      problems.push(`unknown label ${label}`);
    }
    if (start >= end) {
      problems.push("zero-length selection");
      return problems;
    }
    if (start < 0 || end > this.length) {
      problems.push(`selection ${start}..${end} outside text bounds 0..${this.length}`);
      return problems;
    }
    const covered = codePointSlice(this.text, start, end);
    if (implicit) {
      if (covered !== SENTINEL) {
        problems.push("implicit span must cover exactly one sentence marker");
      }
    } else if (this.sentinels.some(([s, e]) => start < e && s < end)) {
      problems.push("selection crosses a sentence marker");
    }
    if (this.spans.some((sp) => start < sp.end && sp.start < end)) {
      problems.push("selection overlaps an existing highlight");
    }
    return problems;
  }

  /**
   * Stage a highlighted selection. Selecting a sentinel marker exactly
   * produces an implicit span. Empty confidence defaults to 5.
   */
  record(start: number, end: number, label: TagLabel, confidence?: number): StagingResult {
    const implicit =
      start < end &&
      end <= this.length &&
      codePointSlice(this.text, Math.max(start, 0), end) === SENTINEL;
    const problems = this.validate(start, end, label, implicit);
    if (problems.length > 0) {
      return { ok: false, message: problems.join("; ") };
    }
    if (confidence !== undefined && (confidence < 1 || confidence > 5)) {
      return { ok: false, message: `confidence must be 1..5, got ${confidence}` };
    }
    const span: SpanRecord = {
      start,
      end,
      label,
      implicit,
      confidence: confidence ?? 5,
    };
    this.spans.push(span);
    this.spans.sort((a, b) => a.start - b.start || a.end - b.end);
    return { ok: true, span };
  }

  remove(start: number, end: number): boolean {
    const before = this.spans.length;
    this.spans = this.spans.filter((sp) => sp.start !== start || sp.end !== end);
    return this.spans.length < before;
  }

  clear(): void {
    this.spans = [];
  }

  /** The spans as they will be submitted (already sorted, validated). */
  toRecordSpans(): SpanRecord[] {
    return this.spans.map((sp) => ({ ...sp }));
  }
}
