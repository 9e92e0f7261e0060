/**
 * Client for the annotation service endpoints (GET /tasks,
 * POST /annotations, GET /progress).
 *
 * A failed submission keeps the record in a local outbox for
 * resubmission; the service stays the single source of truth for
 * validation.
 */

import { AnnotationRecord, AnnotationTask, Progress } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface SubmitOutcome {
  ok: boolean;
  retained: boolean;
  detail?: unknown;
}

export class AnnotationClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;
  readonly outbox: AnnotationRecord[] = [];

  constructor(baseUrl: string, fetchImpl: FetchLike = fetch) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl;
  }

  async loadTasks(): Promise<AnnotationTask[]> {
    const resp = await this.fetchImpl(`${this.baseUrl}/tasks`);
    if (!resp.ok) {
      throw new Error(`task list failed: HTTP ${resp.status}`);
    }
    return (await resp.json()) as AnnotationTask[];
  }

  async progress(): Promise<Progress> {
    const resp = await this.fetchImpl(`${this.baseUrl}/progress`);
    if (!resp.ok) {
      throw new Error(`progress failed: HTTP ${resp.status}`);
    }
    return (await resp.json()) as Progress;
  }

  /**
   * Submit a record. Validation failures (4xx) surface the server detail
   * and are NOT retained (the annotator must fix the spans); transport
   * failures retain the record locally for resubmission.
   */
  async submit(record: AnnotationRecord): Promise<SubmitOutcome> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(`${this.baseUrl}/annotations`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(record),
      });
    } catch {
      this.outbox.push(record);
      return { ok: false, retained: true };
    }
    if (resp.ok) {
      return { ok: true, retained: false };
    }
    let detail: unknown;
    try {
      detail = ((await resp.json()) as { detail?: unknown }).detail;
    } catch {
      detail = `HTTP ${resp.status}`;
    }
    if (resp.status >= 500) {
      this.outbox.push(record);
      return { ok: false, retained: true, detail };
    }
    return { ok: false, retained: false, detail };
  }

  /** Retry everything in the outbox; keeps whatever still fails. */
  async flushOutbox(): Promise<number> {
    const pending = this.outbox.splice(0);
    let sent = 0;
    for (const record of pending) {
      const outcome = await this.submit(record);
      if (outcome.ok) {
        sent += 1;
      }
    }
    return sent;
  }
}
