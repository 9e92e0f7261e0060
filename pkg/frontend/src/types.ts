/** Shared wire types for the annotation service endpoints. */

export type TagLabel = "IN" | "OUT" | "OTHER";

export const TAG_LABELS: readonly TagLabel[] = ["IN", "OUT", "OTHER"];

export const SENTINEL = "[SENT]";

/** One annotation task as served by GET /tasks. */
export interface AnnotationTask {
  comment_id: string;
  text: string;
  team: string;
  opponent: string;
  parent: string | null;
  context: string;
}

/** A labeled span; offsets count Unicode code points over the served text. */
export interface SpanRecord {
  start: number;
  end: number;
  label: TagLabel;
  implicit: boolean;
  confidence?: number;
}

/** The record POSTed to /annotations. */
export interface AnnotationRecord {
  comment_id: string;
  annotator: string;
  spans: SpanRecord[];
}

export interface Progress {
  tasks: number;
  annotated: number;
  records: number;
}
