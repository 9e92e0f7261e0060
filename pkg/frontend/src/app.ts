/**
 * Annotation UI: highlight spans in a comment, tag them IN/OUT/OTHER,
 * rate confidence, and submit to the annotation service.
 *
 * Sentinel tokens render as clickable pilcrow-style markers that occupy
 * their literal text positions, so explicit and implicit spans share one
 * offset space. Keyboard: 1/2/3 tag the current selection, Shift+1..5
 * sets the confidence applied at tagging time, Enter submits, N skips.
 */

import { AnnotationClient } from "./api.js";
import { utf16ToCodePoint } from "./offsets.js";
import { SpanStage } from "./staging.js";
import { AnnotationTask, SENTINEL, TAG_LABELS, TagLabel } from "./types.js";

const LABEL_KEYS: Record<string, TagLabel> = { "1": "IN", "2": "OUT", "3": "OTHER" };
const LABEL_CLASS: Record<TagLabel, string> = {
  IN: "hl-in",
  OUT: "hl-out",
  OTHER: "hl-other",
};

const PROTOCOL_REMINDERS = [
  "Highlight words or phrases that refer to people, teams, sub-groups or organizations.",
  "Tag references to the commenter's own team IN, the opponent OUT, any other NFL team OTHER.",
  "If a sentence refers to a group only implicitly, click its ¶ marker and tag that instead.",
  "Do not tag a ¶ marker when a word in that sentence can carry the same tag.",
  "Leave the comment untagged when no reference can be verified.",
  "Confidence defaults to 5 (fully confident); lower it only when unsure.",
];

export class AnnotatorApp {
  private client: AnnotationClient;
  private tasks: AnnotationTask[] = [];
  private index = 0;
  private stage: SpanStage | null = null;
  private annotator: string;
  private confidence: number | undefined;
  private root: HTMLElement;

  constructor(root: HTMLElement, client: AnnotationClient, annotator: string) {
    this.root = root;
    this.client = client;
    this.annotator = annotator;
  }

  async start(): Promise<void> {
    try {
      this.tasks = await this.client.loadTasks();
    } catch (err) {
      this.renderError(`Could not reach the annotation service: ${String(err)}`, () =>
        this.start(),
      );
      return;
    }
    if (this.tasks.length === 0) {
      this.root.textContent = "No tasks to annotate.";
      return;
    }
    this.index = 0;
    this.openTask();
    document.addEventListener("keydown", (ev) => this.onKey(ev));
  }

  private currentTask(): AnnotationTask {
    const task = this.tasks[this.index];
    if (!task) throw new Error("no current task");
    return task;
  }

  private openTask(): void {
    const task = this.currentTask();
    this.stage = new SpanStage(task.text);
    this.confidence = undefined;
    this.render();
  }

  private onKey(ev: KeyboardEvent): void {
    if (ev.shiftKey && /^[1-5]$/.test(ev.key)) {
      this.confidence = Number(ev.key);
      this.flash(`confidence set to ${this.confidence}`);
      return;
    }
    const label = LABEL_KEYS[ev.key];
    if (label) {
      this.tagSelection(label);
      return;
    }
    if (ev.key === "Enter") {
      void this.submit();
    } else if (ev.key.toLowerCase() === "n") {
      this.next();
    }
  }

  /** UTF-16 offset of a DOM position inside the text container. */
  private domOffset(container: Node, node: Node, offset: number): number {
    let total = 0;
    const walk = (current: Node): boolean => {
      if (current === node) {
        if (current.nodeType === Node.TEXT_NODE) {
          total += offset;
        } else {
          for (let i = 0; i < offset; i += 1) {
            total += current.childNodes[i]?.textContent?.length ?? 0;
          }
        }
        return true;
      }
      if (current.nodeType === Node.TEXT_NODE) {
        total += current.textContent?.length ?? 0;
        return false;
      }
      for (const child of Array.from(current.childNodes)) {
        if (walk(child)) return true;
      }
      return false;
    };
    walk(container);
    return total;
  }

  private tagSelection(label: TagLabel): void {
    if (!this.stage) return;
    const container = this.root.querySelector(".comment-text");
    const selection = window.getSelection();
    if (!container || !selection || selection.rangeCount === 0 || selection.isCollapsed) {
      this.flash("highlight a word or phrase first");
      return;
    }
    const range = selection.getRangeAt(0);
    const task = this.currentTask();
    const startUtf16 = this.domOffset(container, range.startContainer, range.startOffset);
    const endUtf16 = this.domOffset(container, range.endContainer, range.endOffset);
    const start = utf16ToCodePoint(task.text, Math.min(startUtf16, endUtf16));
    const end = utf16ToCodePoint(task.text, Math.max(startUtf16, endUtf16));
    const result = this.stage.record(start, end, label, this.confidence);
    if (!result.ok) {
      this.flash(result.message ?? "selection rejected");
      return;
    }
    selection.removeAllRanges();
    this.render();
  }

  private tagSentinel(cpStart: number, label: TagLabel): void {
    if (!this.stage) return;
    const result = this.stage.record(
      cpStart,
      cpStart + SENTINEL.length,
      label,
      this.confidence,
    );
    this.flash(result.ok ? `marker tagged ${label}` : result.message ?? "rejected");
    this.render();
  }

  private async submit(): Promise<void> {
    if (!this.stage) return;
    const task = this.currentTask();
    const outcome = await this.client.submit({
      comment_id: task.comment_id,
      annotator: this.annotator,
      spans: this.stage.toRecordSpans(),
    });
    if (outcome.ok) {
      this.flash("saved");
      this.next();
    } else if (outcome.retained) {
      this.flash("service unreachable; record kept locally for resubmission");
    } else {
      this.flash(`rejected by service: ${JSON.stringify(outcome.detail)}`);
    }
  }

  private next(): void {
    if (this.index + 1 < this.tasks.length) {
      this.index += 1;
      this.openTask();
    } else {
      this.root.innerHTML = "<p>All tasks done. Thank you!</p>";
    }
  }

  private flash(message: string): void {
    const bar = this.root.querySelector(".statusbar");
    if (bar) bar.textContent = message;
  }

  private renderError(message: string, retry: () => void): void {
    this.root.innerHTML = "";
    const p = document.createElement("p");
    p.className = "error";
    p.textContent = message;
    const button = document.createElement("button");
    button.textContent = "Retry";
    button.addEventListener("click", retry);
    this.root.append(p, button);
  }

  private render(): void {
    if (!this.stage) return;
    const task = this.currentTask();
    this.root.innerHTML = "";

    const header = document.createElement("div");
    header.className = "context-panel";
    const rows: Array<[string, string]> = [
      ["task", `${this.index + 1} / ${this.tasks.length} (${task.comment_id})`],
      ["your team (IN)", task.team],
      ["opponent (OUT)", task.opponent],
      ["live context", task.context],
    ];
    for (const [key, value] of rows) {
      const row = document.createElement("div");
      row.innerHTML = `<strong>${key}:</strong> `;
      row.append(value);
      header.append(row);
    }
    if (task.parent) {
      const row = document.createElement("div");
      row.innerHTML = "<strong>parent comment:</strong> ";
      row.append(task.parent);
      header.append(row);
    }
    this.root.append(header);

    const textBox = document.createElement("div");
    textBox.className = "comment-text";
    this.renderText(textBox, task.text);
    this.root.append(textBox);

    const staged = document.createElement("div");
    staged.className = "staged";
    for (const span of this.stage.staged) {
      const chip = document.createElement("span");
      chip.className = `chip ${LABEL_CLASS[span.label]}`;
      const surface = span.implicit ? "¶" : [...task.text].slice(span.start, span.end).join("");
      chip.textContent = `${surface} → ${span.label} (${span.confidence ?? 5})`;
      const remove = document.createElement("button");
      remove.textContent = "×";
      remove.addEventListener("click", () => {
        this.stage?.remove(span.start, span.end);
        this.render();
      });
      chip.append(remove);
      staged.append(chip);
    }
    this.root.append(staged);

    const controls = document.createElement("div");
    controls.className = "controls";
    for (const label of TAG_LABELS) {
      const button = document.createElement("button");
      button.textContent = `[${label}]`;
      button.className = LABEL_CLASS[label];
      button.addEventListener("click", () => this.tagSelection(label));
      controls.append(button);
    }
    const submit = document.createElement("button");
    submit.textContent = "Submit (Enter)";
    submit.addEventListener("click", () => void this.submit());
    controls.append(submit);
    this.root.append(controls);

    const reminders = document.createElement("ul");
    reminders.className = "protocol";
    for (const reminder of PROTOCOL_REMINDERS) {
      const li = document.createElement("li");
      li.textContent = reminder;
      reminders.append(li);
    }
    this.root.append(reminders);

    const status = document.createElement("div");
    status.className = "statusbar";
    this.root.append(status);
  }

  /** Render text with sentinel markers and staged highlights in place. */
  private renderText(container: HTMLElement, text: string): void {
    const chars = [...text];
    const spans = this.stage?.staged ?? [];
    let cp = 0;
    let utf16 = 0;
    let buffer = "";
    const flushText = () => {
      if (buffer) {
        container.append(document.createTextNode(buffer));
        buffer = "";
      }
    };
    while (cp < chars.length) {
      const staged = spans.find((sp) => sp.start === cp);
      if (staged && !staged.implicit) {
        flushText();
        const mark = document.createElement("mark");
        mark.className = LABEL_CLASS[staged.label];
        mark.textContent = chars.slice(staged.start, staged.end).join("");
        container.append(mark);
        for (let i = staged.start; i < staged.end; i += 1) {
          utf16 += chars[i]?.length ?? 0;
        }
        cp = staged.end;
        continue;
      }
      if (text.startsWith(SENTINEL, utf16)) {
        flushText();
        const marker = document.createElement("button");
        marker.className = "sentinel" + (staged?.implicit ? ` ${LABEL_CLASS[staged.label]}` : "");
        marker.textContent = SENTINEL;
        marker.title = "click: tag ¶ IN · shift+click: OTHER · right-click: OUT";
        const at = cp;
        marker.addEventListener("click", (ev) =>
          this.tagSentinel(at, ev.shiftKey ? "OTHER" : "IN"),
        );
        marker.addEventListener("contextmenu", (ev) => {
          ev.preventDefault();
          this.tagSentinel(at, "OUT");
        });
        container.append(marker);
        cp += SENTINEL.length;
        utf16 += SENTINEL.length;
        continue;
      }
      const ch = chars[cp] ?? "";
      buffer += ch;
      utf16 += ch.length;
      cp += 1;
    }
    flushText();
  }
}

export async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const params = new URLSearchParams(window.location.search);
  const base = params.get("service") ?? "";
  const annotator = params.get("annotator") ?? "anonymous";
  const app = new AnnotatorApp(root, new AnnotationClient(base), annotator);
  await app.start();
}
