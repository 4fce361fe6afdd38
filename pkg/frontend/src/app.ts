/** Application wiring: session flow from candidates to rendered report. */

import { ApiError, FlameClient } from "./api.js";
import type { Candidate, TrainReport } from "./api.js";
import { LabelDraft } from "./state.js";
import type { StorageLike } from "./state.js";
import { previewBounds, renderCard, renderReport } from "./render.js";

interface Banner {
  kind: "error" | "info";
  text: string;
  retryLabel?: string;
}

export interface AppOptions {
  root: HTMLElement;
  client: FlameClient;
  storage?: StorageLike | null;
}

export class LabelApp {
  readonly root: HTMLElement;
  readonly client: FlameClient;
  readonly storage: StorageLike | null;
  private readonly doc: Document;

  sessionId = "";
  candidates: Candidate[] = [];
  draft: LabelDraft | null = null;
  report: TrainReport | null = null;
  banner: Banner | null = null;
  allowPartial = false;
  busy = false;
  private retryAction: (() => Promise<void>) | null = null;

  constructor(options: AppOptions) {
    this.root = options.root;
    this.client = options.client;
    this.storage = options.storage ?? null;
    this.doc = this.root.ownerDocument;
  }

  async loadSession(sessionId: string): Promise<void> {
    this.sessionId = sessionId;
    try {
      const summary = await this.client.getSession(sessionId);
      if (summary.report) {
        this.report = summary.report;
        this.render();
        return;
      }
      const payload = await this.client.getCandidates(sessionId);
      this.candidates = payload.candidates;
      this.draft = new LabelDraft(
        sessionId,
        this.candidates.map((c) => c.shot_id),
        this.storage,
      );
      this.draft.adoptServerLabels(payload.labels ?? {});
      this.banner = null;
    } catch (err) {
      this.showError(err, () => this.loadSession(sessionId));
    }
    this.render();
  }

  /** Keyboard shortcuts: y/n label + advance, arrows navigate, u clears. */
  handleKey(key: string): void {
    if (!this.draft || this.report) return;
    switch (key) {
      case "y":
        this.draft.labelCurrentAndAdvance(1);
        break;
      case "n":
        this.draft.labelCurrentAndAdvance(0);
        break;
      case "ArrowRight":
      case "ArrowDown":
        this.draft.next();
        break;
      case "ArrowLeft":
      case "ArrowUp":
        this.draft.prev();
        break;
      case "u": {
        const shot = this.draft.currentShot();
        if (shot) this.draft.clear(shot);
        break;
      }
      default:
        return;
    }
    this.render();
  }

  setLabel(shotId: string, value: 0 | 1): void {
    if (!this.draft) return;
    this.draft.set(shotId, value);
    this.render();
  }

  /** Push the draft through the labels endpoint, then train and report. */
  async submitAndTrain(): Promise<void> {
    if (!this.draft || this.busy) return;
    if (!this.draft.isComplete() && !this.allowPartial) {
      this.banner = {
        kind: "info",
        text: `${this.draft.remaining()} candidates still unlabeled`,
      };
      this.render();
      return;
    }
    this.busy = true;
    this.render();
    try {
      await this.client.submitLabels(this.sessionId, this.draft.toPayload());
      this.report = await this.client.train(this.sessionId, this.allowPartial);
      this.draft.discard();
      this.banner = null;
    } catch (err) {
      if (err instanceof ApiError && err.code === "single_class") {
        this.banner = {
          kind: "error",
          text: "All labels are on one side; relabel so both classes are "
            + "present, then train again.",
        };
        this.retryAction = null;
      } else {
        this.showError(err, () => this.submitAndTrain());
      }
    } finally {
      this.busy = false;
    }
    this.render();
  }

  private showError(err: unknown, retry: (() => Promise<void>) | null): void {
    const text = err instanceof ApiError
      ? `${err.code}: ${err.message}`
      : String(err);
    this.banner = { kind: "error", text, retryLabel: retry ? "retry" : undefined };
    this.retryAction = retry;
  }

  async retry(): Promise<void> {
    const action = this.retryAction;
    this.retryAction = null;
    this.banner = null;
    if (action) await action();
  }

  render(): void {
    const doc = this.doc;
    this.root.textContent = "";

    if (this.banner) {
      const banner = doc.createElement("div");
      banner.id = "banner";
      banner.className = `banner ${this.banner.kind}`;
      banner.textContent = this.banner.text;
      if (this.banner.retryLabel) {
        const btn = doc.createElement("button");
        btn.id = "retry";
        btn.textContent = this.banner.retryLabel;
        btn.addEventListener("click", () => void this.retry());
        banner.appendChild(btn);
      }
      this.root.appendChild(banner);
    }

    if (this.report) {
      this.root.appendChild(renderReport(doc, this.report));
      return;
    }
    if (!this.draft) {
      const empty = doc.createElement("div");
      empty.className = "empty";
      empty.textContent = "No session loaded.";
      this.root.appendChild(empty);
      return;
    }

    const header = doc.createElement("div");
    header.className = "header";
    const progress = doc.createElement("span");
    progress.id = "progress";
    progress.textContent =
      `${this.draft.labeledCount()}/${this.candidates.length} labeled`;
    header.appendChild(progress);

    const partialToggle = doc.createElement("label");
    partialToggle.className = "partial-toggle";
    const checkbox = doc.createElement("input");
    checkbox.type = "checkbox";
    checkbox.id = "allow-partial";
    checkbox.checked = this.allowPartial;
    checkbox.addEventListener("change", () => {
      this.allowPartial = checkbox.checked;
      this.render();
    });
    partialToggle.appendChild(checkbox);
    partialToggle.appendChild(doc.createTextNode(" allow partial submit"));
    header.appendChild(partialToggle);

    const submit = doc.createElement("button");
    submit.id = "submit";
    submit.textContent = this.busy ? "training..." : "submit labels & train";
    submit.disabled =
      this.busy || (!this.draft.isComplete() && !this.allowPartial);
    submit.addEventListener("click", () => void this.submitAndTrain());
    header.appendChild(submit);
    this.root.appendChild(header);

    const grid = doc.createElement("div");
    grid.className = "grid";
    grid.id = "grid";
    const bounds = previewBounds(this.candidates);
    this.candidates.forEach((candidate, index) => {
      grid.appendChild(renderCard(
        doc, candidate, index, this.draft!,
        (ref) => this.client.assetUrl(ref), bounds, {
          onLabel: (shotId, value) => this.setLabel(shotId, value),
          onFocus: (i) => {
            this.draft!.moveTo(i);
            this.render();
          },
        }));
    });
    this.root.appendChild(grid);
  }
}
