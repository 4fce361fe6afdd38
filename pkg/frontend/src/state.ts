/** Draft label state with localStorage persistence and cursor navigation.
 *
 * Labels are only ever sent to the service through the labels endpoint; the
 * draft exists so a mid-labeling refresh or offline spell loses nothing.
 */

export type LabelValue = 0 | 1;

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

interface DraftBlob {
  labels: Record<string, LabelValue>;
  cursor: number;
}

export class LabelDraft {
  private labels = new Map<string, LabelValue>();
  private cursorIndex = 0;

  constructor(
    readonly sessionId: string,
    readonly shotIds: string[],
    private readonly storage: StorageLike | null = null,
  ) {
    this.restore();
  }

  private storageKey(): string {
    return `flame-draft-${this.sessionId}`;
  }

  private restore(): void {
    if (!this.storage) return;
    const raw = this.storage.getItem(this.storageKey());
    if (!raw) return;
    try {
      const blob = JSON.parse(raw) as DraftBlob;
      const known = new Set(this.shotIds);
      for (const [shotId, value] of Object.entries(blob.labels ?? {})) {
        if (known.has(shotId) && (value === 0 || value === 1)) {
          this.labels.set(shotId, value);
        }
      }
      if (Number.isInteger(blob.cursor)) {
        this.cursorIndex = Math.min(
          Math.max(blob.cursor, 0),
          Math.max(this.shotIds.length - 1, 0),
        );
      }
    } catch {
      // corrupt draft; start clean
    }
  }

  private persist(): void {
    if (!this.storage) return;
    const blob: DraftBlob = {
      labels: Object.fromEntries(this.labels),
      cursor: this.cursorIndex,
    };
    this.storage.setItem(this.storageKey(), JSON.stringify(blob));
  }

  /** Merge labels the service already has; local draft entries win. */
  adoptServerLabels(serverLabels: Record<string, LabelValue>): void {
    for (const [shotId, value] of Object.entries(serverLabels)) {
      if (!this.labels.has(shotId) && this.shotIds.includes(shotId)) {
        this.labels.set(shotId, value);
      }
    }
    this.persist();
  }

  get(shotId: string): LabelValue | null {
    return this.labels.has(shotId) ? this.labels.get(shotId)! : null;
  }

  set(shotId: string, value: LabelValue): void {
    if (!this.shotIds.includes(shotId)) {
      throw new Error(`unknown shot id ${shotId}`);
    }
    this.labels.set(shotId, value);
    this.persist();
  }

  clear(shotId: string): void {
    this.labels.delete(shotId);
    this.persist();
  }

  labeledCount(): number {
    return this.labels.size;
  }

  remaining(): number {
    return this.shotIds.length - this.labels.size;
  }

  isComplete(): boolean {
    return this.remaining() === 0;
  }

  toPayload(): Record<string, LabelValue> {
    return Object.fromEntries(this.labels);
  }

  get cursor(): number {
    return this.cursorIndex;
  }

  currentShot(): string | null {
    return this.shotIds[this.cursorIndex] ?? null;
  }

  moveTo(index: number): void {
    if (this.shotIds.length === 0) return;
    this.cursorIndex = Math.min(Math.max(index, 0), this.shotIds.length - 1);
    this.persist();
  }

  next(): void {
    this.moveTo(this.cursorIndex + 1);
  }

  prev(): void {
    this.moveTo(this.cursorIndex - 1);
  }

  /** Label the focused card and advance, the y/n fast path. */
  labelCurrentAndAdvance(value: LabelValue): void {
    const shot = this.currentShot();
    if (shot === null) return;
    this.set(shot, value);
    if (this.cursorIndex < this.shotIds.length - 1) {
      this.next();
    }
  }

  discard(): void {
    this.labels.clear();
    if (this.storage) this.storage.removeItem(this.storageKey());
  }
}
