/**
 * Framework-free DOM rendering for one query at a time.
 *
 * A screen owns its interaction state (chosen item, chosen label, display
 * order, divider position), starts its response timer at render, and
 * guarantees at most one submission per query id regardless of double clicks
 * or retries racing each other.  Rank rows are reorderable both by native
 * drag-and-drop and by the per-row arrow buttons (which also make the list
 * keyboard-accessible); the divider row moves the same way and its position
 * is the reported threshold.
 */

import type { AnswerPayload, AnswerSummary, QueryView } from "./protocol.js";
import { buildLabelPayload, buildRankPayload, buildSelectionPayload, moveItem } from "./protocol.js";

export type SubmitFn = (
  queryId: string,
  payload: AnswerPayload,
  elapsedMs: number,
) => Promise<AnswerSummary>;

const PROMPTS: Record<string, string> = {
  label: "Is this item positive or negative?",
  select_high: "Select the item with the highest score, then label it.",
  select_low: "Select the item with the lowest score, then label it.",
  rank: "Order the items from highest to lowest score, then place the divider under the last positive one.",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class QueryScreen {
  readonly root: HTMLElement;
  private startedAt: number;
  private submitted = false;
  private inFlight = false;
  private selectedIndex: number | null = null;
  private selectedLabel: -1 | 1 | null = null;
  private displayOrder: number[];
  private dividerPos: number;
  private submitButton: HTMLButtonElement | null = null;
  private errorBox: HTMLElement;
  private listBox: HTMLElement | null = null;

  constructor(
    private readonly view: QueryView,
    private readonly onSubmit: SubmitFn,
    private readonly clock: () => number = () => performance.now(),
  ) {
    this.displayOrder = view.items.map((_, i) => i);
    this.dividerPos = 0;
    this.errorBox = el("div", "error-box");
    this.root = this.render();
    this.startedAt = this.clock(); // response time runs from first render
  }

  get elapsedMs(): number {
    return this.clock() - this.startedAt;
  }

  private render(): HTMLElement {
    const root = el("section", `query query-${this.view.kind}`);
    root.dataset.queryId = this.view.query_id;
    const prompt = PROMPTS[this.view.kind];
    if (!prompt) {
      const err = el("div", "error-box", `Unknown query kind "${this.view.kind}"; nothing to submit.`);
      err.dataset.state = "unrenderable";
      root.appendChild(err);
      return root;
    }
    root.appendChild(el("p", "prompt", prompt));
    if (this.view.kind === "label") {
      this.renderLabelButtons(root, (y) => this.submit(buildLabelPayload(y)));
    } else if (this.view.kind === "select_high" || this.view.kind === "select_low") {
      this.renderSelection(root);
    } else {
      this.renderRanking(root);
    }
    root.appendChild(this.errorBox);
    return root;
  }

  private renderLabelButtons(parent: HTMLElement, onPick: (y: -1 | 1) => void): void {
    const row = el("div", "label-buttons");
    for (const [text, y] of [["Positive", 1], ["Negative", -1]] as const) {
      const b = el("button", `label-button label-${y > 0 ? "pos" : "neg"}`, text);
      b.addEventListener("click", () => onPick(y));
      row.appendChild(b);
    }
    parent.appendChild(row);
  }

  private renderSelection(parent: HTMLElement): void {
    const list = el("ul", "item-list");
    this.view.items.forEach((item, i) => {
      const li = el("li", "item-row");
      const pick = el("button", "item-pick", item.display);
      pick.dataset.index = String(i);
      pick.addEventListener("click", () => {
        this.selectedIndex = i;
        list.querySelectorAll(".item-pick").forEach((n) => n.classList.remove("picked"));
        pick.classList.add("picked");
        this.refreshSubmit();
      });
      li.appendChild(pick);
      list.appendChild(li);
    });
    parent.appendChild(list);
    this.renderLabelButtons(parent, (y) => {
      this.selectedLabel = y;
      parent.querySelectorAll(".label-button").forEach((n) => n.classList.remove("picked"));
      parent
        .querySelector(`.label-${y > 0 ? "pos" : "neg"}`)!
        .classList.add("picked");
      this.refreshSubmit();
    });
    this.submitButton = el("button", "submit", "Submit");
    this.submitButton.disabled = true; // needs both an item and a label
    this.submitButton.addEventListener("click", () => {
      if (this.selectedIndex === null || this.selectedLabel === null) return;
      this.submit(
        buildSelectionPayload(this.selectedIndex, this.selectedLabel, this.view.items.length),
      );
    });
    parent.appendChild(this.submitButton);
  }

  private refreshSubmit(): void {
    if (this.submitButton) {
      this.submitButton.disabled =
        this.submitted || this.inFlight ||
        (this.view.kind !== "rank" &&
          (this.selectedIndex === null || this.selectedLabel === null));
    }
  }

  private renderRanking(parent: HTMLElement): void {
    this.listBox = el("ol", "rank-list");
    parent.appendChild(this.listBox);
    this.redrawRanking();
    this.submitButton = el("button", "submit", "Submit");
    this.submitButton.addEventListener("click", () => {
      this.submit(buildRankPayload(this.displayOrder, this.dividerPos));
    });
    parent.appendChild(this.submitButton);
  }

  /** Rows are items plus one divider row; row index -> display slot. */
  private redrawRanking(): void {
    const list = this.listBox!;
    list.textContent = "";
    const n = this.displayOrder.length;
    const rows: Array<{ divider: boolean; item?: number }> = [];
    this.displayOrder.forEach((orig, slot) => {
      if (slot === this.dividerPos) rows.push({ divider: true });
      rows.push({ divider: false, item: orig });
    });
    if (this.dividerPos === n) rows.push({ divider: true });
    list.dataset.dividerPositions = String(n + 1);

    rows.forEach((row) => {
      if (row.divider) {
        const li = el("li", "divider-row");
        li.appendChild(el("span", "divider-caption", "positive above / negative below"));
        li.appendChild(this.arrowButton("divider-up", "▲", () => this.moveDivider(-1)));
        li.appendChild(this.arrowButton("divider-down", "▼", () => this.moveDivider(+1)));
        li.addEventListener("dragover", (e) => e.preventDefault());
        list.appendChild(li);
        return;
      }
      const orig = row.item!;
      const slot = this.displayOrder.indexOf(orig);
      const li = el("li", "rank-row");
      li.draggable = true;
      li.dataset.itemIndex = String(orig);
      const handle = el("span", "drag-handle", "☰");
      li.appendChild(handle);
      li.appendChild(el("span", "item-text", this.view.items[orig]!.display));
      li.appendChild(this.arrowButton("row-up", "▲", () => this.moveRow(slot, slot - 1)));
      li.appendChild(this.arrowButton("row-down", "▼", () => this.moveRow(slot, slot + 1)));
      li.addEventListener("dragstart", (e) => {
        e.dataTransfer?.setData("text/plain", String(slot));
      });
      li.addEventListener("dragover", (e) => e.preventDefault());
      li.addEventListener("drop", (e) => {
        e.preventDefault();
        const from = Number(e.dataTransfer?.getData("text/plain"));
        if (Number.isInteger(from)) this.moveRow(from, slot);
      });
      list.appendChild(li);
    });
  }

  private arrowButton(cls: string, glyph: string, onClick: () => void): HTMLButtonElement {
    const b = el("button", `arrow ${cls}`, glyph);
    b.addEventListener("click", onClick);
    return b;
  }

  private moveRow(from: number, to: number): void {
    const n = this.displayOrder.length;
    if (to < 0 || to >= n || from === to) return;
    this.displayOrder = moveItem(this.displayOrder, from, to);
    this.redrawRanking();
  }

  private moveDivider(delta: number): void {
    const next = this.dividerPos + delta;
    if (next < 0 || next > this.displayOrder.length) return;
    this.dividerPos = next;
    this.redrawRanking();
  }

  private setControlsEnabled(enabled: boolean): void {
    this.root.querySelectorAll("button").forEach((b) => {
      (b as HTMLButtonElement).disabled = !enabled;
    });
    if (enabled) this.refreshSubmit();
  }

  private async submit(payload: AnswerPayload): Promise<void> {
    if (this.submitted || this.inFlight) return; // one request per query
    this.inFlight = true;
    this.errorBox.textContent = "";
    this.setControlsEnabled(false);
    try {
      await this.onSubmit(this.view.query_id, payload, this.elapsedMs);
      this.submitted = true;
      this.root.dataset.state = "submitted";
    } catch (err) {
      this.inFlight = false;
      this.errorBox.textContent = err instanceof Error ? err.message : String(err);
      this.setControlsEnabled(true); // let the annotator fix and retry
      this.root.dataset.state = "rejected";
      return;
    }
    this.inFlight = false;
  }
}

export function renderComplete(parent: HTMLElement, summary: AnswerSummary): void {
  parent.textContent = "";
  const box = el("section", "session-complete");
  box.appendChild(el("h2", undefined, "Session complete"));
  box.appendChild(
    el("p", undefined, `Thank you! You answered ${summary.interactions} queries.`),
  );
  box.dataset.interactions = String(summary.interactions);
  parent.appendChild(box);
}
