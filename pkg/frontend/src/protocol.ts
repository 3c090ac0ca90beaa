/**
 * Wire types for the annotation session protocol, plus the pure mapping from
 * on-screen interaction state to answer payloads.
 *
 * The server is the source of truth for item order: `order` lists original
 * item indices in displayed (best-first) sequence, and `threshold` counts the
 * items sitting above the positive/negative divider.
 */

export type QueryKindWire = "label" | "select_high" | "select_low" | "rank";

export interface QueryItemView {
  id: string;
  display: string;
}

export interface QueryView {
  query_id: string;
  kind: QueryKindWire;
  items: QueryItemView[];
  set_size: number;
}

export interface LabelPayload {
  y: -1 | 1;
}

export interface SelectionPayload {
  index: number;
  y: -1 | 1;
}

export interface RankPayload {
  order: number[];
  threshold: number;
}

export type AnswerPayload = LabelPayload | SelectionPayload | RankPayload;

export interface AnswerSummary {
  status: "active" | "stopped";
  interactions: number;
  log_det_sigma: number;
}

export function buildLabelPayload(y: -1 | 1): LabelPayload {
  return { y };
}

export function buildSelectionPayload(index: number, y: -1 | 1, nItems: number): SelectionPayload {
  if (!Number.isInteger(index) || index < 0 || index >= nItems) {
    throw new Error(`selection index ${index} outside 0..${nItems - 1}`);
  }
  return { index, y };
}

/**
 * displayOrder holds original item indices in their current on-screen order;
 * dividerPos is how many displayed items sit above the divider.
 */
export function buildRankPayload(displayOrder: number[], dividerPos: number): RankPayload {
  const n = displayOrder.length;
  const seen = new Set(displayOrder);
  if (seen.size !== n || displayOrder.some((i) => !Number.isInteger(i) || i < 0 || i >= n)) {
    throw new Error(`display order ${JSON.stringify(displayOrder)} is not a permutation`);
  }
  if (!Number.isInteger(dividerPos) || dividerPos < 0 || dividerPos > n) {
    throw new Error(`divider position ${dividerPos} outside 0..${n}`);
  }
  return { order: [...displayOrder], threshold: dividerPos };
}

/** Move the element at `from` to sit at `to`, returning a new array. */
export function moveItem(displayOrder: number[], from: number, to: number): number[] {
  const n = displayOrder.length;
  if (from < 0 || from >= n || to < 0 || to >= n) {
    throw new Error(`move ${from} -> ${to} outside 0..${n - 1}`);
  }
  const next = [...displayOrder];
  const [picked] = next.splice(from, 1);
  next.splice(to, 0, picked as number);
  return next;
}
