import { describe, expect, it } from "vitest";

import {
  buildLabelPayload,
  buildRankPayload,
  buildSelectionPayload,
  moveItem,
} from "../src/protocol.js";

describe("payload builders", () => {
  it("labels pass through", () => {
    expect(buildLabelPayload(1)).toEqual({ y: 1 });
    expect(buildLabelPayload(-1)).toEqual({ y: -1 });
  });

  it("selection index is range-checked", () => {
    expect(buildSelectionPayload(2, -1, 4)).toEqual({ index: 2, y: -1 });
    expect(() => buildSelectionPayload(4, 1, 4)).toThrow(/outside/);
    expect(() => buildSelectionPayload(-1, 1, 4)).toThrow(/outside/);
  });

  it("maps a dragged display order and divider to the wire shape", () => {
    // items [a,b,c,d] displayed as [c,a,b,d] with the divider after slot 2
    expect(buildRankPayload([2, 0, 1, 3], 2)).toEqual({ order: [2, 0, 1, 3], threshold: 2 });
  });

  it("rejects non-permutations and out-of-range dividers", () => {
    expect(() => buildRankPayload([0, 0, 1], 1)).toThrow(/permutation/);
    expect(() => buildRankPayload([0, 1, 2], 4)).toThrow(/divider/);
    expect(() => buildRankPayload([0, 1, 2], -1)).toThrow(/divider/);
  });

  it("divider spans the full inclusive range", () => {
    for (let pos = 0; pos <= 3; pos++) {
      expect(buildRankPayload([0, 1, 2], pos).threshold).toBe(pos);
    }
  });
});

describe("moveItem", () => {
  it("moves forward and backward", () => {
    expect(moveItem([0, 1, 2, 3], 0, 2)).toEqual([1, 2, 0, 3]);
    expect(moveItem([0, 1, 2, 3], 3, 0)).toEqual([3, 0, 1, 2]);
  });

  it("is pure", () => {
    const base = [0, 1, 2];
    moveItem(base, 0, 2);
    expect(base).toEqual([0, 1, 2]);
  });

  it("range-checks both ends", () => {
    expect(() => moveItem([0, 1], 2, 0)).toThrow();
    expect(() => moveItem([0, 1], 0, -1)).toThrow();
  });
});
