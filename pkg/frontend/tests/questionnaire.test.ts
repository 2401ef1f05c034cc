import { describe, expect, it } from "vitest";

import {
  allWordPairs,
  buildSubmission,
  canonicalizeAnswer,
  emptyDraft,
  missingItems,
  pairKey,
  presentationOrder,
  SUS_STATEMENTS,
} from "../src/questionnaire.js";

describe("presentation randomization", () => {
  it("is deterministic for a seed and differs across seeds", () => {
    const a = presentationOrder(42);
    const b = presentationOrder(42);
    const c = presentationOrder(43);
    expect(a).toEqual(b);
    expect(a.map(pairKey)).not.toEqual(c.map(pairKey));
  });

  it("presents every pair exactly once", () => {
    const keys = presentationOrder(7).map(pairKey).sort();
    const expected = allWordPairs().map(pairKey).sort();
    expect(keys).toEqual(expected);
    expect(keys).toHaveLength(28);
  });

  it("randomizes pole order", () => {
    const flips = presentationOrder(11).map((p) => p.flipped);
    expect(flips.some(Boolean)).toBe(true);
    expect(flips.every(Boolean)).toBe(false);
  });
});

describe("canonicalizeAnswer", () => {
  it("mirrors flipped answers", () => {
    expect(canonicalizeAnswer(1, true)).toBe(7);
    expect(canonicalizeAnswer(4, true)).toBe(4);
    expect(canonicalizeAnswer(6, false)).toBe(6);
  });

  it("rejects out-of-range answers", () => {
    expect(() => canonicalizeAnswer(0, false)).toThrow();
    expect(() => canonicalizeAnswer(8, true)).toThrow();
  });
});

describe("buildSubmission", () => {
  function neutralDraft(seed: number) {
    const draft = emptyDraft(seed);
    draft.sus = new Array(10).fill(2);
    for (const pair of presentationOrder(seed)) {
      draft.attrakdiff.set(pairKey(pair), 4); // 4 is neutral on either pole order
    }
    return draft;
  }

  it("produces a canonical neutral payload", () => {
    const submission = buildSubmission(neutralDraft(99), "tester", "guided");
    expect(submission.sus).toEqual(new Array(10).fill(2));
    for (const group of ["pq", "att", "hqi", "hqs"] as const) {
      expect(submission.attrakdiff[group]).toEqual(new Array(7).fill(4));
    }
    expect(submission.randomization_seed).toBe(99);
  });

  it("undoes pole flips before submitting", () => {
    const seed = 5;
    const draft = emptyDraft(seed);
    draft.sus = new Array(10).fill(0);
    // The participant always answers "2 on the displayed scale".
    for (const pair of presentationOrder(seed)) {
      draft.attrakdiff.set(pairKey(pair), 2);
    }
    const submission = buildSubmission(draft, "tester", "joint");
    const flipped = new Map(presentationOrder(seed).map((p) => [pairKey(p), p.flipped]));
    for (const pair of allWordPairs()) {
      const groupValues = submission.attrakdiff[pair.group];
      const expected = flipped.get(pairKey(pair)) ? 6 : 2;
      expect(groupValues[pair.index - 1]).toBe(expected);
    }
  });

  it("blocks incomplete drafts and lists missing items", () => {
    const draft = neutralDraft(1);
    draft.sus[3] = null;
    draft.attrakdiff.delete("pq_2");
    const missing = missingItems(draft);
    expect(missing).toContain("sus_4");
    expect(missing).toContain("pq_2");
    expect(() => buildSubmission(draft, "u", "semi_manual")).toThrow(/incomplete/);
  });

  it("has ten SUS statements", () => {
    expect(SUS_STATEMENTS).toHaveLength(10);
  });
});
