// Questionnaire form models: SUS (10 unipolar items) and AttrakDiff-2
// (28 bipolar word pairs, presented in randomized pair and pole order).

import type { QuestionnaireSubmission, SessionKind } from "./types.js";

export const SUS_STATEMENTS: readonly string[] = [
  "I think that I would like to use this system frequently.",
  "I found the system unnecessarily complex.",
  "I thought the system was easy to use.",
  "I think that I would need the support of a technical person to be able to use this system.",
  "I found the various functions in this system were well integrated.",
  "I thought there was too much inconsistency in this system.",
  "I would imagine that most people would learn to use this system very quickly.",
  "I found the system very cumbersome to use.",
  "I felt very confident using the system.",
  "I needed to learn a lot of things before I could get going with this system.",
];

export const SUS_CHOICES: readonly string[] = [
  "strongly disagree",
  "disagree",
  "undecided",
  "agree",
  "strongly agree",
];

export type AttrakDiffGroup = "pq" | "att" | "hqi" | "hqs";

export interface WordPair {
  group: AttrakDiffGroup;
  index: number; // 1..7 within the group
  negative: string;
  positive: string;
}

const PAIRS: Record<AttrakDiffGroup, [string, string][]> = {
  pq: [
    ["complicated", "simple"],
    ["confusing", "clearly structured"],
    ["cumbersome", "straightforward"],
    ["impractical", "practical"],
    ["technical", "human"],
    ["unpredictable", "predictable"],
    ["unruly", "manageable"],
  ],
  att: [
    ["bad", "good"],
    ["disagreeable", "likeable"],
    ["discouraging", "motivating"],
    ["rejecting", "inviting"],
    ["repelling", "appealing"],
    ["ugly", "attractive"],
    ["unpleasant", "pleasant"],
  ],
  hqi: [
    ["alienating", "integrating"],
    ["cheap", "premium"],
    ["isolating", "connective"],
    ["separates me from people", "brings me closer to people"],
    ["tacky", "stylish"],
    ["unpresentable", "presentable"],
    ["unprofessional", "professional"],
  ],
  hqs: [
    ["cautious", "bold"],
    ["conservative", "innovative"],
    ["conventional", "inventive"],
    ["dull", "captivating"],
    ["ordinary", "novel"],
    ["undemanding", "challenging"],
    ["unimaginative", "creative"],
  ],
};

export const ATTRAKDIFF_GROUPS: readonly AttrakDiffGroup[] = ["pq", "att", "hqi", "hqs"];

export function allWordPairs(): WordPair[] {
  const out: WordPair[] = [];
  for (const group of ATTRAKDIFF_GROUPS) {
    PAIRS[group].forEach(([negative, positive], i) => {
      out.push({ group, index: i + 1, negative, positive });
    });
  }
  return out;
}

/** Deterministic 32-bit PRNG (mulberry32); good enough for presentation shuffles. */
export function seededRandom(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export interface PresentedPair extends WordPair {
  flipped: boolean; // poles swapped on screen
}

/**
 * Randomized presentation: pair order and pole order both derive from the
 * seed, which is recorded with the submission so the exact presentation can
 * be reproduced.
 */
export function presentationOrder(seed: number): PresentedPair[] {
  const rng = seededRandom(seed);
  const pairs = allWordPairs();
  for (let i = pairs.length - 1; i > 0; i--) {
    const j = Math.floor(rng() * (i + 1));
    [pairs[i], pairs[j]] = [pairs[j], pairs[i]];
  }
  return pairs.map((pair) => ({ ...pair, flipped: rng() < 0.5 }));
}

/** Map a 1..7 answer given on a possibly flipped scale back to canonical orientation. */
export function canonicalizeAnswer(value: number, flipped: boolean): number {
  if (!Number.isInteger(value) || value < 1 || value > 7) {
    throw new Error(`AttrakDiff answer ${value} outside 1..7`);
  }
  return flipped ? 8 - value : value;
}

export interface QuestionnaireDraft {
  sus: (number | null)[]; // 0..4 per statement, presentation order
  attrakdiff: Map<string, number>; // key "group_index" -> answered 1..7 (as displayed)
  seed: number;
}

export function emptyDraft(seed: number): QuestionnaireDraft {
  return { sus: new Array(10).fill(null), attrakdiff: new Map(), seed };
}

export function pairKey(pair: WordPair): string {
  return `${pair.group}_${pair.index}`;
}

/** Indices of unanswered items, for client-side completeness blocking. */
export function missingItems(draft: QuestionnaireDraft): string[] {
  const missing: string[] = [];
  draft.sus.forEach((value, i) => {
    if (value === null) missing.push(`sus_${i + 1}`);
  });
  for (const pair of allWordPairs()) {
    if (!draft.attrakdiff.has(pairKey(pair))) missing.push(pairKey(pair));
  }
  return missing;
}

/**
 * Build the submission payload in canonical orientation. Throws when the
 * draft is incomplete or out of range.
 */
export function buildSubmission(
  draft: QuestionnaireDraft,
  userId: string,
  prototype: SessionKind,
): QuestionnaireSubmission {
  const missing = missingItems(draft);
  if (missing.length > 0) {
    throw new Error(`questionnaire incomplete: ${missing.slice(0, 5).join(", ")}`);
  }
  const sus = draft.sus.map((value, i) => {
    if (value === null || !Number.isInteger(value) || value < 0 || value > 4) {
      throw new Error(`SUS answer ${value} at statement ${i + 1} outside 0..4`);
    }
    return value;
  });
  const flippedByKey = new Map<string, boolean>();
  for (const pair of presentationOrder(draft.seed)) {
    flippedByKey.set(pairKey(pair), pair.flipped);
  }
  const groups: Record<AttrakDiffGroup, number[]> = { pq: [], att: [], hqi: [], hqs: [] };
  for (const pair of allWordPairs()) {
    const key = pairKey(pair);
    const answered = draft.attrakdiff.get(key);
    if (answered === undefined) throw new Error(`missing ${key}`);
    groups[pair.group].push(canonicalizeAnswer(answered, flippedByKey.get(key) ?? false));
  }
  return {
    user_id: userId,
    prototype,
    sus,
    attrakdiff: groups,
    randomization_seed: draft.seed,
  };
}
