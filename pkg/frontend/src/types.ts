// Wire types mirroring the session service's JSON schemas.

export type SessionKind = "semi_manual" | "guided" | "joint";
export type SeedLabel = "background" | "foreground";

export interface SeedOut {
  x: number;
  y: number;
  label: SeedLabel;
}

export interface GuidedOptionOut {
  option: number;
  labels: SeedLabel[];
  contours: [number, number][][];
  diff_rle: MaskRle;
}

export interface GuidedStateOut {
  points: [number, number][];
  options: GuidedOptionOut[];
}

export interface JointProposalOut {
  index: number;
  x: number;
  y: number;
  label: SeedLabel;
  committed: boolean;
}

export interface MaskRle {
  size: [number, number];
  counts: number[];
}

export interface SessionState {
  session_id: string;
  revision: number;
  kind: SessionKind;
  task_id: string;
  user_id: string;
  width: number;
  height: number;
  finished: boolean;
  contours: [number, number][][];
  seeds: SeedOut[];
  dice: number | null;
  guided: GuidedStateOut | null;
  joint: JointProposalOut[] | null;
  mask_rle?: MaskRle | null;
}

export interface TaskInfo {
  task_id: string;
  width: number;
  height: number;
  has_ground_truth: boolean;
  initial_seeds: SeedOut[];
}

export type ActionPayload =
  | { type: "stroke"; points: [number, number][]; label: SeedLabel }
  | { type: "guided_select"; option: number }
  | { type: "joint_toggle"; index: number }
  | { type: "joint_longpress"; x: number; y: number }
  | { type: "joint_commit" }
  | { type: "undo" }
  | { type: "finish" };

export interface QuestionnaireSubmission {
  user_id: string;
  prototype: SessionKind;
  sus: number[];
  attrakdiff: { pq: number[]; att: number[]; hqi: number[]; hqs: number[] };
  randomization_seed: number | null;
}

export interface QuestionnaireResult {
  stored: boolean;
  sus_score: number;
  attrakdiff_scores: Record<string, number>;
}

export function decodeRle(rle: MaskRle): boolean[] {
  const [width, height] = rle.size;
  const flat = new Array<boolean>(width * height).fill(false);
  let pos = 0;
  let value = false;
  for (const run of rle.counts) {
    if (value) {
      flat.fill(true, pos, pos + run);
    }
    pos += run;
    value = !value;
  }
  return flat;
}
