/**
 * Answer options and their wire encodings.
 *
 * The stress scale is ordinal and its mapping is fixed: the option index IS
 * the wire value (not at all -> 0 ... extremely -> 4). Emotion and activity
 * are sent as the lowercase tokens the service validates against.
 */

export const STRESS_LABELS = [
  "not at all",
  "a little bit",
  "some",
  "a lot",
  "extremely",
] as const;

export const EMOTION_OPTIONS = ["sad", "mad", "neutral", "happy"] as const;

export const ACTIVITY_OPTIONS = [
  "sitting",
  "standing",
  "walking",
  "jogging",
  "lying_down",
  "other",
] as const;

export const ACTIVITY_LABELS: Record<(typeof ACTIVITY_OPTIONS)[number], string> = {
  sitting: "sitting",
  standing: "standing",
  walking: "walking",
  jogging: "jogging",
  lying_down: "lying down",
  other: "other",
};

export type Emotion = (typeof EMOTION_OPTIONS)[number];
export type Activity = (typeof ACTIVITY_OPTIONS)[number];

export function stressLevelOf(label: string): number {
  const index = (STRESS_LABELS as readonly string[]).indexOf(label);
  if (index < 0) {
    throw new Error(`unknown stress label: ${label}`);
  }
  return index;
}

export function stressLabelOf(level: number): string {
  const label = STRESS_LABELS[level];
  if (label === undefined) {
    throw new Error(`stress level out of range: ${level}`);
  }
  return label;
}
