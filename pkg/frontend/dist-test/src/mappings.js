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
];
export const EMOTION_OPTIONS = ["sad", "mad", "neutral", "happy"];
export const ACTIVITY_OPTIONS = [
    "sitting",
    "standing",
    "walking",
    "jogging",
    "lying_down",
    "other",
];
export const ACTIVITY_LABELS = {
    sitting: "sitting",
    standing: "standing",
    walking: "walking",
    jogging: "jogging",
    lying_down: "lying down",
    other: "other",
};
export function stressLevelOf(label) {
    const index = STRESS_LABELS.indexOf(label);
    if (index < 0) {
        throw new Error(`unknown stress label: ${label}`);
    }
    return index;
}
export function stressLabelOf(level) {
    const label = STRESS_LABELS[level];
    if (label === undefined) {
        throw new Error(`stress level out of range: ${level}`);
    }
    return label;
}
