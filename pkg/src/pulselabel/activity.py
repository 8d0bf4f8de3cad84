"""Dominant-activity detection from motion sensors.

Each 2-minute window is cut into 10-second subwindows; a random forest
(bootstrap CART trees, Gini splits, per-node feature subsampling) predicts
each subwindow and the window's dominant activity is the modal prediction.
Training is deterministic under a fixed seed, and models serialize to a
versioned self-describing JSON text file.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ValidationError

ACTIVITY_CLASSES = ("Sit", "Stand", "Walk", "Jog", "Others")
# Tie-breaks resolve toward the less active class: PPG quality is better at
# low motion, so the tied sample is more likely usable under that reading.
CLASS_PRIORITY = {name: i for i, name in enumerate(ACTIVITY_CLASSES)}

SUBWINDOW_S = 10.0
SENSOR_NAMES = ("acc", "gyro", "grav")
AXIS_NAMES = ("x", "y", "z")
ENERGY_BAND_HZ = (0.5, 3.0)

MODEL_FORMAT = "pulselabel-activity-forest"
MODEL_VERSION = 1

DEFAULT_N_TREES = 100
DEFAULT_MAX_DEPTH = 12


def _feature_names() -> tuple:
    names = []
    for sensor in SENSOR_NAMES:
        for axis in AXIS_NAMES:
            for stat in ("mean", "std", "min", "max", "rms"):
                names.append(f"{sensor}_{axis}_{stat}")
    for sensor in SENSOR_NAMES:
        names.extend([
            f"{sensor}_mag_mean", f"{sensor}_mag_std",
            f"{sensor}_corr_xy", f"{sensor}_corr_xz", f"{sensor}_corr_yz",
            f"{sensor}_mag_zero_cross", f"{sensor}_band_energy",
        ])
    return tuple(names)


MOTION_FEATURE_NAMES = _feature_names()
N_MOTION_FEATURES = len(MOTION_FEATURE_NAMES)


@dataclass(frozen=True)
class MotionWindow:
    """Time-aligned 3-axis acc/gyro/gravity traces at a fixed rate."""
    acc: np.ndarray
    gyro: np.ndarray
    grav: np.ndarray
    fs: float = 20.0

    def __post_init__(self):
        for name in SENSOR_NAMES:
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if arr.ndim != 2 or arr.shape[1] != 3:
                raise ConfigError(f"{name} must be an (n, 3) array")
            if not np.all(np.isfinite(arr)):
                raise ConfigError(f"{name} contains non-finite values")
        if not (len(self.acc) == len(self.gyro) == len(self.grav)):
            raise ConfigError("sensor channels must have equal lengths")

    @property
    def duration_s(self) -> float:
        return len(self.acc) / self.fs


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    sa, sb = a.std(), b.std()
    if sa == 0.0 or sb == 0.0:
        return 0.0
    return float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))


def _band_energy(channel: np.ndarray, fs: float) -> float:
    """Mean-square power of the mean-removed channels inside the band."""
    n = len(channel)
    x = channel - channel.mean(axis=0)
    spectrum = np.fft.rfft(x, axis=0)
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    mask = (freqs >= ENERGY_BAND_HZ[0]) & (freqs <= ENERGY_BAND_HZ[1])
    return float(np.sum(np.abs(spectrum[mask]) ** 2) * 2.0 / n ** 2)


def _subwindow_features(acc, gyro, grav, fs) -> np.ndarray:
    out = []
    sensors = {"acc": acc, "gyro": gyro, "grav": grav}
    for name in SENSOR_NAMES:
        s = sensors[name]
        for ax in range(3):
            col = s[:, ax]
            out.extend([col.mean(), col.std(), col.min(), col.max(),
                        np.sqrt(np.mean(col ** 2))])
    for name in SENSOR_NAMES:
        s = sensors[name]
        mag = np.sqrt(np.sum(s ** 2, axis=1))
        centered = mag - mag.mean()
        zero_cross = int(np.sum(centered[:-1] * centered[1:] < 0.0))
        out.extend([
            mag.mean(), mag.std(),
            _pearson(s[:, 0], s[:, 1]), _pearson(s[:, 0], s[:, 2]),
            _pearson(s[:, 1], s[:, 2]),
            float(zero_cross), _band_energy(s, fs),
        ])
    return np.array(out)


def extract_motion_features(motion: MotionWindow) -> np.ndarray:
    """One fixed-order feature row per 10-second subwindow, shape (k, 66)."""
    if motion.duration_s < SUBWINDOW_S:
        raise ConfigError(
            f"motion window of {motion.duration_s:.1f}s is shorter than one "
            f"{SUBWINDOW_S:.0f}s subwindow")
    step = int(SUBWINDOW_S * motion.fs)
    k = len(motion.acc) // step
    rows = []
    for j in range(k):
        sl = slice(j * step, (j + 1) * step)
        rows.append(_subwindow_features(
            motion.acc[sl], motion.gyro[sl], motion.grav[sl], motion.fs))
    return np.vstack(rows)


# ---------------------------------------------------------------------------
# Random forest

def _gini_best_split(x_sorted: np.ndarray, y_sorted: np.ndarray, n_classes: int):
    """Best threshold for one feature; returns (impurity, threshold) or None."""
    n = len(y_sorted)
    counts = np.zeros((n, n_classes))
    counts[np.arange(n), y_sorted] = 1.0
    left = np.cumsum(counts, axis=0)          # class counts for x <= x_sorted[i]
    total = left[-1]
    # candidate split after position i (between distinct x values)
    distinct = np.flatnonzero(np.diff(x_sorted) > 0.0)
    if len(distinct) == 0:
        return None
    nl = (distinct + 1).astype(float)
    nr = n - nl
    lc = left[distinct]
    rc = total - lc
    gini_l = 1.0 - np.sum((lc / nl[:, None]) ** 2, axis=1)
    gini_r = 1.0 - np.sum((rc / nr[:, None]) ** 2, axis=1)
    weighted = (nl * gini_l + nr * gini_r) / n
    best = int(np.argmin(weighted))
    i = distinct[best]
    threshold = (x_sorted[i] + x_sorted[i + 1]) / 2.0
    return float(weighted[best]), threshold


def _build_tree(X, y, n_classes, max_depth, n_sub, rng):
    """CART with Gini splits; nodes stored flat as dicts."""
    nodes = []

    def grow(idx, depth):
        node_id = len(nodes)
        hist = np.bincount(y[idx], minlength=n_classes).tolist()
        node = {"f": -1, "t": 0.0, "l": -1, "r": -1, "hist": hist}
        nodes.append(node)
        if depth >= max_depth or len(idx) < 2 or np.all(y[idx] == y[idx][0]):
            return node_id
        feats = rng.choice(X.shape[1], size=n_sub, replace=False)
        best = None
        for f in np.sort(feats):
            col = X[idx, f]
            order = np.argsort(col, kind="stable")
            found = _gini_best_split(col[order], y[idx][order], n_classes)
            if found is None:
                continue
            impurity, threshold = found
            if best is None or impurity < best[0]:
                best = (impurity, int(f), threshold)
        if best is None:
            return node_id
        _, f, threshold = best
        mask = X[idx, f] <= threshold
        node["f"] = f
        node["t"] = threshold
        node["l"] = grow(idx[mask], depth + 1)
        node["r"] = grow(idx[~mask], depth + 1)
        return node_id

    grow(np.arange(len(y)), 0)
    return nodes


def _tree_predict(nodes, x) -> int:
    i = 0
    while nodes[i]["f"] >= 0:
        i = nodes[i]["l"] if x[nodes[i]["f"]] <= nodes[i]["t"] else nodes[i]["r"]
    hist = nodes[i]["hist"]
    best = max(range(len(hist)), key=lambda c: (hist[c], -c))
    return best


@dataclass
class ForestModel:
    trees: list
    classes: tuple
    n_trees: int
    max_depth: int
    n_feature_sub: int
    seed: int
    feature_names: tuple = MOTION_FEATURE_NAMES

    def predict_row(self, x: np.ndarray) -> str:
        votes = np.zeros(len(self.classes), dtype=int)
        for nodes in self.trees:
            votes[_tree_predict(nodes, x)] += 1
        top = votes.max()
        tied = [i for i, v in enumerate(votes) if v == top]
        best = min(tied, key=lambda i: CLASS_PRIORITY.get(self.classes[i], 99))
        return self.classes[best]

    def predict(self, X: np.ndarray) -> list:
        return [self.predict_row(x) for x in np.atleast_2d(X)]

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "classes": list(self.classes),
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "n_feature_sub": self.n_feature_sub,
            "seed": self.seed,
            "feature_names": list(self.feature_names),
            "trees": self.trees,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValidationError(f"not an activity model file: {d.get('format')!r}")
        if d.get("version") != MODEL_VERSION:
            raise ValidationError(f"unsupported model version {d.get('version')!r}")
        return cls(trees=d["trees"], classes=tuple(d["classes"]),
                   n_trees=d["n_trees"], max_depth=d["max_depth"],
                   n_feature_sub=d["n_feature_sub"], seed=d["seed"],
                   feature_names=tuple(d["feature_names"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "ForestModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def train_forest(X: np.ndarray, y, n_trees: int = DEFAULT_N_TREES,
                 max_depth: int = DEFAULT_MAX_DEPTH, seed: int = 0) -> ForestModel:
    """Bootstrap-sampled CART trees with ceil(sqrt(d)) features per node."""
    X = np.asarray(X, dtype=float)
    y = list(y)
    if X.ndim != 2 or len(X) != len(y):
        raise ConfigError("X must be (n, d) with one label per row")
    classes = tuple(sorted(set(y)))
    if len(classes) < 2:
        raise ConfigError(f"need at least 2 classes, got only {classes}")
    counts = {c: y.count(c) for c in classes}
    for c, n in counts.items():
        if n < 10:
            raise ConfigError(f"class {c!r} has only {n} samples (need >= 10)")
    class_index = {c: i for i, c in enumerate(classes)}
    y_codes = np.array([class_index[v] for v in y])
    n_sub = int(np.ceil(np.sqrt(X.shape[1])))
    seeds = np.random.SeedSequence(seed).spawn(n_trees)
    trees = []
    for tree_seed in seeds:
        rng = np.random.default_rng(tree_seed)
        boot = rng.integers(0, len(y_codes), size=len(y_codes))
        trees.append(_build_tree(X[boot], y_codes[boot], len(classes),
                                 max_depth, n_sub, rng))
    return ForestModel(trees=trees, classes=classes, n_trees=n_trees,
                       max_depth=max_depth, n_feature_sub=n_sub, seed=seed)


def predict_dominant(model: ForestModel, motion: MotionWindow):
    """Modal subwindow prediction plus the modal fraction as confidence."""
    rows = extract_motion_features(motion)
    labels = model.predict(rows)
    tally = {}
    for lab in labels:
        tally[lab] = tally.get(lab, 0) + 1
    top = max(tally.values())
    dominant = min((lab for lab, n in tally.items() if n == top),
                   key=lambda lab: CLASS_PRIORITY.get(lab, 99))
    return dominant, top / len(labels)


def evaluate_leave_k_out(X: np.ndarray, y, subjects, k: int = 2, seed: int = 0,
                         n_trees: int = DEFAULT_N_TREES,
                         max_depth: int = DEFAULT_MAX_DEPTH) -> dict:
    """Hold out k subjects per fold, train on the rest, report accuracies.

    Subjects are grouped in sorted order into consecutive folds of k, so every
    subject is held out exactly once.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(list(y))
    subjects = np.asarray(list(subjects))
    unique = sorted(set(subjects))
    if len(unique) < k + 1:
        raise ConfigError(f"need at least {k + 1} subjects, got {len(unique)}")
    folds = [unique[i:i + k] for i in range(0, len(unique), k)]
    accuracies = []
    for f_idx, held_out in enumerate(folds):
        test_mask = np.isin(subjects, held_out)
        model = train_forest(X[~test_mask], y[~test_mask], n_trees=n_trees,
                             max_depth=max_depth, seed=seed + f_idx)
        predicted = model.predict(X[test_mask])
        accuracies.append(float(np.mean(np.asarray(predicted) == y[test_mask])))
    return {
        "folds": [{"held_out": list(f), "accuracy": a}
                  for f, a in zip(folds, accuracies)],
        "mean_accuracy": float(np.mean(accuracies)),
    }


def save_labeled_csv(path, X: np.ndarray, y, subjects) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "label", *MOTION_FEATURE_NAMES])
        for subj, lab, row in zip(subjects, y, np.asarray(X, dtype=float)):
            writer.writerow([subj, lab, *[repr(float(v)) for v in row]])


def load_labeled_csv(path):
    """Read a labeled corpus: subject_id, label, then the 66 feature columns."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["subject_id", "label"]:
            raise ValidationError(
                "labeled corpus must start with a header row: subject_id, label, ...")
        if tuple(header[2:]) != MOTION_FEATURE_NAMES:
            raise ValidationError("feature columns do not match the documented order")
        subjects, labels, rows = [], [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 + N_MOTION_FEATURES:
                raise ValidationError(f"line {line_no}: expected "
                                      f"{2 + N_MOTION_FEATURES} columns, got {len(row)}")
            subjects.append(row[0])
            labels.append(row[1])
            rows.append([float(v) for v in row[2:]])
    return np.array(rows), labels, subjects
