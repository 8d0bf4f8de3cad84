"""Batch analytics over a store snapshot: coverage, temporal structure,
quality by activity, and response behavior.

Every function here is pure over its inputs; two runs over the same snapshot
produce identical outputs (CSV files byte for byte).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .quality import INDEX_NAMES

GAP_STEP_MIN = 15
DEFAULT_HORIZON_MIN = 180
LOW_CONFIDENCE_PAIRS = 10
MIN_ACTIVITY_COUNT = 10


@dataclass
class SubjectData:
    """Everything analytics needs about one subject, detached from the store."""
    subject_id: str
    sample_ids: list
    t_ms: np.ndarray                 # window end times, epoch ms
    features: np.ndarray             # (n, 13); NaN rows for unusable windows
    usable: np.ndarray               # bool mask over samples
    activities: list                 # predicted dominant activity per sample
    quality: np.ndarray              # (n, 5) index values
    quality_usable: np.ndarray       # bool mask: segmentation succeeded
    feature_means: np.ndarray | None
    feature_stds: np.ndarray | None
    labels: list = field(default_factory=list)    # registered, chronological
    queries: list = field(default_factory=list)   # every dispatched query

    def standardize(self, X: np.ndarray) -> np.ndarray:
        if self.feature_means is None or self.feature_stds is None:
            raise ConfigError(
                f"subject {self.subject_id}: standardization not available "
                "(engine still in initial phase)")
        return (X - self.feature_means) / self.feature_stds


@dataclass
class TemporalProfile:
    subject_id: str
    group_kind: str                  # "activity" | "stress" | "all"
    group_key: str
    gap_min: list
    mean_distance: list
    pair_count: list

    def low_confidence(self) -> list:
        return [n < LOW_CONFIDENCE_PAIRS for n in self.pair_count]


@dataclass
class ResponseStats:
    cdfs: dict            # (kind, context) -> list of (t_seconds, cum_prob)
    medians: dict         # (kind, context) -> median response seconds
    rate_by_hour: dict    # hour -> {"rate", "queries", "responses"}


def coverage_curve(data: SubjectData, D: float = 1.5) -> list:
    """F_D after each successive label, chronologically. Non-increasing."""
    if not data.labels:
        raise ConfigError(f"subject {data.subject_id} has no registered labels")
    X = data.features[data.usable]
    if len(X) == 0:
        raise ConfigError(f"subject {data.subject_id} has no usable samples")
    Z = data.standardize(X)
    index_of = {sid: i for i, sid in enumerate(data.sample_ids)}
    min_dist = np.full(len(Z), np.inf)
    usable_row = {}
    row = 0
    for i, sid in enumerate(data.sample_ids):
        if data.usable[i]:
            usable_row[sid] = row
            row += 1
    curve = []
    for i, label in enumerate(data.labels, start=1):
        sid = label["sample_id"]
        if sid not in usable_row:
            continue
        u = Z[usable_row[sid]]
        min_dist = np.minimum(min_dist, np.linalg.norm(Z - u, axis=1))
        curve.append((i, float(np.mean(min_dist > D))))
    return curve


def _sample_groups(data: SubjectData, group_by: str) -> dict:
    """Map group key -> sample indices (usable samples only)."""
    idx = np.flatnonzero(data.usable)
    if group_by == "none":
        return {"all": idx}
    if group_by == "activity":
        groups = {}
        for i in idx:
            groups.setdefault(str(data.activities[i]), []).append(i)
        return {k: np.array(v) for k, v in groups.items()}
    if group_by == "stress":
        stress_of = {}
        for label in data.labels:
            stress_of[label["sample_id"]] = label.get("stress")
        groups = {}
        for i in idx:
            level = stress_of.get(data.sample_ids[i])
            if level is not None:
                groups.setdefault(str(level), []).append(i)
        return {k: np.array(v) for k, v in groups.items()}
    raise ConfigError(f"unknown group_by {group_by!r}")


def temporal_profile(data: SubjectData, group_by: str = "none",
                     horizon_min: int = DEFAULT_HORIZON_MIN) -> list:
    """Average standardized distance of sample pairs binned by time gap.

    Gaps are rounded to the nearest 15-minute multiple (the sampling
    cadence); groups with fewer than 2 samples are skipped.
    """
    kind = "all" if group_by == "none" else group_by
    profiles = []
    for key, idx in sorted(_sample_groups(data, group_by).items()):
        if len(idx) < 2:
            continue
        Z = data.standardize(data.features[idx])
        t_min = data.t_ms[idx] / 60000.0
        n_bins = horizon_min // GAP_STEP_MIN
        sums = np.zeros(n_bins + 1)
        counts = np.zeros(n_bins + 1, dtype=int)
        for a in range(len(idx)):
            d = np.linalg.norm(Z[a + 1:] - Z[a], axis=1)
            gaps = np.abs(t_min[a + 1:] - t_min[a])
            bins = np.rint(gaps / GAP_STEP_MIN).astype(int)
            in_range = (bins >= 1) & (bins <= n_bins)
            np.add.at(sums, bins[in_range], d[in_range])
            np.add.at(counts, bins[in_range], 1)
        present = np.flatnonzero(counts[1:]) + 1
        if len(present) == 0:
            continue
        profiles.append(TemporalProfile(
            subject_id=data.subject_id, group_kind=kind, group_key=key,
            gap_min=[int(b) * GAP_STEP_MIN for b in present],
            mean_distance=[float(sums[b] / counts[b]) for b in present],
            pair_count=[int(counts[b]) for b in present],
        ))
    return profiles


def quality_by_activity(datas: list, min_count: int = MIN_ACTIVITY_COUNT) -> list:
    """Five-number summaries of each index per predicted activity.

    Activities with fewer than ``min_count`` assessable samples are omitted
    (in practice this drops rare classes like jogging).
    """
    by_activity = {}
    for data in datas:
        for i in range(len(data.sample_ids)):
            if not data.quality_usable[i]:
                continue
            by_activity.setdefault(str(data.activities[i]), []).append(data.quality[i])
    rows = []
    for activity in sorted(by_activity):
        values = np.vstack(by_activity[activity])
        if len(values) < min_count:
            continue
        for j, index_name in enumerate(INDEX_NAMES):
            q0, q1, q2, q3, q4 = np.percentile(values[:, j], [0, 25, 50, 75, 100])
            rows.append({
                "activity": activity, "index": index_name,
                "min": float(q0), "q1": float(q1), "median": float(q2),
                "q3": float(q3), "max": float(q4), "count": int(len(values)),
            })
    return rows


def _ecdf(times: list, denominator: int) -> list:
    points = []
    for i, t in enumerate(sorted(times), start=1):
        points.append((float(t), i / denominator))
    return points


def response_stats(datas: list) -> ResponseStats:
    """Response-time CDFs per self-reported context plus per-hour rates.

    Per-context CDFs are normalized by the number of answered queries whose
    response reported that context (context is unknowable for unanswered
    queries); the "all" CDF is normalized by every dispatched query, so it
    tops out at the overall response fraction. Hourly rates average the
    per-subject responses/queries ratio.
    """
    per_context = {}
    all_times = []
    n_queries_total = 0
    hour_stats = {}
    for data in datas:
        per_hour = {}
        for q in data.queries:
            n_queries_total += 1
            hour = int((q["dispatched_at_ms"] // 3600000) % 24)
            answered, total = per_hour.get(hour, (0, 0))
            per_hour[hour] = (answered + int(bool(q.get("answered"))), total + 1)
            if q.get("answered"):
                rt = float(q["response_time_s"])
                all_times.append(rt)
                if q.get("self_activity") is not None:
                    per_context.setdefault(
                        ("activity", str(q["self_activity"])), []).append(rt)
                if q.get("stress") is not None:
                    per_context.setdefault(
                        ("stress", str(q["stress"])), []).append(rt)
        for hour, (answered, total) in per_hour.items():
            entry = hour_stats.setdefault(hour, {"rates": [], "queries": 0,
                                                 "responses": 0})
            entry["rates"].append(answered / total)
            entry["queries"] += total
            entry["responses"] += answered
    cdfs = {}
    medians = {}
    for key, times in sorted(per_context.items()):
        cdfs[key] = _ecdf(times, len(times))
        medians[key] = float(np.median(times))
    if n_queries_total:
        cdfs[("all", "all")] = _ecdf(all_times, n_queries_total)
        if all_times:
            medians[("all", "all")] = float(np.median(all_times))
    rate_by_hour = {
        hour: {"rate": float(np.mean(entry["rates"])),
               "queries": entry["queries"], "responses": entry["responses"]}
        for hour, entry in sorted(hour_stats.items())
    }
    return ResponseStats(cdfs=cdfs, medians=medians, rate_by_hour=rate_by_hour)


# ---------------------------------------------------------------------------
# CSV emitters (headers documented in the README)

def _write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_coverage_csv(path, subject_id: str, curve: list) -> None:
    _write(path, ["subject_id", "label_index", "coverage"],
           [[subject_id, i, repr(f)] for i, f in curve])


def write_temporal_csv(path, profiles: list) -> None:
    rows = []
    for p in profiles:
        for gap, dist, count, low in zip(p.gap_min, p.mean_distance,
                                         p.pair_count, p.low_confidence()):
            rows.append([p.subject_id, p.group_kind, p.group_key, gap,
                         repr(dist), count, int(low)])
    _write(path, ["subject_id", "group_kind", "group_key", "gap_min",
                  "mean_distance", "pair_count", "low_confidence"], rows)


def write_quality_csv(path, rows: list) -> None:
    _write(path, ["activity", "index", "min", "q1", "median", "q3", "max", "count"],
           [[r["activity"], r["index"], repr(r["min"]), repr(r["q1"]),
             repr(r["median"]), repr(r["q3"]), repr(r["max"]), r["count"]]
            for r in rows])


def write_response_cdf_csv(path, stats: ResponseStats) -> None:
    rows = []
    for (kind, context), points in sorted(stats.cdfs.items()):
        for t, p in points:
            rows.append([kind, context, repr(t), repr(p)])
    _write(path, ["kind", "context", "response_time_s", "cum_prob"], rows)


def write_response_rate_csv(path, stats: ResponseStats) -> None:
    rows = [[hour, repr(entry["rate"]), entry["queries"], entry["responses"]]
            for hour, entry in stats.rate_by_hour.items()]
    _write(path, ["hour", "rate", "queries", "responses"], rows)
