"""Per-subject EMA trigger engine: density-proportional querying with a floor.

The engine buffers the first N feature vectors (initial phase, no queries),
then standardizes the space, partitions it into K centroid regions, and
triggers queries with probability proportional to the sample's region density,
clipped below at the floor so sparse regions still get explored. A per-region
label quota stops collection where enough labels exist.

Draws are keyed by (seed, sample_id), so replaying a stream reproduces the
identical decision sequence; that is what makes crash recovery exact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .hrv import N_FEATURES
from .simulator import keyed_uniform

CHECKPOINT_FORMAT = "pulselabel-engine-state"
CHECKPOINT_VERSION = 1

SIXTEEN_MINUTES_MS = 16 * 60 * 1000

REASON_INITIAL = "initial_phase"
REASON_QUOTA = "quota_reached"
REASON_DRAWN = "drawn"
REASON_NOT_DRAWN = "not_drawn"
REASON_QUALITY = "quality_too_low"

LABEL_REGISTERED = "registered"
LABEL_STALE = "stale"
LABEL_DUPLICATE = "duplicate"


@dataclass(frozen=True)
class QueryDecision:
    trigger: bool
    probability: float
    region_id: int | None
    reason: str

    def to_dict(self) -> dict:
        return {"trigger": self.trigger, "probability": self.probability,
                "region_id": self.region_id, "reason": self.reason}


def kmeans_fit(X: np.ndarray, k: int, seed: int, max_iter: int = 25) -> np.ndarray:
    """Plain seeded Lloyd iteration with greedy farthest-point-style seeding.

    Restart-free and deterministic; an emptied cluster is reseeded with the
    point farthest from its assigned centroid.
    """
    n = len(X)
    if k < 1 or k > n:
        raise ConfigError(f"k = {k} invalid for {n} samples")
    rng = np.random.default_rng(seed)
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    # kmeans++-style: next seed drawn proportional to squared distance
    d2 = np.sum((X - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centroids[j] = X[rng.integers(n)]
            continue
        centroids[j] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((X - centroids[j]) ** 2, axis=1))
    for _ in range(max_iter):
        dist = np.linalg.norm(X[:, None, :] - centroids[None, :, :], axis=2)
        assign = np.argmin(dist, axis=1)
        new_centroids = centroids.copy()
        for j in range(k):
            members = X[assign == j]
            if len(members):
                new_centroids[j] = members.mean(axis=0)
            else:
                worst = int(np.argmax(dist[np.arange(n), assign]))
                new_centroids[j] = X[worst]
        if np.allclose(new_centroids, centroids):
            break
        centroids = new_centroids
    return centroids


class QueryEngine:
    """All trigger state for one subject. Mutations must be serialized."""

    def __init__(self, subject_id: str, n_initial: int = 100, k_regions: int = 10,
                 quota: int = 15, p_floor: float = 0.1, seed: int = 0,
                 quota_overrides_floor: bool = True):
        if n_initial < 1:
            raise ConfigError("n_initial must be >= 1")
        if not (0.0 <= p_floor <= 1.0):
            raise ConfigError("p_floor must be in [0, 1]")
        if k_regions > n_initial:
            raise ConfigError("k_regions cannot exceed n_initial")
        self.subject_id = subject_id
        self.n_initial = n_initial
        self.k_regions = k_regions
        self.quota = quota
        self.p_floor = p_floor
        self.seed = seed
        self.quota_overrides_floor = quota_overrides_floor

        self.feature_means: np.ndarray | None = None
        self.feature_stds: np.ndarray | None = None
        self.centroids: np.ndarray | None = None
        self.region_counts: np.ndarray | None = None
        self.region_label_counts: np.ndarray | None = None

        self.sample_ids: list[str] = []          # usable samples, arrival order
        self.vectors: list[np.ndarray] = []      # raw feature vectors
        self.labeled: list[dict] = []            # {sample_id, ema_id, record}
        self.registered_ema_ids: set[str] = set()
        self.labeled_sample_ids: set[str] = set()
        self.draw_counter = 0
        self.refit_counter = 0
        self.last_seq = -1                       # set by the gateway for recovery

    # -- phase ---------------------------------------------------------------

    @property
    def phase(self) -> str:
        return "initial" if self.centroids is None else "query"

    def _fit_initial(self) -> None:
        X = np.vstack(self.vectors)
        self.feature_means = X.mean(axis=0)
        stds = X.std(axis=0)
        stds[stds == 0.0] = 1.0           # zero-variance features stay centered
        self.feature_stds = stds
        Z = (X - self.feature_means) / self.feature_stds
        self.centroids = kmeans_fit(Z, self.k_regions, seed=self.seed)
        assign = self._assign_many(Z)
        self.region_counts = np.bincount(assign, minlength=self.k_regions)
        self.region_label_counts = np.zeros(self.k_regions, dtype=int)

    def standardize(self, vector: np.ndarray) -> np.ndarray:
        if self.feature_means is None:
            raise ConfigError("standardization not fitted yet (initial phase)")
        return (np.asarray(vector, dtype=float) - self.feature_means) / self.feature_stds

    def _assign_many(self, Z: np.ndarray) -> np.ndarray:
        dist = np.linalg.norm(Z[:, None, :] - self.centroids[None, :, :], axis=2)
        return np.argmin(dist, axis=1)

    def assign_region(self, vector: np.ndarray) -> int:
        z = self.standardize(vector)
        dist = np.linalg.norm(self.centroids - z, axis=1)
        return int(np.argmin(dist))

    # -- core ops ------------------------------------------------------------

    def observe(self, features, sample_id: str | None = None) -> QueryDecision:
        """Record one sample and decide whether to query the human about it.

        ``features`` may be None for windows that failed feature extraction:
        they are acknowledged but never enter the density model or trigger.
        """
        if features is None:
            self.draw_counter += 1
            return QueryDecision(False, 0.0, None, REASON_QUALITY)
        vector = np.asarray(
            features.to_array() if hasattr(features, "to_array") else features,
            dtype=float)
        if vector.shape != (N_FEATURES,):
            raise ConfigError(f"expected {N_FEATURES} features, got {vector.shape}")
        if not np.all(np.isfinite(vector)):
            raise ConfigError("feature vector contains non-finite values")
        if sample_id is None:
            sample_id = f"auto-{len(self.sample_ids):08d}"

        if self.centroids is None:
            self.sample_ids.append(sample_id)
            self.vectors.append(vector)
            self.draw_counter += 1
            if len(self.vectors) == self.n_initial:
                self._fit_initial()
            return QueryDecision(False, 0.0, None, REASON_INITIAL)

        region = self.assign_region(vector)
        total = int(self.region_counts.sum())
        density = self.region_counts[region] / total if total else 0.0
        max_density = self.region_counts.max() / total if total else 0.0

        self.sample_ids.append(sample_id)
        self.vectors.append(vector)
        self.region_counts[region] += 1

        quota_met = (self.quota is not None
                     and self.region_label_counts[region] >= self.quota)
        if quota_met and self.quota_overrides_floor:
            # the floor exists to explore unseen regions, not to keep
            # collecting where the quota is already satisfied
            self.draw_counter += 1
            return QueryDecision(False, 0.0, int(region), REASON_QUOTA)
        if quota_met:
            # alternative reading: the floor applies to every region, so a
            # quota-met region keeps a residual exploration probability
            p = self.p_floor
        elif max_density <= 0.0:
            p = self.p_floor
        else:
            p = float(np.clip(density / max_density, self.p_floor, 1.0))
        draw_key = sample_id
        u = keyed_uniform(self.seed, self.subject_id, "draw", draw_key)
        self.draw_counter += 1
        if u < p:
            return QueryDecision(True, p, int(region), REASON_DRAWN)
        return QueryDecision(False, p, int(region), REASON_NOT_DRAWN)

    def register_label(self, sample_id: str, ema_id: str, label_record: dict,
                       sample_t_ms: int, responded_at_ms: int) -> str:
        """Attach a human label to a sample; enforces the 16-minute rule."""
        if ema_id in self.registered_ema_ids:
            return LABEL_DUPLICATE
        if abs(responded_at_ms - sample_t_ms) > SIXTEEN_MINUTES_MS:
            return LABEL_STALE
        try:
            idx = self.sample_ids.index(sample_id)
        except ValueError:
            raise ConfigError(f"unknown sample {sample_id!r}") from None
        self.registered_ema_ids.add(ema_id)
        self.labeled_sample_ids.add(sample_id)
        self.labeled.append({
            "sample_id": sample_id,
            "ema_id": ema_id,
            "record": dict(label_record),
            "responded_at_ms": int(responded_at_ms),
        })
        if self.centroids is not None:
            region = self.assign_region(self.vectors[idx])
            self.region_label_counts[region] += 1
        return LABEL_REGISTERED

    def coverage(self, samples=None, D: float = 1.5) -> float:
        """Fraction of samples farther than D from every labeled sample.

        Distances are Euclidean over the standardized feature space. With no
        labels the whole space is uncovered (1.0 by convention).
        """
        if samples is None:
            samples = self.vectors
        samples = [np.asarray(s, dtype=float) for s in samples]
        if len(samples) == 0:
            raise ConfigError("coverage needs at least one sample")
        if not self.labeled:
            return 1.0
        Z = np.vstack([self.standardize(s) for s in samples])
        by_id = {sid: i for i, sid in enumerate(self.sample_ids)}
        U = np.vstack([self.standardize(self.vectors[by_id[lab["sample_id"]]])
                       for lab in self.labeled])
        dist = np.linalg.norm(Z[:, None, :] - U[None, :, :], axis=2)
        return float(np.mean(dist.min(axis=1) > D))

    def refit_regions(self, k: int | None = None) -> None:
        """Re-estimate centroids over everything seen; remap counts and quotas."""
        k = self.k_regions if k is None else k
        if k > len(self.vectors):
            raise ConfigError(f"k = {k} exceeds {len(self.vectors)} samples seen")
        X = np.vstack(self.vectors)
        self.feature_means = X.mean(axis=0)
        stds = X.std(axis=0)
        stds[stds == 0.0] = 1.0
        self.feature_stds = stds
        Z = (X - self.feature_means) / self.feature_stds
        self.refit_counter += 1
        self.k_regions = k
        self.centroids = kmeans_fit(Z, k, seed=self.seed + self.refit_counter)
        assign = self._assign_many(Z)
        self.region_counts = np.bincount(assign, minlength=k)
        self.region_label_counts = np.zeros(k, dtype=int)
        labeled_idx = [self.sample_ids.index(lab["sample_id"]) for lab in self.labeled]
        for i in labeled_idx:
            self.region_label_counts[assign[i]] += 1

    # -- checkpointing ---------------------------------------------------------

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "subject_id": self.subject_id,
            "config": {
                "n_initial": self.n_initial, "k_regions": self.k_regions,
                "quota": self.quota, "p_floor": self.p_floor, "seed": self.seed,
                "quota_overrides_floor": self.quota_overrides_floor,
            },
            "feature_means": arr(self.feature_means),
            "feature_stds": arr(self.feature_stds),
            "centroids": arr(self.centroids),
            "region_counts": arr(self.region_counts),
            "region_label_counts": arr(self.region_label_counts),
            "sample_ids": list(self.sample_ids),
            "vectors": [v.tolist() for v in self.vectors],
            "labeled": self.labeled,
            "registered_ema_ids": sorted(self.registered_ema_ids),
            "draw_counter": self.draw_counter,
            "refit_counter": self.refit_counter,
            "last_seq": self.last_seq,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QueryEngine":
        if d.get("format") != CHECKPOINT_FORMAT:
            raise ConfigError(f"not an engine checkpoint: {d.get('format')!r}")
        if d.get("version") != CHECKPOINT_VERSION:
            raise ConfigError(f"unsupported checkpoint version {d.get('version')!r}")
        cfg = d["config"]
        eng = cls(d["subject_id"], n_initial=cfg["n_initial"],
                  k_regions=cfg["k_regions"], quota=cfg["quota"],
                  p_floor=cfg["p_floor"], seed=cfg["seed"],
                  quota_overrides_floor=cfg["quota_overrides_floor"])

        def arr(v, dtype=float):
            return None if v is None else np.asarray(v, dtype=dtype)

        eng.feature_means = arr(d["feature_means"])
        eng.feature_stds = arr(d["feature_stds"])
        eng.centroids = arr(d["centroids"])
        eng.region_counts = arr(d["region_counts"], dtype=int)
        eng.region_label_counts = arr(d["region_label_counts"], dtype=int)
        eng.sample_ids = list(d["sample_ids"])
        eng.vectors = [np.asarray(v, dtype=float) for v in d["vectors"]]
        eng.labeled = [dict(lab) for lab in d["labeled"]]
        eng.registered_ema_ids = set(d["registered_ema_ids"])
        eng.labeled_sample_ids = {lab["sample_id"] for lab in eng.labeled}
        eng.draw_counter = d["draw_counter"]
        eng.refit_counter = d["refit_counter"]
        eng.last_seq = d.get("last_seq", -1)
        return eng

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "QueryEngine":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
