"""Ingestion service: process windows, trigger queries, accept labels, persist.

Storage is an append-only JSONL log per collection (samples, queries,
responses) plus periodic per-subject engine checkpoints. Nothing mutates a
written record; recovery replays the logs past the last checkpoint, and
because every trigger draw is keyed by sample id, the replay reproduces the
original decisions exactly.
"""
from __future__ import annotations

import heapq
import json
import os
import threading
import time
from pathlib import Path

import numpy as np

from .activity import ForestModel, MotionWindow, predict_dominant
from .analytics import SubjectData
from .config import Config
from .engine import (
    LABEL_REGISTERED,
    QueryEngine,
    SIXTEEN_MINUTES_MS,
)
from .errors import QualityTooLow, ValidationError
from .hrv import (
    FilterSpec,
    PpgWindow,
    bandpass_filter,
    detect_peaks,
    extract_nn,
    hrv_features,
    moving_average,
)
from .quality import assess
from . import simulator
from .simulator import SubjectProfile, encode_array, read_dataset

STRESS_OPTIONS = ("not at all", "a little bit", "some", "a lot", "extremely")
EMOTION_OPTIONS = ("sad", "mad", "neutral", "happy")
ACTIVITY_OPTIONS = ("sitting", "standing", "walking", "jogging",
                    "lying_down", "other")

QUERY_QUESTIONS = {
    "stress": list(STRESS_OPTIONS),
    "emotion": list(EMOTION_OPTIONS),
    "activity": list(ACTIVITY_OPTIONS),
}

PAYLOAD_FIELDS = ("subject_id", "t_start_ms", "fs", "ppg", "acc", "gyro", "grav")


class Store:
    """Append-only JSONL logs with a global sequence number."""

    COLLECTIONS = ("samples", "queries", "responses")

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        (self.data_dir / "engines").mkdir(exist_ok=True)
        self._handles = {}
        self._lock = threading.Lock()
        self.seq = self._max_seq() + 1

    def _path(self, kind) -> Path:
        return self.data_dir / f"{kind}.jsonl"

    def _max_seq(self) -> int:
        top = -1
        for kind in self.COLLECTIONS:
            for record in self.read(kind):
                if record["seq"] > top:
                    top = record["seq"]
        return top

    def append(self, kind: str, record: dict) -> int:
        with self._lock:
            seq = self.seq
            self.seq += 1
            record = {"seq": seq, **record}
            if kind not in self._handles:
                self._handles[kind] = open(self._path(kind), "a", encoding="utf-8")
            handle = self._handles[kind]
            handle.write(json.dumps(record) + "\n")
            handle.flush()
            return seq

    def read(self, kind: str):
        path = self._path(kind)
        if not path.exists():
            return
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    yield json.loads(line)

    def engine_checkpoint_path(self, subject_id: str) -> Path:
        return self.data_dir / "engines" / f"{subject_id}.json"

    def write_engine_checkpoint(self, engine: QueryEngine) -> None:
        path = self.engine_checkpoint_path(engine.subject_id)
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(engine.to_dict(), fh)
        os.replace(tmp, path)

    def close(self) -> None:
        for handle in self._handles.values():
            handle.close()
        self._handles = {}


def _require(payload: dict, field: str):
    if field not in payload:
        raise ValidationError(f"missing field {field!r}", field=field)
    return payload[field]


class Gateway:
    """Cloud tier: one instance owns a data directory.

    Per-subject processing is serialized behind a subject lock; distinct
    subjects proceed in parallel.
    """

    def __init__(self, data_dir, config: Config | None = None,
                 activity_model: ForestModel | None = None):
        self.config = config or Config()
        self.store = Store(data_dir)
        self.activity_model = activity_model
        self.filter_spec = FilterSpec()
        self.engines: dict[str, QueryEngine] = {}
        self.samples: dict[str, dict] = {}          # sample_id -> summary record
        self.by_subject: dict[str, list] = {}       # subject -> [sample_id]
        self.queries: dict[str, dict] = {}          # ema_id -> query record
        self.responses: dict[str, dict] = {}        # ema_id -> ack
        self.open_query: dict[str, str] = {}        # subject -> ema_id
        self.ingest_counts: dict[str, int] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    # -- plumbing -------------------------------------------------------------

    def _lock(self, subject_id: str) -> threading.Lock:
        with self._locks_guard:
            if subject_id not in self._locks:
                self._locks[subject_id] = threading.Lock()
            return self._locks[subject_id]

    def _engine(self, subject_id: str) -> QueryEngine:
        if subject_id not in self.engines:
            c = self.config
            self.engines[subject_id] = QueryEngine(
                subject_id, n_initial=c.n_initial, k_regions=c.k_regions,
                quota=c.quota, p_floor=c.p_floor, seed=c.seed,
                quota_overrides_floor=c.quota_overrides_floor)
        return self.engines[subject_id]

    def _validate_payload(self, payload: dict):
        if not isinstance(payload, dict):
            raise ValidationError("payload must be an object")
        for field in PAYLOAD_FIELDS:
            _require(payload, field)
        subject_id = payload["subject_id"]
        if not isinstance(subject_id, str) or not subject_id:
            raise ValidationError("subject_id must be a non-empty string",
                                  field="subject_id")
        try:
            t_start_ms = int(payload["t_start_ms"])
            fs = float(payload["fs"])
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"bad timestamp or rate: {exc}") from exc
        if fs <= 0:
            raise ValidationError("fs must be positive", field="fs")
        expected = int(round(self.config.window_s * fs))
        ppg = np.asarray(payload["ppg"], dtype=float)
        if ppg.ndim != 1 or len(ppg) != expected:
            raise ValidationError(
                f"ppg length {ppg.shape} does not match fs={fs} x "
                f"window_s={self.config.window_s} (= {expected} samples)",
                field="ppg")
        if not np.all(np.isfinite(ppg)):
            raise ValidationError("ppg contains non-finite values", field="ppg")
        motion = {}
        for field in ("acc", "gyro", "grav"):
            arr = np.asarray(payload[field], dtype=float)
            if arr.shape != (expected, 3):
                raise ValidationError(
                    f"{field} must be shape ({expected}, 3), got {arr.shape}",
                    field=field)
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{field} contains non-finite values",
                                      field=field)
            motion[field] = arr
        return subject_id, t_start_ms, fs, ppg, motion

    # -- core operations --------------------------------------------------------

    def ingest(self, payload: dict, now_ms: int | None = None) -> dict:
        subject_id, t_start_ms, fs, ppg, motion = self._validate_payload(payload)
        sample_id = str(payload.get("sample_id") or f"{subject_id}-{t_start_ms:013d}")
        with self._lock(subject_id):
            if sample_id in self.samples:
                return self.samples[sample_id]
            t_end_ms = t_start_ms + int(round(self.config.window_s * 1000))
            now_ms = t_end_ms if now_ms is None else int(now_ms)

            window = PpgWindow(subject_id, t_start_ms, fs, ppg)
            filtered = bandpass_filter(window, self.filter_spec)
            smoothed = moving_average(filtered)
            features = None
            peaks = None
            quality_error = None
            try:
                peaks = detect_peaks(filtered, baseline=smoothed)
                nn = extract_nn(peaks, fs)
                features = hrv_features(nn)
            except QualityTooLow as exc:
                quality_error = str(exc)
            report = assess(window, peaks, filtered=filtered)

            activity = None
            activity_conf = 0.0
            if self.activity_model is not None:
                motion_window = MotionWindow(motion["acc"], motion["gyro"],
                                             motion["grav"], fs=fs)
                activity, activity_conf = predict_dominant(
                    self.activity_model, motion_window)

            engine = self._engine(subject_id)
            decision = engine.observe(features, sample_id=sample_id)

            suppressed = False
            query_record = None
            if decision.trigger:
                open_id = self.open_query.get(subject_id)
                if open_id is not None and self._is_open(open_id, now_ms):
                    suppressed = True
                else:
                    query_record = self._dispatch_query(
                        subject_id, sample_id, t_end_ms, now_ms, payload)

            record = {
                "sample_id": sample_id,
                "subject_id": subject_id,
                "t_start_ms": t_start_ms,
                "t_end_ms": t_end_ms,
                "fs": fs,
                "n_samples": len(ppg),
                "features": None if features is None else features.to_array().tolist(),
                "usable": features is not None,
                "quality_error": quality_error,
                "quality": {
                    "skewness_var": report.skewness_var,
                    "kurtosis_var": report.kurtosis_var,
                    "apen_var": report.apen_var,
                    "shannon_entropy": report.shannon_entropy,
                    "spectral_entropy": report.spectral_entropy,
                    "usable": report.usable,
                    "n_cycles": report.n_cycles,
                },
                "activity": activity,
                "activity_confidence": activity_conf,
                "decision": decision.to_dict(),
                "suppressed": suppressed,
            }
            if "truth" in payload:
                record["truth"] = payload["truth"]
            stored = dict(record)
            if self.config.store_raw:
                stored["raw"] = {
                    "ppg": encode_array(ppg),
                    "acc": encode_array(motion["acc"]),
                    "gyro": encode_array(motion["gyro"]),
                    "grav": encode_array(motion["grav"]),
                }
            seq = self.store.append("samples", stored)
            record["seq"] = seq
            engine.last_seq = seq

            self.samples[sample_id] = record
            self.by_subject.setdefault(subject_id, []).append(sample_id)
            count = self.ingest_counts.get(subject_id, 0) + 1
            self.ingest_counts[subject_id] = count
            if count % self.config.checkpoint_every == 0:
                self.store.write_engine_checkpoint(engine)
            return record

    def _is_open(self, ema_id: str, now_ms: int) -> bool:
        q = self.queries.get(ema_id)
        if q is None or ema_id in self.responses:
            return False
        return now_ms < q["expires_at_ms"]

    def _dispatch_query(self, subject_id, sample_id, sample_t_end_ms,
                        now_ms, payload) -> dict:
        ema_id = f"ema-{sample_id}"
        record = {
            "ema_id": ema_id,
            "subject_id": subject_id,
            "sample_id": sample_id,
            "sample_t_end_ms": sample_t_end_ms,
            "dispatched_at_ms": now_ms,
            "expires_at_ms": now_ms + SIXTEEN_MINUTES_MS,
            "questions": QUERY_QUESTIONS,
        }
        if "truth" in payload:
            record["truth"] = payload["truth"]
        record["seq"] = self.store.append("queries", {
            key: value for key, value in record.items() if key != "seq"})
        self.queries[ema_id] = record
        self.open_query[subject_id] = ema_id
        return record

    def pending_queries(self, subject_id: str, now_ms: int | None = None) -> list:
        now_ms = int(time.time() * 1000) if now_ms is None else int(now_ms)
        ema_id = self.open_query.get(subject_id)
        if ema_id is None or not self._is_open(ema_id, now_ms):
            return []
        q = self.queries[ema_id]
        view = {key: q[key] for key in
                ("ema_id", "subject_id", "sample_id", "dispatched_at_ms",
                 "expires_at_ms", "questions")}
        view["seconds_remaining"] = max((q["expires_at_ms"] - now_ms) / 1000.0, 0.0)
        return [view]

    def submit_response(self, ema_id: str, body: dict,
                        now_ms: int | None = None) -> dict:
        query = self.queries.get(ema_id)
        if query is None:
            raise ValidationError(f"unknown ema_id {ema_id!r}", field="ema_id")
        subject_id = query["subject_id"]
        with self._lock(subject_id):
            if ema_id in self.responses:
                return self.responses[ema_id]
            stress = _require(body, "stress")
            if not isinstance(stress, int) or not (0 <= stress <= 4):
                raise ValidationError(f"stress must be an integer 0..4, got {stress!r}",
                                      field="stress")
            emotion = _require(body, "emotion")
            if emotion not in EMOTION_OPTIONS:
                raise ValidationError(f"emotion must be one of {EMOTION_OPTIONS}",
                                      field="emotion")
            activity = _require(body, "activity")
            if activity not in ACTIVITY_OPTIONS:
                raise ValidationError(f"activity must be one of {ACTIVITY_OPTIONS}",
                                      field="activity")
            if now_ms is None:
                now_ms = int(time.time() * 1000)
            responded_at_ms = int(body.get("responded_at_ms") or now_ms)
            if responded_at_ms < query["dispatched_at_ms"]:
                raise ValidationError("responded_at_ms precedes dispatch",
                                      field="responded_at_ms")
            response_time_s = (responded_at_ms - query["dispatched_at_ms"]) / 1000.0

            label_record = {"stress": stress, "emotion": emotion,
                            "activity": activity}
            if responded_at_ms > query["expires_at_ms"]:
                status = "stale"
            else:
                engine = self._engine(subject_id)
                result = engine.register_label(
                    query["sample_id"], ema_id, label_record,
                    sample_t_ms=query["sample_t_end_ms"],
                    responded_at_ms=responded_at_ms)
                status = "accepted" if result == LABEL_REGISTERED else result
            ack = {
                "ema_id": ema_id,
                "sample_id": query["sample_id"],
                "subject_id": subject_id,
                "status": status,
                "responded_at_ms": responded_at_ms,
                "response_time_s": response_time_s,
                "stress": stress,
                "emotion": emotion,
                "activity": activity,
            }
            # client-side display-lag telemetry: stored, unused by analytics
            if body.get("render_to_submit_s") is not None:
                ack["render_to_submit_s"] = float(body["render_to_submit_s"])
            ack["seq"] = self.store.append("responses", {
                key: value for key, value in ack.items() if key != "seq"})
            self.responses[ema_id] = ack
            if self.open_query.get(subject_id) == ema_id:
                del self.open_query[subject_id]
            if status == "accepted":
                self.engines[subject_id].last_seq = ack["seq"]
            return ack

    # -- analytics bridge -------------------------------------------------------

    def subjects(self) -> list:
        return sorted(self.by_subject)

    def subject_data(self, subject_id: str) -> SubjectData:
        ids = self.by_subject.get(subject_id, [])
        if not ids:
            raise ValidationError(f"unknown subject {subject_id!r}",
                                  field="subject")
        records = [self.samples[sid] for sid in ids]
        n = len(records)
        features = np.full((n, 13), np.nan)
        usable = np.zeros(n, dtype=bool)
        quality = np.zeros((n, 5))
        quality_usable = np.zeros(n, dtype=bool)
        activities = []
        t_ms = np.zeros(n)
        for i, r in enumerate(records):
            t_ms[i] = r["t_end_ms"]
            if r["usable"]:
                features[i] = r["features"]
                usable[i] = True
            q = r["quality"]
            quality[i] = [q["skewness_var"], q["kurtosis_var"], q["apen_var"],
                          q["shannon_entropy"], q["spectral_entropy"]]
            quality_usable[i] = q["usable"]
            activities.append(r["activity"])
        engine = self.engines.get(subject_id)
        labels = []
        if engine is not None:
            for lab in engine.labeled:
                labels.append({
                    "sample_id": lab["sample_id"],
                    "ema_id": lab["ema_id"],
                    "responded_at_ms": lab["responded_at_ms"],
                    **lab["record"],
                })
        queries = []
        for ema_id, q in self.queries.items():
            if q["subject_id"] != subject_id:
                continue
            ack = self.responses.get(ema_id)
            answered = ack is not None and ack["status"] == "accepted"
            queries.append({
                "ema_id": ema_id,
                "sample_id": q["sample_id"],
                "dispatched_at_ms": q["dispatched_at_ms"],
                "answered": answered,
                "response_time_s": ack["response_time_s"] if answered else None,
                "self_activity": ack["activity"] if answered else None,
                "stress": ack["stress"] if answered else None,
            })
        queries.sort(key=lambda q: q["dispatched_at_ms"])
        return SubjectData(
            subject_id=subject_id, sample_ids=list(ids), t_ms=t_ms,
            features=features, usable=usable, activities=activities,
            quality=quality, quality_usable=quality_usable,
            feature_means=None if engine is None else engine.feature_means,
            feature_stds=None if engine is None else engine.feature_stds,
            labels=labels, queries=queries)

    def checkpoint_all(self) -> None:
        for engine in self.engines.values():
            self.store.write_engine_checkpoint(engine)

    def close(self) -> None:
        self.store.close()

    # -- replay -------------------------------------------------------------------

    def replay(self, input_path, speed: float | None = None, sort: bool = False,
               stop_after_samples: int | None = None) -> dict:
        """Feed a dataset file through ingest in timestamp order.

        Scripted responses come from the responder profiles embedded in the
        dataset meta line; latencies are drawn keyed by ema_id, so any replay
        of the same dataset produces the same labels at the same times.
        """
        events = read_dataset(input_path)
        meta = next(events)
        profiles = {p["subject_id"]: SubjectProfile.from_dict(p)
                    for p in meta.get("profiles", [])}
        report = {"samples": 0, "ingested": 0, "duplicates": 0,
                  "quality_too_low": 0, "triggers": 0, "suppressed": 0,
                  "responses": 0, "labels": 0, "stale": 0, "expired": 0}
        pending: list = []   # heap of (responded_at_ms, counter, ema_id, body)
        counter = 0
        last_at = None
        wall_start = time.monotonic()
        sim_start = None

        def flush_responses(up_to_ms):
            while pending and pending[0][0] <= up_to_ms:
                _, _, ema_id, body = heapq.heappop(pending)
                ack = self.submit_response(ema_id, body,
                                           now_ms=body["responded_at_ms"])
                report["responses"] += 1
                if ack["status"] == "accepted":
                    report["labels"] += 1
                elif ack["status"] == "stale":
                    report["stale"] += 1

        def schedule_response(sample_id, subject_id, truth, at_ms):
            # draws keyed by ema_id: a resumed replay re-derives the exact
            # response the interrupted run would have produced
            nonlocal counter
            ema_id = f"ema-{sample_id}"
            if ema_id in self.responses:
                return
            profile = profiles.get(subject_id)
            if profile is None or not truth:
                return
            scripted = simulator.respond(profile, ema_id, {
                "activity": truth["activity"],
                "stress01": truth["stress01"],
                "hour": (at_ms // 3600000) % 24,
            })
            if scripted is not None:
                counter += 1
                responded = at_ms + int(scripted["latency_s"] * 1000)
                body = {"stress": scripted["stress"],
                        "emotion": scripted["emotion"],
                        "activity": scripted["activity"],
                        "responded_at_ms": responded}
                heapq.heappush(pending, (responded, counter, ema_id, body))

        event_list = events
        if sort:
            event_list = sorted(events, key=lambda e: e["at_ms"])
        for event in event_list:
            at = event["at_ms"]
            if last_at is not None and at < last_at and not sort:
                raise ValidationError(
                    f"out-of-order timestamp {at} after {last_at}; "
                    "pass sort=True to reorder")
            last_at = at
            if speed:
                if sim_start is None:
                    sim_start = at
                target = (at - sim_start) / 1000.0 / speed
                lag = target - (time.monotonic() - wall_start)
                if lag > 0:
                    time.sleep(lag)
            flush_responses(at)
            report["samples"] += 1
            known = str(event.get("sample_id")
                        or f"{event['subject_id']}-{event['t_start_ms']:013d}")
            if known in self.samples:
                report["duplicates"] += 1
                prior = self.samples[known]
                if prior["decision"]["trigger"] and not prior["suppressed"]:
                    schedule_response(known, prior["subject_id"],
                                      event.get("truth", {}),
                                      prior["t_end_ms"])
                continue
            record = self.ingest(event, now_ms=at)
            report["ingested"] += 1
            if not record["usable"]:
                report["quality_too_low"] += 1
            if record["decision"]["trigger"]:
                report["triggers"] += 1
                if record["suppressed"]:
                    report["suppressed"] += 1
                else:
                    schedule_response(record["sample_id"], record["subject_id"],
                                      event.get("truth", {}), at)
            if stop_after_samples is not None and report["ingested"] >= stop_after_samples:
                break
        if stop_after_samples is None:
            flush_responses(float("inf"))
        self.checkpoint_all()
        return report

    # -- recovery -------------------------------------------------------------------

    @classmethod
    def recover(cls, data_dir, config: Config | None = None,
                activity_model: ForestModel | None = None) -> "Gateway":
        """Rebuild a gateway from its data directory.

        Engines restart from their checkpoints; events logged after each
        checkpoint are re-applied in sequence order. Decision draws are keyed
        by sample id, so re-observation yields the original decisions.
        """
        gw = cls(data_dir, config=config, activity_model=activity_model)
        for path in sorted((gw.store.data_dir / "engines").glob("*.json")):
            engine = QueryEngine.load(path)
            gw.engines[engine.subject_id] = engine

        events = []
        for record in gw.store.read("samples"):
            events.append((record["seq"], "sample", record))
        for record in gw.store.read("queries"):
            events.append((record["seq"], "query", record))
        for record in gw.store.read("responses"):
            events.append((record["seq"], "response", record))
        events.sort(key=lambda is_: is_[0])

        for seq, kind, record in events:
            if kind == "sample":
                record = dict(record)
                record.pop("raw", None)
                sid = record["sample_id"]
                subject_id = record["subject_id"]
                gw.samples[sid] = record
                gw.by_subject.setdefault(subject_id, []).append(sid)
                gw.ingest_counts[subject_id] = gw.ingest_counts.get(subject_id, 0) + 1
                engine = gw._engine(subject_id)
                if record["usable"] and seq > engine.last_seq:
                    features = np.asarray(record["features"], dtype=float)
                    engine.observe(features, sample_id=sid)
                    engine.last_seq = seq
                elif not record["usable"] and seq > engine.last_seq:
                    engine.observe(None, sample_id=sid)
                    engine.last_seq = seq
            elif kind == "query":
                gw.queries[record["ema_id"]] = record
                gw.open_query[record["subject_id"]] = record["ema_id"]
            else:
                ema_id = record["ema_id"]
                gw.responses[ema_id] = record
                query = gw.queries.get(ema_id)
                subject_id = record["subject_id"]
                if gw.open_query.get(subject_id) == ema_id:
                    del gw.open_query[subject_id]
                if record["status"] == "accepted" and query is not None:
                    engine = gw._engine(subject_id)
                    if seq > engine.last_seq:
                        engine.register_label(
                            query["sample_id"], ema_id,
                            {"stress": record["stress"],
                             "emotion": record["emotion"],
                             "activity": record["activity"]},
                            sample_t_ms=query["sample_t_end_ms"],
                            responded_at_ms=record["responded_at_ms"])
                        engine.last_seq = seq
        return gw
