"""Acceptance suite: every desk-scale criterion at its stated tolerance.

Each test is one criterion; the conftest hook prints one PASS/FAIL line per
criterion at the end of the run. Expensive corpora are built once in
module-scoped fixtures and shared.
"""
import time

import numpy as np
import pytest

from pulselabel import (
    FeatureVector,
    NnSeries,
    PpgWindow,
    QualityTooLow,
    bandpass_filter,
    detect_peaks,
    hrv_features,
    moving_average,
    process_window,
)
from pulselabel.activity import (
    MotionWindow,
    evaluate_leave_k_out,
    extract_motion_features,
    train_forest,
)
from pulselabel.analytics import (
    SubjectData,
    coverage_curve,
    quality_by_activity,
    response_stats,
    temporal_profile,
    write_coverage_csv,
    write_quality_csv,
    write_response_cdf_csv,
    write_response_rate_csv,
    write_temporal_csv,
)
from pulselabel.config import Config
from pulselabel.engine import QueryEngine
from pulselabel.gateway import Gateway
from pulselabel.quality import INDEX_NAMES, assess
from pulselabel.simulator import (
    DETECTOR_CLASS_OF,
    SIM_ACTIVITIES,
    SubjectProfile,
    generate_window,
    write_dataset,
)

FS = 20.0


def sit_profile(seed, base_hr=70.0, **kwargs):
    return SubjectProfile(subject_id="acc", seed=seed, base_hr=base_hr,
                          hr_stress_gain=0.0, schedule=((0.0, "Sit"),), **kwargs)


def window_of(payload):
    return PpgWindow(payload["subject_id"], payload["t_start_ms"],
                     payload["fs"], payload["ppg"])


# ---------------------------------------------------------------------------
# shared corpora


@pytest.fixture(scope="module")
def coverage_corpus():
    """2,000 processed windows of one sit-only subject (stress AR half-life
    15 min drives the feature manifold)."""
    profile = SubjectProfile(subject_id="C", seed=202, schedule=((0.0, "Sit"),))
    features, t_end_ms = [], []
    for step in range(2000):
        payload = generate_window(profile, step)
        try:
            fv = process_window(window_of(payload))
        except QualityTooLow:
            continue
        features.append(fv.to_array())
        t_end_ms.append(payload["t_start_ms"] + 120000)
    return np.vstack(features), np.array(t_end_ms, dtype=float)


@pytest.fixture(scope="module")
def e2e(tmp_path_factory):
    """Four simulated subjects over three days: dataset, trained activity
    model, a timed uninterrupted replay plus reports, and a crash-resumed
    twin run."""
    root = tmp_path_factory.mktemp("e2e")
    profiles = [SubjectProfile(subject_id=f"S{i + 1:02d}", seed=500 + 71 * i)
                for i in range(4)]
    dataset = root / "sim.jsonl"
    info = write_dataset(profiles, days=3.0, path=dataset)

    X, y, subj = [], [], []
    for s in range(3):
        for act in SIM_ACTIVITIES:
            for w in range(3):
                payload = generate_window(
                    SubjectProfile(subject_id=f"T{s}", seed=900 + 13 * s,
                                   schedule=((0.0, act),)), w)
                rows = extract_motion_features(MotionWindow(
                    payload["acc"], payload["gyro"], payload["grav"], fs=FS))
                X.append(rows)
                y += [DETECTOR_CLASS_OF[act]] * len(rows)
                subj += [f"T{s}"] * len(rows)
    model = train_forest(np.vstack(X), y, n_trees=40, seed=4)

    cfg = Config(seed=9)
    started = time.monotonic()
    gateway = Gateway(root / "full", config=cfg, activity_model=model)
    report = gateway.replay(dataset)
    reports_dir = root / "reports"
    reports_dir.mkdir()
    subject = gateway.subjects()[0]
    data = gateway.subject_data(subject)
    write_coverage_csv(reports_dir / "fig3_coverage.csv", subject,
                       coverage_curve(data, D=cfg.coverage_d))
    write_temporal_csv(reports_dir / "fig4_temporal_activity.csv",
                       temporal_profile(data, group_by="activity"))
    everyone = [gateway.subject_data(s) for s in gateway.subjects()]
    write_quality_csv(reports_dir / "fig6_sqi_activity.csv",
                      quality_by_activity(everyone))
    stats = response_stats(everyone)
    write_response_cdf_csv(reports_dir / "fig7_response_cdf.csv", stats)
    write_response_rate_csv(reports_dir / "fig8_response_rate.csv", stats)
    elapsed = time.monotonic() - started

    crashed = Gateway(root / "crashed", config=cfg, activity_model=model)
    crashed.replay(dataset, stop_after_samples=500)
    crashed.store.close()
    del crashed
    resumed = Gateway.recover(root / "crashed", config=cfg, activity_model=model)
    resumed.replay(dataset)

    return {
        "info": info,
        "report": report,
        "elapsed_s": elapsed,
        "gateway": gateway,
        "resumed": resumed,
        "stats": stats,
        "reports_dir": reports_dir,
    }


# ---------------------------------------------------------------------------
# criteria


class TestDspCorrectness:
    def analytic_gain(self, f_hz, fs=FS, low=0.7, high=3.5, order=3):
        # hand-derived: band-pass magnitude is the low-pass prototype at
        # xi = (w^2 - w0^2)/(Bw) with bilinear prewarping; two passes square it
        def warp(f):
            return 2.0 * fs * np.tan(np.pi * f / fs)

        wl, wh = warp(low), warp(high)
        bw, w0sq = wh - wl, wl * wh
        w = warp(f_hz)
        xi = (w * w - w0sq) / (bw * w)
        return 1.0 / (1.0 + xi ** (2 * order))

    def test_dsp_correctness(self):
        n = int(240.0 * FS)
        t = np.arange(n) / FS
        trim = int(60 * FS)
        for f_probe in (0.1, 0.7, 1.0, 2.0, 3.5, 5.0):
            w = PpgWindow("probe", 0, FS, np.sin(2 * np.pi * f_probe * t))
            out = bandpass_filter(w)
            xi = w.samples[trim:-trim]
            yi = out.samples[trim:-trim]
            k = int(round(f_probe * len(xi) / FS))
            measured = np.abs(np.fft.rfft(yi)[k]) / np.abs(np.fft.rfft(xi)[k])
            expected = self.analytic_gain(f_probe)
            diff_db = abs(20 * np.log10(measured / expected))
            assert diff_db < 1.0, (f_probe, diff_db)
        # runtime gate: the full chain on one 2-minute window
        payload = generate_window(sit_profile(1), 0)
        started = time.monotonic()
        process_window(window_of(payload))
        assert time.monotonic() - started < 1.0


class TestHrvAccuracy:
    def test_hrv_accuracy(self):
        hits = 0
        rng = np.random.default_rng(42)
        for i in range(200):
            base_hr = 50.0 + 130.0 * i / 199.0
            profile = sit_profile(5000 + i, base_hr=base_hr)
            payload = generate_window(profile, int(rng.integers(0, 50)))
            try:
                fv = process_window(window_of(payload))
                hits += abs(fv.bpm - payload["truth"]["bpm"]) <= 2.0
            except QualityTooLow:
                pass
        assert hits / 200 >= 0.95
        # hand-computed example, exact to 4 decimal places
        fv = hrv_features(NnSeries([1000.0, 950.0, 1050.0, 1000.0]))
        expected = FeatureVector(
            bpm=60.0, ibi_ms=1000.0, sdnn_ms=35.35533906, sdsd_ms=70.71067812,
            rmssd_ms=70.71067812, pnn20=1.0, pnn50=1.0 / 3.0, mad_ms=25.0,
            sd1_ms=50.0, sd2_ms=0.0, s_area_ms2=0.0, sd1_sd2_ratio=0.0,
            br_hz=4.0 / 13.0)
        for name in FeatureVector.__dataclass_fields__:
            assert abs(getattr(fv, name) - getattr(expected, name)) < 5e-5, name


class TestSqiOrdering:
    def test_sqi_ordering(self):
        activities = ("Sit", "Stand", "Walk")
        values = {a: {n: [] for n in INDEX_NAMES} for a in activities}
        for i in range(50):
            for act in activities:
                profile = SubjectProfile(subject_id="q", seed=900 + i,
                                         base_hr=70.0, hr_stress_gain=0.0,
                                         schedule=((0.0, act),))
                payload = generate_window(profile, 0)
                w = window_of(payload)
                filtered = bandpass_filter(w)
                try:
                    peaks = detect_peaks(filtered, baseline=moving_average(filtered))
                except QualityTooLow:
                    peaks = None
                rep = assess(w, peaks, filtered=filtered)
                for n in INDEX_NAMES:
                    values[act][n].append(getattr(rep, n))
        for n in INDEX_NAMES:
            sit, stand, walk = (np.median(values[a][n]) for a in activities)
            assert sit < stand < walk, (n, sit, stand, walk)


class TestQueryProbabilityLaw:
    def test_query_probability_law(self):
        rng = np.random.default_rng(1)
        centers = (0.0, 8.0, 16.0)
        engine = QueryEngine("subj", n_initial=100, k_regions=3, quota=None,
                             p_floor=0.1, seed=3)
        initial = []
        for count, center in zip((50, 40, 10), centers):
            for _ in range(count):
                v = np.zeros(13)
                v[0] = center + rng.normal(0, 0.05)
                initial.append(v)
        for i, v in enumerate(rng.permutation(len(initial))):
            engine.observe(initial[v], sample_id=f"init-{i:03d}")
        assert engine.phase == "query"

        draw_rng = np.random.default_rng(77)
        choices = draw_rng.choice(3, size=10_000, p=(0.5, 0.4, 0.1))
        stats = {}
        for i, c in enumerate(choices):
            v = np.zeros(13)
            v[0] = centers[c] + draw_rng.normal(0, 0.05)
            d = engine.observe(v, sample_id=f"s{i}")
            assert d.probability == 0.0 or 0.1 <= d.probability <= 1.0
            n, k = stats.get(d.region_id, (0, 0))
            stats[d.region_id] = (n + 1, k + int(d.trigger))
        total = engine.region_counts.sum()
        max_density = engine.region_counts.max() / total
        for region, (n, k) in stats.items():
            expected = float(np.clip(
                engine.region_counts[region] / total / max_density, 0.1, 1.0))
            assert abs(k / n - expected) < 0.03, (region, k / n, expected)


class TestCoverageBehavior:
    def test_coverage_behavior(self, coverage_corpus):
        features, t_end_ms = coverage_corpus
        assert len(features) >= 2000
        engine = QueryEngine("C", n_initial=100, k_regions=10, quota=None,
                             p_floor=0.1, seed=9)
        labels = []
        for i, v in enumerate(features):
            d = engine.observe(v, sample_id=f"s{i:05d}")
            if d.trigger and len(labels) < 120:
                engine.register_label(f"s{i:05d}", f"e{i:05d}", {"stress": 2}, 0, 0)
                labels.append({"sample_id": f"s{i:05d}", "ema_id": f"e{i:05d}",
                               "responded_at_ms": 0, "stress": 2})
        assert len(labels) >= 100
        data = SubjectData(
            subject_id="C",
            sample_ids=[f"s{i:05d}" for i in range(len(features))],
            t_ms=t_end_ms, features=features,
            usable=np.ones(len(features), dtype=bool),
            activities=["Sit"] * len(features),
            quality=np.zeros((len(features), 5)),
            quality_usable=np.ones(len(features), dtype=bool),
            feature_means=engine.feature_means,
            feature_stds=engine.feature_stds,
            labels=labels)
        curve = coverage_curve(data, D=1.5)
        values = [f for _, f in curve]
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))
        f_100 = dict(curve)[100]
        assert f_100 <= 0.15, f_100
        # engine's F at the end equals the curve's last point exactly
        assert engine.coverage(samples=list(features), D=1.5) == values[-1]

    def test_coverage_brute_force_toys(self):
        rng = np.random.default_rng(15)
        engine = QueryEngine("t", n_initial=50, k_regions=5, seed=2)
        points = [rng.normal(0, 2, 13) for _ in range(50)]
        for i, p in enumerate(points):
            engine.observe(p, sample_id=f"p{i}")
        for i in (3, 17, 30, 44):
            engine.register_label(f"p{i}", f"e{i}", {}, 0, 0)
        labeled = [3, 17, 30, 44]
        for d_thr in (0.5, 1.5, 4.0):
            far = 0
            for p in points:
                z = engine.standardize(p)
                dmin = min(np.sqrt(np.sum((z - engine.standardize(points[j])) ** 2))
                           for j in labeled)
                far += dmin > d_thr
            assert engine.coverage(D=d_thr) == far / len(points)


class TestTemporalSaturation:
    def test_temporal_saturation(self, coverage_corpus):
        features, t_end_ms = coverage_corpus
        n = 500
        F, T = features[:n], t_end_ms[:n]
        means = F[:100].mean(axis=0)
        stds = F[:100].std(axis=0)
        stds[stds == 0.0] = 1.0
        data = SubjectData(
            subject_id="C", sample_ids=[f"s{i}" for i in range(n)],
            t_ms=T, features=F, usable=np.ones(n, dtype=bool),
            activities=["Sit"] * n, quality=np.zeros((n, 5)),
            quality_usable=np.ones(n, dtype=bool),
            feature_means=means, feature_stds=stds)
        profile = temporal_profile(data, horizon_min=180)[0]
        d = dict(zip(profile.gap_min, profile.mean_distance))
        counts = dict(zip(profile.gap_min, profile.pair_count))
        assert all(counts[g] >= 200 for g in range(15, 181, 15))
        assert d[15] < d[45]
        plateau = [d[g] for g in range(30, 181, 15)]
        mean = np.mean(plateau)
        assert all(abs(x - mean) / mean <= 0.10 for x in plateau)


class TestResponseAnalytics:
    def test_response_analytics(self, e2e):
        stats = e2e["stats"]
        # lying-down responses are stochastically dominated (slower)
        lying = stats.cdfs.get(("activity", "lying_down"))
        sitting = stats.cdfs.get(("activity", "sitting"))
        assert lying and sitting and len(lying) >= 10 and len(sitting) >= 10

        def cdf_at(points, t):
            v = 0.0
            for x, p in points:
                if x <= t:
                    v = p
                else:
                    break
            return v

        grid = sorted({t for t, _ in lying} | {t for t, _ in sitting})
        assert all(cdf_at(lying, t) <= cdf_at(sitting, t) + 0.05 for t in grid)
        assert stats.medians[("activity", "lying_down")] > \
            2.0 * stats.medians[("activity", "sitting")]
        # early-morning dip vs early-afternoon peak
        assert stats.rate_by_hour[8]["rate"] < stats.rate_by_hour[14]["rate"]

    def test_response_rate_exact_fixture(self):
        queries = [{
            "ema_id": f"q{i}", "sample_id": f"p{i}",
            "dispatched_at_ms": 14 * 3600000,
            "answered": i < 5,
            "response_time_s": 60.0 if i < 5 else None,
            "self_activity": "sitting" if i < 5 else None,
            "stress": 2 if i < 5 else None,
        } for i in range(10)]
        data = SubjectData(
            subject_id="F", sample_ids=["p0"], t_ms=np.array([0.0]),
            features=np.zeros((1, 13)), usable=np.ones(1, dtype=bool),
            activities=["Sit"], quality=np.zeros((1, 5)),
            quality_usable=np.ones(1, dtype=bool),
            feature_means=np.zeros(13), feature_stds=np.ones(13),
            queries=queries)
        stats = response_stats([data])
        assert stats.rate_by_hour[14]["rate"] == 0.5
        assert stats.rate_by_hour[14]["queries"] == 10
        assert stats.rate_by_hour[14]["responses"] == 5


class TestEndToEndReplay:
    def test_end_to_end_replay(self, e2e):
        report = e2e["report"]
        assert e2e["info"]["samples"] >= 1100
        assert report["ingested"] == e2e["info"]["samples"]
        assert report["labels"] > 50
        assert e2e["elapsed_s"] < 60.0, e2e["elapsed_s"]
        for name in ("fig3_coverage.csv", "fig4_temporal_activity.csv",
                     "fig6_sqi_activity.csv", "fig7_response_cdf.csv",
                     "fig8_response_rate.csv"):
            assert (e2e["reports_dir"] / name).exists(), name

    def test_crash_restart_identical_decisions(self, e2e):
        full, resumed = e2e["gateway"], e2e["resumed"]

        def decisions(gw):
            return [(sid, gw.samples[sid]["decision"])
                    for s in sorted(gw.by_subject) for sid in gw.by_subject[s]]

        assert decisions(full) == decisions(resumed)
        for s in full.engines:
            assert full.engines[s].labeled == resumed.engines[s].labeled


class TestActivityModel:
    def test_activity_model(self):
        X, y, subjects = [], [], []
        for s in range(6):
            for act in SIM_ACTIVITIES:
                for w in range(4):
                    payload = generate_window(
                        SubjectProfile(subject_id=f"A{s}", seed=1300 + 29 * s,
                                       schedule=((0.0, act),)), w)
                    rows = extract_motion_features(MotionWindow(
                        payload["acc"], payload["gyro"], payload["grav"], fs=FS))
                    X.append(rows)
                    y += [DETECTOR_CLASS_OF[act]] * len(rows)
                    subjects += [f"A{s}"] * len(rows)
        result = evaluate_leave_k_out(np.vstack(X), y, subjects, k=2, seed=6)
        assert result["mean_accuracy"] >= 0.90, result


class TestSixteenMinuteRule:
    def test_sixteen_minute_rule(self, e2e):
        # property over every registered label of the end-to-end run, plus
        # adversarial latencies straddling the boundary
        checked = 0
        for gw in (e2e["gateway"], e2e["resumed"]):
            for subject, engine in gw.engines.items():
                for label in engine.labeled:
                    sample = gw.samples[label["sample_id"]]
                    gap = abs(label["responded_at_ms"] - sample["t_end_ms"])
                    assert gap <= 16 * 60 * 1000
                    checked += 1
        assert checked > 50

        engine = QueryEngine("p", n_initial=5, k_regions=2, quota=None, seed=0)
        rng = np.random.default_rng(2)
        for i in range(5):
            v = np.zeros(13)
            v[0] = rng.normal()
            engine.observe(v, sample_id=f"s{i}")
        boundary = 16 * 60 * 1000
        for i, delta in enumerate((-1, 0, 1, 60000, -60000, 777777)):
            status = engine.register_label(
                "s0", f"e{i}", {}, sample_t_ms=0,
                responded_at_ms=boundary + delta)
            assert (status == "registered") == (delta <= 0)
