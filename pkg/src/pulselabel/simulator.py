"""Synthetic subjects: PPG + motion traces with ground truth, and a scripted responder.

Every draw is keyed by (seed, purpose, index) through a hash, so any window,
beat sequence, or response can be regenerated in isolation and in any order.
That property is what makes replays and crash recovery reproducible.
"""
from __future__ import annotations

import base64
import gzip
import hashlib
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigError

DEFAULT_T0_MS = 1704067200000  # 2024-01-01T00:00:00Z, aligns hours of day

# Activities the simulator schedules. LyingDown maps to the detector's
# "Others" class but is its own EMA answer.
SIM_ACTIVITIES = ("Sit", "Stand", "Walk", "Jog", "LyingDown")

DETECTOR_CLASS_OF = {
    "Sit": "Sit", "Stand": "Stand", "Walk": "Walk", "Jog": "Jog",
    "LyingDown": "Others",
}

EMA_ANSWER_OF = {
    "Sit": "sitting", "Stand": "standing", "Walk": "walking",
    "Jog": "jogging", "LyingDown": "lying_down",
}

DEFAULT_SCHEDULE = (
    (0.0, "LyingDown"), (7.0, "Sit"), (8.5, "Walk"), (9.0, "Sit"),
    (12.0, "Walk"), (12.5, "Sit"), (15.0, "Stand"), (16.0, "Sit"),
    (18.0, "Jog"), (18.4, "Stand"), (19.5, "Sit"), (22.0, "LyingDown"),
)

# Per-activity PPG corruption: broadband noise amplitude, in-band periodic
# artifact amplitude, pulse amplitude-modulation depth, and low-frequency
# baseline wander. Motion couples into the optical path additively
# (interference at the movement cadence, slow wander from limb motion) and
# multiplicatively (beat amplitudes wobble).
DEFAULT_PPG_NOISE = {
    "Sit": {"broadband": 0.02, "artifact": 0.0, "am": 0.04, "wander": 0.05},
    "Stand": {"broadband": 0.025, "artifact": 0.02, "am": 0.10, "wander": 0.38},
    "Walk": {"broadband": 0.08, "artifact": 0.10, "am": 0.26, "wander": 1.00},
    "Jog": {"broadband": 0.18, "artifact": 0.35, "am": 0.55, "wander": 1.80},
    "LyingDown": {"broadband": 0.015, "artifact": 0.0, "am": 0.03, "wander": 0.03},
}

ARTIFACT_FREQ_HZ = {"Stand": 0.85, "Walk": 1.8, "Jog": 2.6}
# Wander spreads over a wider band the more vigorous the movement is.
WANDER_BAND_HZ = {
    "Sit": (0.03, 0.18), "Stand": (0.03, 0.30), "Walk": (0.03, 0.50),
    "Jog": (0.03, 0.62), "LyingDown": (0.03, 0.12),
}

# Pulse morphology: fast systolic rise then a slower dicrotic hump, which
# gives each heart cycle nonzero skewness. The systolic delay is a fixed
# transit time (so peak-to-peak intervals reproduce the beat intervals
# exactly), while widths and the dicrotic offset compress with the beat
# interval and are floored to stay resolvable at 20 Hz.
PULSE_TRANSIT_S = 0.25
PULSE_PRIMARY = (0.0, 0.055, 0.040, 1.0)    # (extra delay/ibi, sigma/ibi, sigma floor s, amp)
PULSE_DICROTIC = (0.30, 0.12, 0.055, 0.30)


def _keyed_rng(*key) -> np.random.Generator:
    digest = hashlib.sha256(":".join(str(k) for k in key).encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def keyed_uniform(*key) -> float:
    """Deterministic uniform in [0, 1) from a hashed key."""
    digest = hashlib.sha256(":".join(str(k) for k in key).encode()).digest()
    return int.from_bytes(digest[:8], "little") / 2.0 ** 64


@dataclass
class ResponderModel:
    """How (and whether) the simulated human answers a query."""
    base_rate: float = 0.85
    rate_by_activity: dict = field(default_factory=lambda: {"LyingDown": 0.65})
    rate_by_hour: dict = field(default_factory=lambda: {7: 0.4, 8: 0.35, 14: 1.1, 15: 1.1})
    latency_median_s: float = 75.0
    latency_median_by_activity: dict = field(default_factory=lambda: {"LyingDown": 300.0})
    latency_sigma: float = 0.6
    stress_speedup: float = 0.8

    def __post_init__(self):
        # JSON object keys arrive as strings after a dataset round trip
        self.rate_by_hour = {int(k): float(v) for k, v in self.rate_by_hour.items()}
        rates = [self.base_rate, *self.rate_by_activity.values(),
                 *self.rate_by_hour.values()]
        if any(not (0.0 <= r) for r in rates):
            raise ConfigError("response rates must be non-negative")


@dataclass
class SubjectProfile:
    """Ground-truth generator parameters for one simulated subject."""
    subject_id: str
    seed: int = 0
    base_hr: float = 62.0
    hr_stress_gain: float = 10.0
    hrv_mod_amp_ms: float = 40.0
    hrv_mod_amp_stress_drop: float = 0.5
    hrv_mod_freq_hz: float = 0.20
    hrv_mod_freq_stress_gain: float = 0.14
    ibi_jitter_ms: float = 2.0
    stress_mean: float = 0.35
    stress_phi: float = 0.5
    stress_sigma: float = 0.12
    schedule: tuple = DEFAULT_SCHEDULE
    ppg_noise: dict = field(default_factory=lambda: dict(DEFAULT_PPG_NOISE))
    responder: ResponderModel = field(default_factory=ResponderModel)

    def __post_init__(self):
        if not (0.0 <= self.stress_phi < 1.0):
            raise ConfigError(f"stress AR coefficient must be in [0,1), got {self.stress_phi}")
        if not self.schedule or self.schedule[0][0] != 0.0:
            raise ConfigError("activity schedule must start at hour 0")
        self.schedule = tuple((float(h), str(a)) for h, a in self.schedule)
        for _, act in self.schedule:
            if act not in SIM_ACTIVITIES:
                raise ConfigError(f"unknown scheduled activity {act!r}")
        self._stress_cache = np.empty(0)

    def activity_at(self, t_s: float) -> str:
        hour = (t_s / 3600.0) % 24.0
        current = self.schedule[0][1]
        for start_hour, act in self.schedule:
            if hour >= start_hour:
                current = act
        return current

    def stress_path(self, n_steps: int) -> np.ndarray:
        """Latent stress AR(1) sampled once per window period."""
        if len(self._stress_cache) >= n_steps:
            return self._stress_cache[:n_steps]
        eps = _keyed_rng(self.seed, "stress").normal(0.0, self.stress_sigma, n_steps)
        path = np.empty(n_steps)
        level = self.stress_mean
        for k in range(n_steps):
            level = self.stress_mean + self.stress_phi * (level - self.stress_mean) + eps[k]
            path[k] = level
        self._stress_cache = path
        return path

    def stress_at_step(self, step: int) -> float:
        return float(self.stress_path(step + 1)[step])

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("_stress_cache", None)
        d["schedule"] = [list(entry) for entry in self.schedule]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SubjectProfile":
        d = dict(d)
        d["schedule"] = tuple(tuple(e) for e in d["schedule"])
        d["responder"] = ResponderModel(**d["responder"])
        return cls(**d)


@dataclass(frozen=True)
class SimParams:
    """Sampling cadence shared by the generator and the gateway."""
    fs: float = 20.0
    window_s: float = 120.0
    period_s: float = 900.0
    t0_ms: int = DEFAULT_T0_MS


def clip01(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def stress_level_of(stress01: float) -> int:
    """Quantize latent stress into the 5 EMA levels (0 = not at all .. 4 = extremely)."""
    return int(round(clip01(stress01) * 4.0))


def emotion_of(stress01: float) -> str:
    s = clip01(stress01)
    if s < 0.25:
        return "happy"
    if s < 0.5:
        return "neutral"
    if s < 0.75:
        return "sad"
    return "mad"


def _beat_times(profile: SubjectProfile, step: int, params: SimParams,
                stress01: float) -> tuple[np.ndarray, np.ndarray]:
    """Beat instants covering the window plus a warm-up margin.

    Returns (beat times s, per-beat interval s) where the interval is the one
    following each beat; it also sets that beat's pulse width.
    """
    t_start = step * params.period_s
    t_end = t_start + params.window_s
    hr = profile.base_hr + profile.hr_stress_gain * stress01
    base_ibi_ms = 60000.0 / hr
    mod_amp = profile.hrv_mod_amp_ms * (1.0 - profile.hrv_mod_amp_stress_drop * stress01)
    mod_freq = profile.hrv_mod_freq_hz + profile.hrv_mod_freq_stress_gain * stress01
    rng = _keyed_rng(profile.seed, "beats", step)
    beats, ibis = [], []
    b = t_start - 3.0
    while b < t_end + 1.5:
        ibi_ms = (base_ibi_ms
                  + mod_amp * math.sin(2.0 * math.pi * mod_freq * b)
                  + rng.normal(0.0, profile.ibi_jitter_ms))
        ibi_s = max(ibi_ms, 250.0) / 1000.0
        beats.append(b)
        ibis.append(ibi_s)
        b += ibi_s
    return np.array(beats), np.array(ibis)


def _pulse_waveform(grid: np.ndarray, beats: np.ndarray, ibis: np.ndarray) -> np.ndarray:
    x = np.zeros_like(grid)
    dt = grid[1] - grid[0]
    for b, ibi in zip(beats, ibis):
        for delay_frac, sigma_frac, sigma_floor, amp in (PULSE_PRIMARY, PULSE_DICROTIC):
            center = b + PULSE_TRANSIT_S + delay_frac * ibi
            sigma = max(sigma_frac * ibi, sigma_floor)
            lo = max(int((center - 4 * sigma - grid[0]) / dt), 0)
            hi = min(int((center + 4 * sigma - grid[0]) / dt) + 1, len(grid))
            if lo < hi:
                tau = grid[lo:hi] - center
                x[lo:hi] += amp * np.exp(-0.5 * (tau / sigma) ** 2)
    return x


def _band_limited_noise(rng: np.random.Generator, n: int, fs: float,
                        band=(0.3, 4.5)) -> np.ndarray:
    """Unit-variance noise restricted to the band where motion artifacts live."""
    white = rng.normal(0.0, 1.0, n)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    spectrum[(freqs < band[0]) | (freqs > band[1])] = 0.0
    shaped = np.fft.irfft(spectrum, n)
    sd = shaped.std()
    return shaped / sd if sd > 0 else shaped


def _smooth_noise(rng: np.random.Generator, n: int, fs: float,
                  node_spacing_s: float = 4.0) -> np.ndarray:
    """Slowly varying unit-scale noise, linear between random nodes."""
    n_nodes = max(int(n / fs / node_spacing_s) + 2, 2)
    nodes = rng.normal(0.0, 1.0, n_nodes)
    return np.interp(np.arange(n), np.linspace(0, n - 1, n_nodes), nodes)


def _quasi_periodic_artifact(rng: np.random.Generator, n: int, fs: float,
                             f0: float) -> np.ndarray:
    """Movement interference: a tone whose cadence drifts and amplitude wobbles.

    The drift matters: a perfectly stationary tone would present a more
    regular beat train than the pulse itself and capture the peak detector,
    which real step artifacts rarely manage for minutes at a time.
    """
    freq = f0 * (1.0 + 0.15 * _smooth_noise(rng, n, fs, node_spacing_s=2.5))
    phase = 2.0 * np.pi * np.cumsum(freq) / fs + rng.uniform(0.0, 2.0 * np.pi)
    envelope = 1.0 + 0.35 * _smooth_noise(rng, n, fs)
    return envelope * (np.sin(phase) + 0.4 * np.sin(2.0 * phase + 1.3))


STEP_FREQ_HZ = {"Walk": 1.8, "Jog": 2.6}

GRAVITY_OF = {
    "Sit": (0.3, 0.5, 9.79),
    "Stand": (0.15, 1.2, 9.72),
    "Walk": (0.2, 0.8, 9.77),
    "Jog": (0.3, 1.0, 9.74),
    "LyingDown": (9.0, 1.5, 3.5),
}

ACC_NOISE_OF = {"Sit": 0.05, "Stand": 0.14, "Walk": 1.2, "Jog": 3.0, "LyingDown": 0.03}
STEP_ACC_AMP = {"Walk": 2.2, "Jog": 5.5}


def _motion_channels(profile: SubjectProfile, step: int, params: SimParams,
                     activity: str, n: int) -> dict:
    rng = _keyed_rng(profile.seed, "motion", step)
    t = np.arange(n) / params.fs
    acc = rng.normal(0.0, ACC_NOISE_OF[activity], (n, 3))
    gyro = rng.normal(0.0, 0.5 * ACC_NOISE_OF[activity], (n, 3))
    grav = np.array(GRAVITY_OF[activity]) + rng.normal(0.0, 0.02, (n, 3))
    if activity in STEP_FREQ_HZ:
        f = STEP_FREQ_HZ[activity]
        amp = STEP_ACC_AMP[activity]
        phase = rng.uniform(0.0, 2.0 * np.pi)
        stride = np.sin(2.0 * np.pi * f * t + phase)
        bounce = np.sin(4.0 * np.pi * f * t + phase)
        acc[:, 0] += amp * stride
        acc[:, 2] += 0.6 * amp * bounce
        gyro[:, 1] += 0.4 * amp * stride
    return {"acc": acc, "gyro": gyro, "grav": grav}


def generate_window(profile: SubjectProfile, step: int,
                    params: SimParams = SimParams()) -> dict:
    """One sample payload (PPG + motion) plus its ground truth.

    Deterministic in (profile.seed, step): calling twice returns identical
    arrays.
    """
    t_start = step * params.period_s
    n = int(round(params.window_s * params.fs))
    grid = t_start + np.arange(n) / params.fs
    stress01 = clip01(profile.stress_at_step(step))
    activity = profile.activity_at(t_start)

    beats, ibis = _beat_times(profile, step, params, stress01)
    ppg = _pulse_waveform(grid, beats, ibis)
    noise = profile.ppg_noise.get(activity, DEFAULT_PPG_NOISE["Sit"])
    rng = _keyed_rng(profile.seed, "ppgnoise", step)
    tau = np.arange(n) / params.fs
    if noise.get("am", 0.0) > 0.0:
        am_freq = ARTIFACT_FREQ_HZ.get(activity, 1.0) * 0.31 + 0.13
        am_phase = rng.uniform(0.0, 2.0 * np.pi)
        ppg = ppg * (1.0 + noise["am"] * np.sin(2.0 * np.pi * am_freq * tau + am_phase))
    if noise.get("artifact", 0.0) > 0.0 and activity in ARTIFACT_FREQ_HZ:
        f = ARTIFACT_FREQ_HZ[activity]
        ppg = ppg + noise["artifact"] * _quasi_periodic_artifact(rng, n, params.fs, f)
    if noise.get("wander", 0.0) > 0.0:
        band = WANDER_BAND_HZ.get(activity, (0.03, 0.3))
        ppg = ppg + noise["wander"] * _band_limited_noise(rng, n, params.fs, band=band)
    if noise.get("broadband", 0.0) > 0.0:
        # bursty: real artifacts come and go, so some heart cycles stay clean
        # while others are buried
        envelope = np.abs(_smooth_noise(rng, n, params.fs, node_spacing_s=3.0)) / 0.8
        ppg = ppg + noise["broadband"] * envelope * _band_limited_noise(rng, n, params.fs)
    ppg = ppg + 0.005 * rng.normal(0.0, 1.0, n)

    inside = beats[(beats >= t_start) & (beats <= t_start + params.window_s)]
    true_bpm = 60.0 / float(np.diff(inside).mean()) if len(inside) > 1 else float("nan")

    motion = _motion_channels(profile, step, params, activity, n)
    return {
        "subject_id": profile.subject_id,
        "t_start_ms": params.t0_ms + int(t_start * 1000),
        "fs": params.fs,
        "ppg": ppg,
        "acc": motion["acc"],
        "gyro": motion["gyro"],
        "grav": motion["grav"],
        "truth": {
            "activity": activity,
            "detector_class": DETECTOR_CLASS_OF[activity],
            "stress01": stress01,
            "stress_level": stress_level_of(stress01),
            "bpm": true_bpm,
        },
    }


def respond(profile: SubjectProfile, ema_id: str, context: dict):
    """Scripted answer to a dispatched query, or None when ignored.

    ``context`` carries the scheduled activity, latent stress, and hour of
    day at dispatch. Draws are keyed by ema_id, so a replayed dispatch gets
    the identical response and latency.
    """
    r = profile.responder
    activity = context["activity"]
    stress01 = clip01(context["stress01"])
    hour = int(context["hour"]) % 24
    rate = (r.base_rate
            * r.rate_by_activity.get(activity, 1.0)
            * r.rate_by_hour.get(hour, 1.0))
    if keyed_uniform(profile.seed, "resp", ema_id) >= clip01(rate):
        return None
    median = r.latency_median_by_activity.get(activity, r.latency_median_s)
    median = median * math.exp(-r.stress_speedup * stress01)
    z = _keyed_rng(profile.seed, "lat", ema_id).normal(0.0, r.latency_sigma)
    latency_s = median * math.exp(z)
    return {
        "latency_s": float(latency_s),
        "stress": stress_level_of(stress01),
        "emotion": emotion_of(stress01),
        "activity": EMA_ANSWER_OF[activity],
    }


def encode_array(a: np.ndarray) -> str:
    """Compact dataset encoding: float32 little-endian, base64."""
    return base64.b64encode(np.asarray(a, dtype="<f4").tobytes()).decode("ascii")


def decode_array(s: str, shape=None) -> np.ndarray:
    a = np.frombuffer(base64.b64decode(s), dtype="<f4").astype(float)
    return a.reshape(shape) if shape is not None else a


def _open_maybe_gz(path, mode):
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def write_dataset(profiles, days: float, path,
                  params: SimParams = SimParams()) -> dict:
    """Emit a replay-compatible dataset file (JSONL, optionally .gz).

    The first line is a meta record with the generator profiles; each sample
    line carries the payload arrays (base64 float32) plus ground truth. The
    scripted responder is reconstructed from the meta line at replay time.
    """
    profiles = list(profiles)
    ids = [p.subject_id for p in profiles]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate subject_id in profiles")
    steps = int(days * 86400.0 / params.period_s)
    count = 0
    with _open_maybe_gz(path, "w") as fh:
        meta = {
            "type": "meta", "format": "pulselabel-dataset", "version": 1,
            "fs": params.fs, "window_s": params.window_s,
            "period_s": params.period_s, "t0_ms": params.t0_ms,
            "days": days, "profiles": [p.to_dict() for p in profiles],
        }
        fh.write(json.dumps(meta) + "\n")
        for step in range(steps):
            for profile in profiles:
                payload = generate_window(profile, step, params)
                at_ms = payload["t_start_ms"] + int(params.window_s * 1000)
                line = {
                    "type": "sample",
                    "at_ms": at_ms,
                    "subject_id": payload["subject_id"],
                    "t_start_ms": payload["t_start_ms"],
                    "fs": payload["fs"],
                    "ppg": encode_array(payload["ppg"]),
                    "acc": encode_array(payload["acc"]),
                    "gyro": encode_array(payload["gyro"]),
                    "grav": encode_array(payload["grav"]),
                    "truth": payload["truth"],
                }
                fh.write(json.dumps(line) + "\n")
                count += 1
    return {"samples": count, "subjects": len(profiles), "steps": steps}


def read_dataset(path):
    """Yield (meta, then sample dicts with arrays decoded) from a dataset file."""
    with _open_maybe_gz(path, "r") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != "pulselabel-dataset":
            raise ConfigError(f"{path} is not a pulselabel dataset")
        yield header
        n = int(round(header["window_s"] * header["fs"]))
        for raw in fh:
            if not raw.strip():
                continue
            rec = json.loads(raw)
            if rec.get("type") != "sample":
                continue
            rec["ppg"] = decode_array(rec["ppg"])
            rec["acc"] = decode_array(rec["acc"], (n, 3))
            rec["gyro"] = decode_array(rec["gyro"], (n, 3))
            rec["grav"] = decode_array(rec["grav"], (n, 3))
            yield rec
