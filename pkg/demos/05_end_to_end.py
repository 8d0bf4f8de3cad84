"""Full loop at small scale: simulate subjects, replay through the gateway,
and print each analytics report.

Equivalent to:
    pulselabel simulate --subjects 2 --days 1 --out sim.jsonl
    pulselabel replay --input sim.jsonl --data-dir data
    pulselabel report coverage|temporal|quality|response --data-dir data
"""
import tempfile
from pathlib import Path

from pulselabel.analytics import (
    coverage_curve,
    quality_by_activity,
    response_stats,
    temporal_profile,
)
from pulselabel.config import Config
from pulselabel.gateway import Gateway
from pulselabel.simulator import SubjectProfile, write_dataset

root = Path(tempfile.mkdtemp(prefix="pulselabel-demo-"))
profiles = [SubjectProfile(subject_id=f"S{i + 1:02d}", seed=300 + 50 * i)
            for i in range(2)]
dataset = root / "sim.jsonl"
info = write_dataset(profiles, days=1.5, path=dataset)
print(f"dataset: {info['samples']} samples, 2 subjects, 1.5 days -> {dataset}")

config = Config(n_initial=40, k_regions=6, quota=12, seed=7)
gateway = Gateway(root / "data", config=config)
report = gateway.replay(dataset)
print(f"replay:  {report['ingested']} ingested, {report['triggers']} triggers "
      f"({report['suppressed']} suppressed), {report['labels']} labels, "
      f"{report['stale']} stale")

subject = gateway.subjects()[0]
data = gateway.subject_data(subject)

curve = coverage_curve(data, D=config.coverage_d)
print(f"\ncoverage for {subject} (D = {config.coverage_d}):")
for i, f in curve[:: max(len(curve) // 6, 1)]:
    print(f"  after label {i:3d}: F = {f:.3f}")

profiles_t = temporal_profile(data, group_by="none")
if profiles_t:
    p = profiles_t[0]
    print(f"\ntemporal profile (gap -> mean standardized distance):")
    for gap, dist in zip(p.gap_min[:6], p.mean_distance[:6]):
        print(f"  {gap:4d} min: {dist:.3f}")

rows = quality_by_activity([gateway.subject_data(s) for s in gateway.subjects()])
print("\nquality medians by predicted activity:")
for r in rows:
    if r["index"] == "skewness_var":
        print(f"  {r['activity']:>7s}: skewness_var median {r['median']:.3f} "
              f"({r['count']} windows)")

stats = response_stats([gateway.subject_data(s) for s in gateway.subjects()])
print("\nresponse rate by hour of day:")
for hour, entry in stats.rate_by_hour.items():
    bar = "#" * int(entry["rate"] * 30)
    print(f"  {hour:02d}h {entry['rate']:.2f} {bar}")
