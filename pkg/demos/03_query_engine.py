"""The adaptive labeling loop: initial phase, density-proportional triggers,
and the coverage metric falling as labels accumulate.

Feeds a stream of real (simulated, processed) feature vectors through a
per-subject engine, registering a label for every trigger, and prints the
coverage after each batch of labels.
"""
from pulselabel import PpgWindow, QualityTooLow, process_window
from pulselabel.engine import QueryEngine
from pulselabel.simulator import SubjectProfile, generate_window

print("processing 600 windows (one week of one subject)...")
profile = SubjectProfile(subject_id="demo", seed=202, schedule=((0.0, "Sit"),))
vectors = []
for step in range(600):
    payload = generate_window(profile, step)
    window = PpgWindow("demo", payload["t_start_ms"], payload["fs"],
                       payload["ppg"])
    try:
        vectors.append(process_window(window).to_array())
    except QualityTooLow:
        pass

engine = QueryEngine("demo", n_initial=100, k_regions=10, quota=15,
                     p_floor=0.1, seed=9)
labels = 0
milestones = {1, 5, 10, 20, 40, 60}
print("\n  sample  phase    p     decision        labels  coverage(D=1.5)")
for i, v in enumerate(vectors):
    decision = engine.observe(v, sample_id=f"s{i:04d}")
    if decision.trigger:
        engine.register_label(f"s{i:04d}", f"e{i:04d}", {"stress": 2}, 0, 0)
        labels += 1
        if labels in milestones:
            cov = engine.coverage(D=1.5)
            print(f"  {i:6d}  {engine.phase:7s} {decision.probability:5.2f} "
                  f"{decision.reason:15s} {labels:5d}   {cov:.4f}")

print(f"\nfinal: {labels} labels, coverage {engine.coverage(D=1.5):.4f}")
print("region sample counts:", engine.region_counts.tolist())
print("region label counts: ", engine.region_label_counts.tolist())
print("(quota-filled regions stop triggering; sparse ones keep the 0.1 floor)")
