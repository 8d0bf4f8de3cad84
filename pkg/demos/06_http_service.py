"""The live service loop over HTTP: ingest, poll pending queries, answer.

Starts the gateway on a local port, posts two samples (a one-sample initial
phase makes the second one trigger), polls the pending-query endpoint the way
the questionnaire UI does, and submits an answer.
"""
import json
import tempfile
import time
import urllib.request

from pulselabel.config import Config
from pulselabel.gateway import Gateway
from pulselabel.server import BackgroundServer
from pulselabel.simulator import SubjectProfile, generate_window


def post(url, body):
    req = urllib.request.Request(url, data=json.dumps(body).encode(),
                                 headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


def get(url):
    with urllib.request.urlopen(url) as resp:
        return json.loads(resp.read())


def jsonable(payload, shift_ms):
    out = dict(payload)
    out["t_start_ms"] = payload["t_start_ms"] + shift_ms
    out["ppg"] = [float(v) for v in payload["ppg"]]
    for key in ("acc", "gyro", "grav"):
        out[key] = [[float(v) for v in row] for row in payload[key]]
    return out


config = Config(n_initial=1, k_regions=1, quota=100, seed=3, store_raw=False)
gateway = Gateway(tempfile.mkdtemp(prefix="pulselabel-http-"), config=config)
profile = SubjectProfile(subject_id="S01", seed=11, schedule=((0.0, "Sit"),))

with BackgroundServer(gateway) as server:
    base = f"http://127.0.0.1:{server.port}"
    print("health:", get(f"{base}/v1/health"))

    # shift simulated timestamps so expiry math works against the wall clock
    shift = int(time.time() * 1000) - (generate_window(profile, 1)["t_start_ms"]
                                       + 120000)
    for step in (0, 1):
        ack = post(f"{base}/v1/samples",
                   jsonable(generate_window(profile, step), shift))
        print(f"sample {step}: usable={ack['usable']} "
              f"decision={ack['decision']['reason']} "
              f"p={ack['decision']['probability']:.2f}")

    pending = get(f"{base}/v1/subjects/S01/ema/pending")["queries"]
    print(f"\npending queries: {len(pending)}")
    q = pending[0]
    print(f"  ema_id={q['ema_id']}  expires in {q['seconds_remaining']:.0f} s")
    print(f"  stress options:   {q['questions']['stress']}")
    print(f"  emotion options:  {q['questions']['emotion']}")
    print(f"  activity options: {q['questions']['activity']}")

    ack = post(f"{base}/v1/ema/{q['ema_id']}/response",
               {"stress": 1, "emotion": "neutral", "activity": "sitting"})
    print(f"\nresponse ack: status={ack['status']} "
          f"response_time={ack['response_time_s']:.1f} s")
    print("pending after answering:",
          get(f"{base}/v1/subjects/S01/ema/pending")["queries"])
    print("\nanalytics over the API:",
          json.dumps(get(f"{base}/v1/analytics/response")["rate_by_hour"]))
