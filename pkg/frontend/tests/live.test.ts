/**
 * End-to-end against the real service: spawn the Python gateway, seed it
 * with synthetic samples over HTTP (a one-sample initial phase and a single
 * region make every later sample trigger), then drive the session exactly
 * like the browser would.
 */
import assert from "node:assert/strict";
import { after, before, test } from "node:test";
import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { HttpApiClient } from "../src/api.js";
import { Session } from "../src/state.js";
import { renderScreen } from "../src/view.js";
import { stressLabelOf } from "../src/mappings.js";

const SUBJECT = "S01";
let service: ChildProcess | null = null;
let base = "";
let sampleCounter = 0;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address && typeof address === "object") {
        const port = address.port;
        probe.close(() => resolve(port));
      } else {
        reject(new Error("no port assigned"));
      }
    });
  });
}

/** 60 bpm Gaussian pulse train: clean enough for the full feature chain. */
function syntheticPayload(tStartMs: number) {
  const fs = 20;
  const n = 2400;
  const ppg = new Array<number>(n).fill(0);
  for (let beat = 0.3; beat < 119.5; beat += 1.0) {
    const center = Math.round(beat * fs);
    for (let i = Math.max(center - 8, 0); i < Math.min(center + 9, n); i++) {
      const tau = i / fs - beat;
      ppg[i]! += Math.exp(-0.5 * (tau / 0.09) ** 2);
    }
  }
  const zeros3 = Array.from({ length: n }, () => [0, 0, 0]);
  return {
    subject_id: SUBJECT,
    t_start_ms: tStartMs,
    fs,
    ppg,
    acc: zeros3,
    gyro: zeros3,
    grav: zeros3,
  };
}

async function postSample(): Promise<{ sample_id: string; decision: { trigger: boolean } }> {
  // distinct ids, each window "ending" right about now so expiry math works
  sampleCounter += 1;
  const payload = syntheticPayload(Date.now() - 120_000 + sampleCounter);
  const resp = await fetch(`${base}/v1/samples`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  });
  assert.equal(resp.status, 200);
  return (await resp.json()) as { sample_id: string; decision: { trigger: boolean } };
}

before(async () => {
  const dir = mkdtempSync(join(tmpdir(), "pulselabel-ui-"));
  const configPath = join(dir, "config.json");
  writeFileSync(configPath, JSON.stringify({
    N_initial: 1, K_regions: 1, quota: 100, seed: 3, store_raw: false,
  }));
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  service = spawn("python3", [
    "-m", "pulselabel.cli", "--config", configPath, "serve",
    "--data-dir", join(dir, "data"), "--port", String(port),
  ], { stdio: ["ignore", "pipe", "pipe"] });
  const deadline = Date.now() + 15_000;
  for (;;) {
    try {
      const resp = await fetch(`${base}/v1/health`);
      if (resp.ok) {
        break;
      }
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      throw new Error("service did not come up within 15 s");
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  const first = await postSample();   // fills the 1-sample initial phase
  assert.equal(first.decision.trigger, false);
}, { timeout: 30_000 });

after(() => {
  service?.kill("SIGINT");
});

test("live loop: questionnaire renders, answer registers as a label", async () => {
  const trigger = await postSample();
  assert.equal(trigger.decision.trigger, true);

  const session = new Session(new HttpApiClient(base), SUBJECT);
  const screen = await session.pollOnce();
  assert.equal(screen.kind, "questionnaire");

  const html = renderScreen(screen);
  for (const group of ["stress", "emotion", "activity"]) {
    assert.ok(html.includes(`data-group-box="${group}"`), `renders ${group}`);
  }
  assert.equal((html.match(/data-group="stress"/g) ?? []).length, 5);

  session.setAnswer("stress", 2);
  session.setAnswer("emotion", "neutral");
  session.setAnswer("activity", "sitting");
  const done = await session.submit();
  assert.equal(done.kind, "idle");
  if (done.kind === "idle") {
    assert.equal(done.lastOutcome?.status, "accepted");
  }

  // a registered label is exactly what makes the coverage report exist
  const resp = await fetch(`${base}/v1/analytics/coverage?subject=${SUBJECT}`);
  assert.equal(resp.status, 200);
  const coverage = (await resp.json()) as { curve: unknown[] };
  assert.ok(coverage.curve.length >= 1);

  // the query is closed: polling again goes idle, not back to the form
  const again = await session.pollOnce();
  assert.equal(again.kind, "idle");
});

test("post-expiry submission surfaces the stale notice", async () => {
  const trigger = await postSample();
  assert.equal(trigger.decision.trigger, true);

  // a clock skewed 17 minutes ahead: the answer lands after expiry
  const lateClock = () => Date.now() + 17 * 60 * 1000;
  const session = new Session(new HttpApiClient(base), SUBJECT, lateClock);
  const screen = await session.pollOnce();
  assert.equal(screen.kind, "questionnaire");
  session.setAnswer("stress", 1);
  session.setAnswer("emotion", "sad");
  session.setAnswer("activity", "lying_down");
  const done = await session.submit();
  assert.equal(done.kind, "stale");
  assert.match(renderScreen(done), /Too late/);
});

test("ordinal stress values 0..4 round-trip through the API", async () => {
  for (let level = 0; level <= 4; level++) {
    const trigger = await postSample();
    assert.equal(trigger.decision.trigger, true);
    const session = new Session(new HttpApiClient(base), SUBJECT);
    const screen = await session.pollOnce();
    assert.equal(screen.kind, "questionnaire");
    if (screen.kind !== "questionnaire") {
      continue;
    }
    // the questionnaire's displayed label maps back to the same wire value
    const wireValue = screen.query.questions.stress.indexOf(stressLabelOf(level));
    assert.equal(wireValue, level);
    session.setAnswer("stress", level);
    session.setAnswer("emotion", "happy");
    session.setAnswer("activity", "other");
    const emaId = screen.query.ema_id;
    await session.submit();
    const resp = await fetch(`${base}/v1/ema/${emaId}/response`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ stress: level, emotion: "happy", activity: "other" }),
    });
    // idempotent second submission returns the first acknowledgment
    const ack = (await resp.json()) as { stress: number; status: string };
    assert.equal(ack.stress, level);
    assert.equal(ack.status, "accepted");
  }
});
