import assert from "node:assert/strict";
import { test } from "node:test";

import type { Ack, ApiClient, PendingQuery, ResponseBody } from "../src/api.js";
import { Session } from "../src/state.js";

function queryAt(nowMs: number, emaId = "ema-1", lifeMs = 960_000): PendingQuery {
  return {
    ema_id: emaId,
    subject_id: "S01",
    sample_id: "smp-1",
    dispatched_at_ms: nowMs,
    expires_at_ms: nowMs + lifeMs,
    seconds_remaining: lifeMs / 1000,
    questions: {
      stress: ["not at all", "a little bit", "some", "a lot", "extremely"],
      emotion: ["sad", "mad", "neutral", "happy"],
      activity: ["sitting", "standing", "walking", "jogging", "lying_down", "other"],
    },
  };
}

class FakeApi implements ApiClient {
  queries: PendingQuery[] = [];
  failPending = false;
  ackStatus: Ack["status"] = "accepted";
  failSubmit = false;
  submitCalls: { emaId: string; body: ResponseBody }[] = [];
  submitDelay: Promise<void> | null = null;

  async pending(): Promise<PendingQuery[]> {
    if (this.failPending) {
      throw new Error("connection refused");
    }
    return this.queries;
  }

  async submit(emaId: string, body: ResponseBody): Promise<Ack> {
    this.submitCalls.push({ emaId, body });
    if (this.submitDelay) {
      await this.submitDelay;
    }
    if (this.failSubmit) {
      throw new Error("network drop");
    }
    return { ema_id: emaId, status: this.ackStatus, response_time_s: 42.0 };
  }
}

function makeSession(startMs = 1_000_000) {
  const api = new FakeApi();
  let now = startMs;
  const clock = { advance: (ms: number) => (now += ms) };
  const session = new Session(api, "S01", () => now);
  return { api, session, clock, startMs };
}

function answerAll(session: Session) {
  session.setAnswer("stress", 2);
  session.setAnswer("emotion", "neutral");
  session.setAnswer("activity", "sitting");
}

test("idle when nothing is pending", async () => {
  const { session } = makeSession();
  const screen = await session.pollOnce();
  assert.equal(screen.kind, "idle");
});

test("pending query becomes the questionnaire with a countdown", async () => {
  const { api, session, startMs } = makeSession();
  api.queries = [queryAt(startMs)];
  const screen = await session.pollOnce();
  assert.equal(screen.kind, "questionnaire");
  if (screen.kind === "questionnaire") {
    assert.equal(screen.query.ema_id, "ema-1");
    assert.ok(Math.abs(screen.secondsRemaining - 960) < 1);
  }
});

test("network failure shows offline and backs off, then recovers", async () => {
  const { api, session } = makeSession();
  api.failPending = true;
  let screen = await session.pollOnce();
  assert.equal(screen.kind, "offline");
  assert.equal(session.pollDelayS(), 10);
  await session.pollOnce();
  assert.equal(session.pollDelayS(), 20);
  await session.pollOnce();
  assert.equal(session.pollDelayS(), 40);
  await session.pollOnce();
  assert.equal(session.pollDelayS(), 60); // capped
  api.failPending = false;
  screen = await session.pollOnce();
  assert.equal(screen.kind, "idle");
  assert.equal(session.pollDelayS(), 10);
});

test("submit stays disabled until all three groups are answered", async () => {
  const { api, session, startMs } = makeSession();
  api.queries = [queryAt(startMs)];
  await session.pollOnce();
  assert.equal(session.canSubmit(), false);
  session.setAnswer("stress", 3);
  assert.equal(session.canSubmit(), false);
  session.setAnswer("emotion", "happy");
  assert.equal(session.canSubmit(), false);
  session.setAnswer("activity", "walking");
  assert.equal(session.canSubmit(), true);
});

test("successful submit posts the ordinal value and returns to idle", async () => {
  const { api, session, clock, startMs } = makeSession();
  api.queries = [queryAt(startMs)];
  await session.pollOnce();
  session.setAnswer("stress", 2);
  session.setAnswer("emotion", "neutral");
  session.setAnswer("activity", "lying_down");
  clock.advance(5_000);
  const screen = await session.submit();
  assert.equal(screen.kind, "idle");
  if (screen.kind === "idle") {
    assert.equal(screen.lastOutcome?.status, "accepted");
    assert.equal(screen.lastOutcome?.stressLabel, "some");
  }
  assert.equal(api.submitCalls.length, 1);
  const body = api.submitCalls[0]!.body;
  assert.equal(body.stress, 2);
  assert.equal(body.activity, "lying_down");
  assert.equal(body.responded_at_ms, startMs + 5_000);
  assert.ok((body.render_to_submit_s ?? 0) >= 4.9);
});

test("double-tap produces a single submission", async () => {
  const { api, session, startMs } = makeSession();
  api.queries = [queryAt(startMs)];
  await session.pollOnce();
  answerAll(session);
  let release!: () => void;
  api.submitDelay = new Promise((resolve) => (release = resolve));
  const first = session.submit();
  const second = session.submit();
  release();
  const [a, b] = await Promise.all([first, second]);
  assert.equal(api.submitCalls.length, 1);
  assert.equal(a.kind, "idle");
  assert.equal(b.kind, "idle");
});

test("network drop mid-submit keeps the answers for retry", async () => {
  const { api, session, startMs } = makeSession();
  api.queries = [queryAt(startMs)];
  await session.pollOnce();
  answerAll(session);
  api.failSubmit = true;
  let screen = await session.submit();
  assert.equal(screen.kind, "questionnaire");
  if (screen.kind === "questionnaire") {
    assert.match(screen.submitError ?? "", /network drop/);
    assert.equal(screen.answers.stress, 2);
  }
  api.failSubmit = false;
  screen = await session.submit();
  assert.equal(screen.kind, "idle");
  assert.equal(api.submitCalls.length, 2);
});

test("stale acknowledgment shows the distinct stale notice", async () => {
  const { api, session, startMs } = makeSession();
  api.queries = [queryAt(startMs)];
  api.ackStatus = "stale";
  await session.pollOnce();
  answerAll(session);
  const screen = await session.submit();
  assert.equal(screen.kind, "stale");
});

test("expiry while open flips to missed and stays until dismissed", async () => {
  const { api, session, clock, startMs } = makeSession();
  api.queries = [queryAt(startMs, "ema-x", 30_000)];
  await session.pollOnce();
  clock.advance(31_000);
  let screen = session.tick();
  assert.equal(screen.kind, "missed");
  api.queries = [];
  screen = await session.pollOnce();
  assert.equal(screen.kind, "missed"); // notice persists through empty polls
  screen = session.dismiss();
  assert.equal(screen.kind, "idle");
});

test("re-polling the same query keeps answers and refreshes the countdown", async () => {
  const { api, session, clock, startMs } = makeSession();
  api.queries = [queryAt(startMs)];
  await session.pollOnce();
  session.setAnswer("stress", 4);
  clock.advance(60_000);
  const screen = await session.pollOnce();
  assert.equal(screen.kind, "questionnaire");
  if (screen.kind === "questionnaire") {
    assert.equal(screen.answers.stress, 4);
    assert.ok(Math.abs(screen.secondsRemaining - 900) < 1);
  }
});

test("an answered query never reopens even if a poll races", async () => {
  const { api, session, startMs } = makeSession();
  api.queries = [queryAt(startMs)];
  await session.pollOnce();
  answerAll(session);
  await session.submit();
  const screen = await session.pollOnce(); // server would have closed it too
  assert.equal(screen.kind, "idle");
});

test("at most one questionnaire is active even with several pending", async () => {
  const { api, session, startMs } = makeSession();
  api.queries = [queryAt(startMs, "ema-a"), queryAt(startMs, "ema-b")];
  const screen = await session.pollOnce();
  assert.equal(screen.kind, "questionnaire");
  if (screen.kind === "questionnaire") {
    assert.equal(screen.query.ema_id, "ema-a");
  }
});
