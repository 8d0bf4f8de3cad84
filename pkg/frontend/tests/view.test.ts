import assert from "node:assert/strict";
import { test } from "node:test";

import { renderQuestionnaire, renderScreen } from "../src/view.js";
import type { Screen } from "../src/state.js";

const empty = { stress: null, emotion: null, activity: null };

test("questionnaire renders all three groups with every option", () => {
  const html = renderQuestionnaire(empty, 600, false, null);
  for (const group of ["stress", "emotion", "activity"]) {
    assert.ok(html.includes(`data-group-box="${group}"`), group);
  }
  assert.equal((html.match(/data-group="stress"/g) ?? []).length, 5);
  assert.equal((html.match(/data-group="emotion"/g) ?? []).length, 4);
  assert.equal((html.match(/data-group="activity"/g) ?? []).length, 6);
  assert.ok(html.includes("lying down"));
});

test("submit is disabled until every group is answered", () => {
  const incomplete = renderQuestionnaire(
    { stress: 2, emotion: "sad", activity: null }, 600, false, null);
  assert.match(incomplete, /data-action="submit" disabled/);
  const complete = renderQuestionnaire(
    { stress: 2, emotion: "sad", activity: "sitting" }, 600, false, null);
  assert.doesNotMatch(complete, /data-action="submit" disabled/);
});

test("submit is disabled while sending and after expiry", () => {
  const full = { stress: 0, emotion: "happy", activity: "other" };
  assert.match(renderQuestionnaire(full, 600, true, null), /disabled/);
  assert.match(renderQuestionnaire(full, 0, false, null), /disabled/);
});

test("countdown formats minutes and seconds", () => {
  const html = renderQuestionnaire(empty, 754, false, null);
  assert.ok(html.includes("12:34"));
});

test("selected options are highlighted", () => {
  const html = renderQuestionnaire(
    { stress: 1, emotion: null, activity: null }, 600, false, null);
  assert.match(html, /class="option selected" data-group="stress" data-value="1"/);
});

test("missed, stale, offline, and idle screens are distinct", () => {
  const missed: Screen = { kind: "missed", emaId: "e" };
  assert.match(renderScreen(missed), /Missed/);
  const stale: Screen = {
    kind: "stale", emaId: "e",
    outcome: { emaId: "e", status: "stale", stressLabel: "some",
               emotion: "sad", activity: "sitting", responseTimeS: 1000 },
  };
  assert.match(renderScreen(stale), /Too late/);
  const offline: Screen = { kind: "offline", retryInSeconds: 20,
                            consecutiveFailures: 2 };
  assert.match(renderScreen(offline), /Offline/);
  const idle: Screen = { kind: "idle", lastOutcome: null };
  assert.match(renderScreen(idle), /No check-in waiting/);
});

test("submit errors render with the kept-answers hint", () => {
  const html = renderQuestionnaire(
    { stress: 4, emotion: "mad", activity: "jogging" }, 300, false,
    "Error: network down");
  assert.match(html, /your answers are kept/);
});

test("idle shows the last response summary", () => {
  const idle: Screen = {
    kind: "idle",
    lastOutcome: { emaId: "e", status: "accepted", stressLabel: "a lot",
                   emotion: "neutral", activity: "walking", responseTimeS: 73 },
  };
  const html = renderScreen(idle);
  assert.match(html, /a lot/);
  assert.match(html, /73 s after dispatch/);
});
