/**
 * Questionnaire session state machine.
 *
 * Pure with respect to time and IO: the clock and the API client are
 * injected, so every transition is unit-testable. At most one questionnaire
 * is ever active (mirroring the service's one-open-query invariant); an
 * expired questionnaire flips to a "missed" notice locally, a stale
 * acknowledgment to a distinct "stale" notice.
 */
import type { Ack, ApiClient, PendingQuery } from "./api.js";
import { stressLabelOf } from "./mappings.js";

export interface Answers {
  stress: number | null;
  emotion: string | null;
  activity: string | null;
}

export interface Outcome {
  emaId: string;
  status: Ack["status"];
  stressLabel: string;
  emotion: string;
  activity: string;
  responseTimeS: number;
}

export type Screen =
  | { kind: "idle"; lastOutcome: Outcome | null }
  | {
      kind: "questionnaire";
      query: PendingQuery;
      answers: Answers;
      secondsRemaining: number;
      submitting: boolean;
      submitError: string | null;
    }
  | { kind: "missed"; emaId: string }
  | { kind: "stale"; emaId: string; outcome: Outcome }
  | { kind: "offline"; retryInSeconds: number; consecutiveFailures: number };

const POLL_INTERVAL_S = 10;
const BACKOFF_CAP_S = 60;

export class Session {
  screen: Screen = { kind: "idle", lastOutcome: null };
  private lastOutcome: Outcome | null = null;
  private answered = new Set<string>();
  private failures = 0;
  private inFlight: Promise<Ack> | null = null;
  private firstRenderedAtMs: number | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly subjectId: string,
    private readonly now: () => number = () => Date.now(),
  ) {}

  /** Seconds until the next poll; grows with consecutive network failures. */
  pollDelayS(): number {
    if (this.failures === 0) {
      return POLL_INTERVAL_S;
    }
    return Math.min(POLL_INTERVAL_S * 2 ** (this.failures - 1), BACKOFF_CAP_S);
  }

  async pollOnce(): Promise<Screen> {
    let queries: PendingQuery[];
    try {
      queries = await this.api.pending(this.subjectId);
    } catch {
      this.failures += 1;
      this.screen = {
        kind: "offline",
        retryInSeconds: this.pollDelayS(),
        consecutiveFailures: this.failures,
      };
      return this.screen;
    }
    this.failures = 0;
    const open = queries.find((q) => !this.answered.has(q.ema_id));
    if (!open) {
      // a missed or stale notice stays on screen until a new query arrives
      if (this.screen.kind !== "missed" && this.screen.kind !== "stale") {
        this.screen = { kind: "idle", lastOutcome: this.lastOutcome };
      }
      return this.screen;
    }
    if (
      this.screen.kind === "questionnaire" &&
      this.screen.query.ema_id === open.ema_id
    ) {
      // same query: refresh the countdown, keep the answers
      this.screen.secondsRemaining = this.remainingS(open);
    } else {
      this.screen = {
        kind: "questionnaire",
        query: open,
        answers: { stress: null, emotion: null, activity: null },
        secondsRemaining: this.remainingS(open),
        submitting: false,
        submitError: null,
      };
      this.firstRenderedAtMs = this.now();
    }
    return this.screen;
  }

  private remainingS(query: PendingQuery): number {
    return Math.max((query.expires_at_ms - this.now()) / 1000, 0);
  }

  /** Advance the countdown; flips to "missed" once the query expires. */
  tick(): Screen {
    if (this.screen.kind !== "questionnaire") {
      return this.screen;
    }
    const remaining = this.remainingS(this.screen.query);
    if (remaining <= 0 && !this.screen.submitting) {
      this.screen = { kind: "missed", emaId: this.screen.query.ema_id };
    } else {
      this.screen.secondsRemaining = remaining;
    }
    return this.screen;
  }

  setAnswer(group: keyof Answers, value: number | string): Screen {
    if (this.screen.kind !== "questionnaire") {
      return this.screen;
    }
    if (group === "stress") {
      this.screen.answers.stress = Number(value);
    } else {
      this.screen.answers[group] = String(value);
    }
    return this.screen;
  }

  canSubmit(): boolean {
    if (this.screen.kind !== "questionnaire" || this.screen.submitting) {
      return false;
    }
    const a = this.screen.answers;
    return a.stress !== null && a.emotion !== null && a.activity !== null;
  }

  /**
   * Post the answers. A second call while one is in flight awaits the same
   * acknowledgment (no double submission); a network failure keeps the
   * answers so the user can retry.
   */
  async submit(): Promise<Screen> {
    if (this.inFlight) {
      try {
        await this.inFlight;
      } catch {
        // the originating call surfaces the error on the questionnaire
      }
      return this.screen;
    }
    if (this.screen.kind !== "questionnaire" || !this.canSubmit()) {
      return this.screen;
    }
    const screen = this.screen;
    const { query, answers } = screen;
    screen.submitting = true;
    screen.submitError = null;
    const body = {
      stress: answers.stress as number,
      emotion: answers.emotion as string,
      activity: answers.activity as string,
      responded_at_ms: this.now(),
      render_to_submit_s: this.firstRenderedAtMs === null
        ? undefined
        : (this.now() - this.firstRenderedAtMs) / 1000,
    };
    this.inFlight = this.api.submit(query.ema_id, body);
    let ack: Ack;
    try {
      ack = await this.inFlight;
    } catch (err) {
      this.inFlight = null;
      if (this.screen === screen) {
        screen.submitting = false;
        screen.submitError = String(err);
      }
      return this.screen;
    }
    this.inFlight = null;
    this.answered.add(query.ema_id);
    const outcome: Outcome = {
      emaId: query.ema_id,
      status: ack.status,
      stressLabel: stressLabelOf(answers.stress as number),
      emotion: answers.emotion as string,
      activity: answers.activity as string,
      responseTimeS: ack.response_time_s,
    };
    if (ack.status === "stale") {
      this.screen = { kind: "stale", emaId: query.ema_id, outcome };
    } else {
      this.lastOutcome = outcome;
      this.screen = { kind: "idle", lastOutcome: outcome };
    }
    return this.screen;
  }

  /** Clear a missed/stale notice back to the idle screen. */
  dismiss(): Screen {
    if (this.screen.kind === "missed" || this.screen.kind === "stale") {
      this.screen = { kind: "idle", lastOutcome: this.lastOutcome };
    }
    return this.screen;
  }
}
