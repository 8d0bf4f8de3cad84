/** Typed client for the gateway's questionnaire endpoints. */

export interface PendingQuery {
  ema_id: string;
  subject_id: string;
  sample_id: string;
  dispatched_at_ms: number;
  expires_at_ms: number;
  seconds_remaining: number;
  questions: {
    stress: string[];
    emotion: string[];
    activity: string[];
  };
}

export interface ResponseBody {
  stress: number;
  emotion: string;
  activity: string;
  responded_at_ms: number;
  /** seconds from first questionnaire render to submit; stored for future
   * display-lag analysis, unused by the analytics */
  render_to_submit_s?: number;
}

export interface Ack {
  ema_id: string;
  status: "accepted" | "stale" | "duplicate";
  response_time_s: number;
}

export interface ApiClient {
  pending(subjectId: string): Promise<PendingQuery[]>;
  submit(emaId: string, body: ResponseBody): Promise<Ack>;
}

export class HttpApiClient implements ApiClient {
  constructor(private readonly baseUrl: string,
              private readonly fetchFn: typeof fetch = fetch) {}

  async pending(subjectId: string): Promise<PendingQuery[]> {
    const url = `${this.baseUrl}/v1/subjects/${encodeURIComponent(subjectId)}/ema/pending`;
    const resp = await this.fetchFn(url);
    if (!resp.ok) {
      throw new Error(`pending query poll failed: HTTP ${resp.status}`);
    }
    const data = (await resp.json()) as { queries: PendingQuery[] };
    return data.queries;
  }

  async submit(emaId: string, body: ResponseBody): Promise<Ack> {
    const url = `${this.baseUrl}/v1/ema/${encodeURIComponent(emaId)}/response`;
    const resp = await this.fetchFn(url, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) {
      const detail = await resp.text();
      throw new Error(`submit failed: HTTP ${resp.status} ${detail}`);
    }
    return (await resp.json()) as Ack;
  }
}
