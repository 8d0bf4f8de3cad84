/** Typed client for the gateway's questionnaire endpoints. */
export class HttpApiClient {
    baseUrl;
    fetchFn;
    constructor(baseUrl, fetchFn = fetch) {
        this.baseUrl = baseUrl;
        this.fetchFn = fetchFn;
    }
    async pending(subjectId) {
        const url = `${this.baseUrl}/v1/subjects/${encodeURIComponent(subjectId)}/ema/pending`;
        const resp = await this.fetchFn(url);
        if (!resp.ok) {
            throw new Error(`pending query poll failed: HTTP ${resp.status}`);
        }
        const data = (await resp.json());
        return data.queries;
    }
    async submit(emaId, body) {
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
        return (await resp.json());
    }
}
