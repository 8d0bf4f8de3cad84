/**
 * Browser bootstrap: wires the session to the DOM.
 *
 * Configuration comes from query parameters: ?service=<base url>&subject=<id>
 * (defaults: same origin, subject S01). Pending queries are polled every
 * 10 seconds (with backoff while offline); the countdown ticks every second.
 */
import { HttpApiClient } from "./api.js";
import { Session } from "./state.js";
import { renderScreen } from "./view.js";
function config() {
    const params = new URLSearchParams(window.location.search);
    return {
        serviceUrl: params.get("service") ?? window.location.origin,
        subjectId: params.get("subject") ?? "S01",
    };
}
export function start(root) {
    const { serviceUrl, subjectId } = config();
    const session = new Session(new HttpApiClient(serviceUrl), subjectId);
    const header = `<header><h1>Check-in</h1>` +
        `<p class="who">subject ${subjectId} · ${serviceUrl}</p></header>`;
    const render = () => {
        root.innerHTML = header + renderScreen(session.screen);
    };
    root.addEventListener("click", (event) => {
        const target = event.target;
        const group = target.getAttribute("data-group");
        const value = target.getAttribute("data-value");
        if (group && value !== null) {
            session.setAnswer(group, group === "stress" ? Number(value) : value);
            render();
            return;
        }
        const action = target.getAttribute("data-action");
        if (action === "submit") {
            void session.submit().then(render);
            render(); // shows the "Sending..." state now
        }
        else if (action === "dismiss") {
            session.dismiss();
            render();
        }
    });
    let pollTimer;
    const schedulePoll = () => {
        pollTimer = window.setTimeout(async () => {
            await session.pollOnce();
            render();
            schedulePoll();
        }, session.pollDelayS() * 1000);
    };
    void session.pollOnce().then(() => {
        render();
        schedulePoll();
    });
    window.setInterval(() => {
        session.tick();
        render();
    }, 1000);
    window.addEventListener("beforeunload", () => window.clearTimeout(pollTimer));
}
if (typeof document !== "undefined") {
    const root = document.getElementById("app");
    if (root) {
        start(root);
    }
}
