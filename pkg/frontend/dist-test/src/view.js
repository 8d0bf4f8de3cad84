import { ACTIVITY_LABELS, ACTIVITY_OPTIONS, EMOTION_OPTIONS, STRESS_LABELS, } from "./mappings.js";
function esc(text) {
    return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
        .replace(/"/g, "&quot;");
}
function optionGroup(group, title, options, selected) {
    const buttons = options
        .map(({ value, label }) => {
        const cls = value === selected ? "option selected" : "option";
        return `<button type="button" class="${cls}" data-group="${group}" ` +
            `data-value="${esc(String(value))}">${esc(label)}</button>`;
    })
        .join("");
    return `<fieldset class="group" data-group-box="${group}">` +
        `<legend>${esc(title)}</legend>${buttons}</fieldset>`;
}
function countdown(secondsRemaining) {
    const m = Math.floor(secondsRemaining / 60);
    const s = Math.floor(secondsRemaining % 60);
    return `${m}:${String(s).padStart(2, "0")}`;
}
export function renderQuestionnaire(answers, secondsRemaining, submitting, submitError) {
    const complete = answers.stress !== null && answers.emotion !== null && answers.activity !== null;
    const disabled = !complete || submitting || secondsRemaining <= 0;
    const stress = optionGroup("stress", "How stressed are you right now?", STRESS_LABELS.map((label, value) => ({ value, label })), answers.stress);
    const emotion = optionGroup("emotion", "How do you feel?", EMOTION_OPTIONS.map((value) => ({ value, label: value })), answers.emotion);
    const activity = optionGroup("activity", "What were you doing?", ACTIVITY_OPTIONS.map((value) => ({ value, label: ACTIVITY_LABELS[value] })), answers.activity);
    const error = submitError
        ? `<p class="error">Could not send: ${esc(submitError)} — your answers are kept, try again.</p>`
        : "";
    return `<form class="questionnaire" onsubmit="return false">` +
        `<p class="countdown">Expires in <strong>${countdown(secondsRemaining)}</strong></p>` +
        stress + emotion + activity + error +
        `<button type="button" class="submit" data-action="submit"` +
        `${disabled ? " disabled" : ""}>${submitting ? "Sending..." : "Submit"}</button>` +
        `</form>`;
}
export function renderScreen(screen) {
    switch (screen.kind) {
        case "questionnaire":
            return renderQuestionnaire(screen.answers, screen.secondsRemaining, screen.submitting, screen.submitError);
        case "missed":
            return `<div class="notice missed"><h2>Missed</h2>` +
                `<p>This check-in expired before it was answered.</p>` +
                `<button type="button" data-action="dismiss">OK</button></div>`;
        case "stale":
            return `<div class="notice stale"><h2>Too late</h2>` +
                `<p>The answer arrived after the 16-minute window and will not be ` +
                `used as a label (kept for audit).</p>` +
                `<button type="button" data-action="dismiss">OK</button></div>`;
        case "offline":
            return `<div class="notice offline"><h2>Offline</h2>` +
                `<p>Cannot reach the service; retrying in ` +
                `${Math.round(screen.retryInSeconds)} s ` +
                `(attempt ${screen.consecutiveFailures}).</p></div>`;
        case "idle": {
            const last = screen.lastOutcome
                ? `<p class="summary">Last answer: stress "${esc(screen.lastOutcome.stressLabel)}", ` +
                    `${esc(screen.lastOutcome.emotion)}, ${esc(screen.lastOutcome.activity)} ` +
                    `(${screen.lastOutcome.responseTimeS.toFixed(0)} s after dispatch).</p>`
                : `<p class="summary">No answers yet.</p>`;
            return `<div class="idle"><h2>No check-in waiting</h2>${last}` +
                `<p class="hint">This page checks for new questionnaires every 10 seconds.</p></div>`;
        }
    }
}
