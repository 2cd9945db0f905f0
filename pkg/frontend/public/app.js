// DOM wiring for the rater workflow. State lives in ReviewSession; this file
// only reflects it into the page.
import { fetchProgress, fetchReport } from "./api.js";
import { kappaLines, reportRows } from "./report.js";
import { ReviewSession } from "./review.js";
const BASE = "";
function el(id) {
    const node = document.getElementById(id);
    if (!node) {
        throw new Error(`missing element #${id}`);
    }
    return node;
}
let session = null;
function show(id, visible) {
    el(id).style.display = visible ? "" : "none";
}
async function refreshProgress(rater) {
    const progress = await fetchProgress(BASE, rater);
    el("progress").textContent = `${progress.done} / ${progress.total} reviewed`;
}
function renderState() {
    if (!session) {
        return;
    }
    const state = session.state;
    show("card-section", state.phase === "rating" || state.phase === "submitting");
    show("done-section", state.phase === "done");
    el("submit-error").textContent =
        state.phase === "rating" && state.error ? state.error : "";
    if (state.phase === "rating" || state.phase === "submitting") {
        el("sentence").textContent = state.card.sentence;
        el("gloss").textContent = state.card.gloss.join("  ");
    }
    const submit = el("submit");
    submit.disabled = state.phase !== "rating" || !session.canSubmit();
}
function clearChoices() {
    document.querySelectorAll("input[name=understandable], input[name=quality]")
        .forEach((input) => { input.checked = false; });
}
async function start() {
    const rater = el("rater").value.trim();
    if (!rater) {
        el("login-error").textContent = "enter a rater id first";
        return;
    }
    session = new ReviewSession(BASE, rater);
    show("login-section", false);
    el("who").textContent = `rater: ${rater}`;
    await session.advance();
    clearChoices();
    await refreshProgress(rater);
    renderState();
}
async function submit() {
    if (!session) {
        return;
    }
    renderState(); // disables the button while submitting
    const before = session.state;
    await session.submit();
    if (session.state !== before && session.state.phase !== "rating") {
        clearChoices();
    }
    else if (session.state.phase === "rating" && !session.state.error) {
        clearChoices();
    }
    const rater = el("rater").value.trim();
    await refreshProgress(rater);
    renderState();
}
async function loadReport() {
    const result = await fetchReport(BASE);
    const table = el("report-table");
    const empty = el("report-empty");
    table.innerHTML = "";
    if (result.kind === "unavailable") {
        empty.textContent =
            `Report not ready: ${result.message} ` +
                "(both raters must finish the same sample set).";
        show("report-empty", true);
        show("report-table", false);
        show("kappa-lines", false);
        return;
    }
    show("report-empty", false);
    show("report-table", true);
    show("kappa-lines", true);
    const report = result.report;
    const head = table.insertRow();
    for (const text of ["Metric", report.rater_ids[0], report.rater_ids[1], "Combined"]) {
        const cell = document.createElement("th");
        cell.textContent = text;
        head.appendChild(cell);
    }
    for (const row of reportRows(report)) {
        const tr = table.insertRow();
        tr.insertCell().textContent = row.label;
        for (const value of row.values) {
            tr.insertCell().textContent = value;
        }
    }
    el("kappa-lines").innerHTML = "";
    for (const line of kappaLines(report)) {
        const div = document.createElement("div");
        div.textContent = line;
        el("kappa-lines").appendChild(div);
    }
}
export function install() {
    el("start").addEventListener("click", () => { void start(); });
    el("submit").addEventListener("click", () => { void submit(); });
    el("load-report").addEventListener("click", () => { void loadReport(); });
    document.querySelectorAll("input[name=understandable]").forEach((input) => {
        input.addEventListener("change", () => {
            session?.setUnderstandable(input.value === "yes");
            renderState();
        });
    });
    document.querySelectorAll("input[name=quality]").forEach((input) => {
        input.addEventListener("change", () => {
            session?.setQuality(Number(input.value));
            renderState();
        });
    });
}
if (typeof document !== "undefined" && document.getElementById("start")) {
    install();
}
