// Page shell: binds the views to the DOM. Configuration is the single
// base-URL field (empty string means same origin).

import { ApiClient } from "./api.js";
import { renderAdvisory, renderEnvironmentOptions, renderErrorBanner } from "./render.js";
import { SessionState } from "./state.js";
import { diagnoseView, recourseView, transportView } from "./views.js";

const state = new SessionState();
let api = new ApiClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function show(id: string, result: { html: string; stale?: boolean } | null): void {
  if (result && !result.stale) {
    el(id).innerHTML = result.html;
  }
}

async function loadModelInfo(): Promise<void> {
  try {
    const info = await api.getModel();
    el<HTMLSelectElement>("environment").innerHTML = renderEnvironmentOptions(
      info.environments,
    );
    el("model-meta").textContent =
      `model v${info.schema_version} | ` +
      Object.entries(info.domains)
        .map(([name, size]) => `${name}: ${size}`)
        .join(" | ");
  } catch (exc) {
    el("model-meta").innerHTML = renderErrorBanner("model_unavailable", String(exc));
  }
}

function observationText(): string {
  return el<HTMLTextAreaElement>("observation").value;
}

function syncSubmitEnabled(): void {
  el<HTMLButtonElement>("submit").disabled = !observationText().trim();
}

async function onDiagnose(): Promise<void> {
  const result = await diagnoseView(api, state, observationText());
  show("results", result);
  el("advisory").innerHTML = "";
  el<HTMLButtonElement>("generate").disabled = !state.lastDiagnosis;
  el<HTMLButtonElement>("transport-apply").disabled = !state.lastDiagnosis;
  el<HTMLButtonElement>("whatif-apply").disabled = !state.lastDiagnosis;
}

async function onGenerate(): Promise<void> {
  if (!state.lastDiagnosis) return;
  try {
    const solve = await api.solve(state.lastDiagnosis.text, { generate: true });
    if (solve.advisory) {
      el("advisory").innerHTML = renderAdvisory(
        solve.advisory.options,
        solve.advisory.provenance,
      );
    }
  } catch (exc) {
    el("advisory").innerHTML = renderErrorBanner("generation_failed", String(exc));
  }
}

async function onTransport(): Promise<void> {
  const env = el<HTMLSelectElement>("environment").value;
  const result = await transportView(api, state, env);
  show("transport-results", result);
}

async function onRecourse(): Promise<void> {
  if (!state.lastDiagnosis) return;
  const altText = el<HTMLTextAreaElement>("alt-text").value;
  const mode = el<HTMLSelectElement>("mode").value as "gumbel_max" | "interventional";
  const recordId = el<HTMLInputElement>("record-id").value.trim();
  const factual = recordId ? { record_id: recordId } : null;
  if (!factual) {
    el("whatif-results").innerHTML = renderErrorBanner(
      "missing_factual",
      "enter the record id of the incident to explore",
    );
    return;
  }
  const result = await recourseView(api, state, factual, altText, mode);
  show("whatif-results", result);
}

function install(): void {
  api = new ApiClient(el<HTMLInputElement>("base-url").value.trim());
  void loadModelInfo();
  el<HTMLTextAreaElement>("observation").addEventListener("input", syncSubmitEnabled);
  el<HTMLButtonElement>("submit").addEventListener("click", () => void onDiagnose());
  el<HTMLButtonElement>("generate").addEventListener("click", () => void onGenerate());
  el<HTMLButtonElement>("transport-apply").addEventListener("click", () => void onTransport());
  el<HTMLButtonElement>("whatif-apply").addEventListener("click", () => void onRecourse());
  el<HTMLInputElement>("base-url").addEventListener("change", () => {
    api = new ApiClient(el<HTMLInputElement>("base-url").value.trim());
    void loadModelInfo();
  });
  syncSubmitEnabled();
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", install);
}
