// View controllers: issue requests, guard against stale responses, hand
// rendered HTML back to the page shell.

import { ApiClient, ApiError } from "./api.js";
import {
  renderCauseTable,
  renderErrorBanner,
  renderRecourseComparison,
  renderSolutionTable,
  renderTransportComparison,
} from "./render.js";
import { SessionState } from "./state.js";

export interface ViewResult {
  html: string;
  error: boolean;
  stale?: boolean;
}

function banner(exc: unknown): ViewResult {
  if (exc instanceof ApiError) {
    return { html: renderErrorBanner(exc.code, exc.message), error: true };
  }
  return { html: renderErrorBanner("unexpected", String(exc)), error: true };
}

export async function diagnoseView(
  api: ApiClient,
  state: SessionState,
  text: string,
  topK?: number,
): Promise<ViewResult | null> {
  if (!text.trim()) {
    return null; // submit is disabled for empty input; never issue a request
  }
  const ticket = state.nextSequence("diagnose");
  try {
    const [diagnose, solve] = await Promise.all([
      api.diagnose(text, topK),
      api.solve(text, { topK }),
    ]);
    if (!state.isCurrent("diagnose", ticket)) {
      return { html: "", error: false, stale: true };
    }
    state.observationText = text;
    state.lastDiagnosis = { text, diagnose, solve };
    state.record({ view: "diagnose", request: { text, topK }, response: { diagnose, solve } });
    return {
      html: renderCauseTable(diagnose.causes) + renderSolutionTable(solve.solutions),
      error: false,
    };
  } catch (exc) {
    return banner(exc);
  }
}

export async function recourseView(
  api: ApiClient,
  state: SessionState,
  factual: { z: string; c: string; o_text: string; s_text: string } | { record_id: string },
  altText: string,
  mode: "gumbel_max" | "interventional",
  seed?: number,
): Promise<ViewResult | null> {
  if (!altText.trim() || !state.lastDiagnosis) {
    return null; // needs a prior diagnosis selected as the factual case
  }
  const ticket = state.nextSequence("recourse");
  state.recourseDraft = { altText, mode };
  const request =
    "record_id" in factual
      ? { record_id: factual.record_id, alt_text: altText, mode, seed }
      : { factual, alt_text: altText, mode, seed };
  try {
    const response = await api.recourse(request);
    if (!state.isCurrent("recourse", ticket)) {
      return { html: "", error: false, stale: true };
    }
    state.record({ view: "recourse", request, response });
    return {
      html: renderRecourseComparison(
        response.factual_solution,
        state.lastDiagnosis.solve.solutions,
        response.counterfactual,
      ),
      error: false,
    };
  } catch (exc) {
    return banner(exc);
  }
}

export async function transportView(
  api: ApiClient,
  state: SessionState,
  targetEnv: string,
  topK?: number,
): Promise<ViewResult | null> {
  if (!state.lastDiagnosis) {
    return null;
  }
  const ticket = state.nextSequence("transport");
  state.selectedEnvironment = targetEnv;
  try {
    const response = await api.transport(state.lastDiagnosis.text, targetEnv, topK);
    if (!state.isCurrent("transport", ticket)) {
      return { html: "", error: false, stale: true };
    }
    state.record({
      view: "transport",
      request: { text: state.lastDiagnosis.text, targetEnv, topK },
      response,
    });
    return {
      html: renderTransportComparison(
        state.lastDiagnosis.solve.solutions,
        response.solutions,
        targetEnv,
      ),
      error: false,
    };
  } catch (exc) {
    return banner(exc);
  }
}
