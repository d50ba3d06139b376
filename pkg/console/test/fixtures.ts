// Fixture service: replays canned rankings so console behavior can be
// checked without a live engine.

import type { ModelMeta } from "../src/api.js";

export const MODEL_META: ModelMeta = {
  schema_version: 1,
  alpha: 0.1,
  seed: 5,
  training_records: 18000,
  fit_timestamp: "",
};

export const CAUSE_RANKING = [
  { label: "Part physically damaged", probability: 0.9012 },
  { label: "Accident", probability: 0.0052 },
  { label: "Incorrect maintenance", probability: 0.0052 },
  { label: "Insufficient lubrication", probability: 0.0052 },
  { label: "Leakage", probability: 0.0052 },
];

export const SOLUTION_RANKING = [
  { category: "274", probability: 0.0565, exemplars: [
    "handover from off coming shift was to torque the hangar bolts",
    "damaged cable removed and replaced with new",
  ] },
  { category: "244", probability: 0.0169, exemplars: [] },
  { category: "52", probability: 0.0146, exemplars: [] },
  { category: "90", probability: 0.0135, exemplars: [] },
  { category: "10", probability: 0.0104, exemplars: [] },
];

export const TRANSPORTED_RANKING = [
  { category: "90", probability: 0.0491, exemplars: [] },
  { category: "274", probability: 0.031, exemplars: [] },
  { category: "52", probability: 0.0208, exemplars: [] },
];

export const POINT_MASS_RECOURSE = {
  counterfactual: [
    { label: "274", probability: 1 },
    { label: "244", probability: 0 },
  ],
  factual_solution: "274",
  factual_cause: "Part physically damaged",
  mode: "gumbel_max",
  samples: 10000,
  seed: 3,
  model_meta: MODEL_META,
};

export const SHIFTED_RECOURSE = {
  counterfactual: [
    { label: "90", probability: 0.6214 },
    { label: "274", probability: 0.2391 },
    { label: "10", probability: 0.1395 },
  ],
  factual_solution: "274",
  factual_cause: "Part physically damaged",
  mode: "gumbel_max",
  samples: 10000,
  seed: 4,
  model_meta: MODEL_META,
};

export interface RecordedCall {
  path: string;
  body: unknown;
}

export function fixtureFetch(
  overrides: Record<string, unknown> = {},
  calls: RecordedCall[] = [],
) {
  return async (input: string, init?: RequestInit): Promise<Response> => {
    const path = input.replace(/^https?:\/\/[^/]+/, "");
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    calls.push({ path, body });
    const canned: Record<string, unknown> = {
      "/v1/model": {
        schema_version: 1,
        domains: { subsystem: 9, cause: 20, observation: 278, solution: 302 },
        environments: ["fleet-north", "fleet-south"],
        meta: MODEL_META,
      },
      "/v1/diagnose": { causes: CAUSE_RANKING, model_meta: MODEL_META },
      "/v1/solve": { solutions: SOLUTION_RANKING, model_meta: MODEL_META },
      "/v1/transport": {
        solutions: TRANSPORTED_RANKING,
        target: body?.target_env ?? "explicit",
        model_meta: MODEL_META,
      },
      "/v1/recourse": POINT_MASS_RECOURSE,
      ...overrides,
    };
    const payload = canned[path];
    if (payload === undefined) {
      return new Response(JSON.stringify({ error: { code: "not_found", message: path } }), {
        status: 404,
      });
    }
    if (payload instanceof Response) {
      return payload;
    }
    return new Response(JSON.stringify(payload), {
      status: 200,
      headers: { "Content-Type": "application/json" },
    });
  };
}
