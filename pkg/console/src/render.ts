// Pure HTML renderers. Probabilities are printed verbatim from the response
// values: no rounding, padding or renormalization happens client-side.

import type { RankedEntry, SolutionEntry } from "./api.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function formatProbability(p: number): string {
  return String(p);
}

function barWidth(p: number): string {
  const clamped = Math.max(0, Math.min(1, p));
  return `${(clamped * 100).toFixed(1)}%`;
}

function rankedRow(label: string, probability: number): string {
  return (
    `<tr><td class="label">${escapeHtml(label)}</td>` +
    `<td class="prob">${formatProbability(probability)}</td>` +
    `<td class="bar"><div class="fill" style="width:${barWidth(probability)}"></div></td></tr>`
  );
}

export function renderCauseTable(causes: RankedEntry[]): string {
  const rows = causes.map((c) => rankedRow(c.label, c.probability)).join("");
  return (
    `<table class="ranking causes">` +
    `<thead><tr><th>Potential Root Cause</th><th>Probability</th><th></th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

export function renderSolutionTable(solutions: SolutionEntry[]): string {
  const rows = solutions
    .map((s) => {
      const exemplars = s.exemplars.length
        ? `<details><summary>${s.exemplars.length} similar past fixes</summary><ul>` +
          s.exemplars.map((t) => `<li>${escapeHtml(t)}</li>`).join("") +
          `</ul></details>`
        : "";
      return (
        `<tr><td class="label">${escapeHtml(s.category)}${exemplars}</td>` +
        `<td class="prob">${formatProbability(s.probability)}</td>` +
        `<td class="bar"><div class="fill" style="width:${barWidth(s.probability)}"></div></td></tr>`
      );
    })
    .join("");
  return (
    `<table class="ranking solutions">` +
    `<thead><tr><th>Potential Solution</th><th>Probability</th><th></th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

export function renderRecourseComparison(
  factualSolution: string,
  factualRanking: SolutionEntry[],
  counterfactual: RankedEntry[],
): string {
  const pointMass =
    counterfactual.length > 0 &&
    counterfactual[0].probability === 1 &&
    counterfactual[0].label === factualSolution;
  const note = pointMass
    ? `<p class="point-mass">Unchanged description: the counterfactual keeps the ` +
      `recorded solution (category ${escapeHtml(factualSolution)}) with probability 1.</p>`
    : "";
  const factualRows = factualRanking
    .map((s) => rankedRow(s.category, s.probability))
    .join("");
  const cfRows = counterfactual.map((e) => rankedRow(e.label, e.probability)).join("");
  return (
    `<div class="comparison">${note}` +
    `<div class="side"><h3>Factual ranking</h3><table class="ranking"><tbody>${factualRows}</tbody></table></div>` +
    `<div class="side"><h3>What-if ranking</h3><table class="ranking"><tbody>${cfRows}</tbody></table></div>` +
    `</div>`
  );
}

export function renderTransportComparison(
  baseline: SolutionEntry[],
  transported: SolutionEntry[],
  targetEnv: string,
): string {
  const topChanged =
    baseline.length > 0 &&
    transported.length > 0 &&
    baseline[0].category !== transported[0].category;
  const badge = topChanged
    ? `<span class="delta-badge">top solution changed: ` +
      `${escapeHtml(baseline[0].category)} &rarr; ${escapeHtml(transported[0].category)}</span>`
    : `<span class="same-badge">same leading solution</span>`;
  const baseRows = baseline.map((s) => rankedRow(s.category, s.probability)).join("");
  const movedRows = transported.map((s) => rankedRow(s.category, s.probability)).join("");
  return (
    `<div class="comparison">${badge}` +
    `<div class="side"><h3>This fleet</h3><table class="ranking"><tbody>${baseRows}</tbody></table></div>` +
    `<div class="side"><h3>${escapeHtml(targetEnv)}</h3><table class="ranking"><tbody>${movedRows}</tbody></table></div>` +
    `</div>`
  );
}

export function renderAdvisory(options: string[], provenance: string): string {
  if (!options.length) {
    return `<p class="advisory-empty">No structured options in the generated advisory.</p>`;
  }
  const items = options.map((o) => `<li>${escapeHtml(o)}</li>`).join("");
  return `<div class="advisory"><h3>Generated advisory (${escapeHtml(provenance)})</h3><ol>${items}</ol></div>`;
}

export function renderErrorBanner(code: string, message: string): string {
  return `<div class="banner error" data-code="${escapeHtml(code)}">${escapeHtml(message)}</div>`;
}

export function renderEnvironmentOptions(environments: string[]): string {
  return environments
    .map((env) => `<option value="${escapeHtml(env)}">${escapeHtml(env)}</option>`)
    .join("");
}
