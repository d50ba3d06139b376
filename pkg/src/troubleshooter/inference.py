"""Probabilistic and causal queries over a fitted model.

Three query rungs: plain conditioning (diagnosis), interventional adjustment
over the subsystem/cause confounders (solution prediction, optionally
transported to another fleet's subsystem mix), and per-incident
counterfactuals under a Gumbel-argmax mechanism for the solution variable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, OracleRefusedError
from .model import CAUSE, OBSERVATION, SOLUTION, SUBSYSTEM, VARIABLES, CbnModel

Evidence = dict[str, str]


@dataclass(frozen=True)
class RankedDistribution:
    """Probability ranking over one variable's domain.

    Entries are sorted by descending probability, ties broken by domain
    index. `total` tracks the full (untruncated) mass and stays ~1 even
    after truncate().
    """

    variable: str
    entries: tuple[tuple[str, float], ...]
    total: float

    def truncate(self, top_k: int) -> "RankedDistribution":
        if top_k < 1:
            raise ConfigurationError(f"top_k must be >= 1, got {top_k}")
        return RankedDistribution(self.variable, self.entries[:top_k], self.total)

    def probability(self, label: str) -> float:
        for entry_label, p in self.entries:
            if entry_label == label:
                return p
        return 0.0

    @property
    def top(self) -> tuple[str, float]:
        return self.entries[0]

    def as_dict(self) -> dict[str, float]:
        return dict(self.entries)


@dataclass(frozen=True)
class NoiseModel:
    """Counterfactual noise handling for the solution mechanism."""

    mode: str = "gumbel_max"
    samples: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("interventional", "gumbel_max"):
            raise ConfigurationError(f"unknown recourse mode {self.mode!r}")
        if self.mode == "gumbel_max" and self.samples < 1000:
            raise ConfigurationError("gumbel_max needs at least 1000 samples")


def _ranked(model: CbnModel, variable: str, probs: np.ndarray) -> RankedDistribution:
    labels = model.domains[variable].labels
    order = sorted(range(len(labels)), key=lambda i: (-probs[i], i))
    entries = tuple((labels[i], float(probs[i])) for i in order)
    return RankedDistribution(variable=variable, entries=entries, total=float(probs.sum()))


def _validate_evidence(model: CbnModel, evidence: Evidence) -> dict[str, int]:
    fixed = {}
    for variable, label in evidence.items():
        if variable not in VARIABLES:
            raise ConfigurationError(f"unknown variable {variable!r} in evidence")
        fixed[variable] = model.index_of(variable, label)
    return fixed


def conditional(model: CbnModel, query_var: str, evidence: Evidence) -> RankedDistribution:
    """Exact conditional by enumeration: P(query | evidence).

    The solution factor is summed out analytically when neither queried nor
    observed, so diagnosis queries never touch the largest table.
    """
    if query_var not in VARIABLES:
        raise ConfigurationError(f"unknown query variable {query_var!r}")
    if query_var in evidence:
        raise ConfigurationError(f"query variable {query_var!r} is already in evidence")
    fixed = _validate_evidence(model, evidence)

    skip_solution = SOLUTION not in fixed and query_var != SOLUTION
    free_vars = [
        v
        for v in VARIABLES
        if v != query_var and v not in fixed and not (v == SOLUTION and skip_solution)
    ]
    domain = model.domains[query_var]
    weights = np.zeros(domain.size, dtype=np.float64)
    ranges = [range(model.domains[v].size) for v in free_vars]
    for q in range(domain.size):
        assignment = dict(fixed)
        assignment[query_var] = q
        acc = 0.0
        for combo in itertools.product(*ranges):
            assignment.update(zip(free_vars, combo))
            z = assignment[SUBSYSTEM]
            c = assignment[CAUSE]
            o = assignment[OBSERVATION]
            term = (
                model.cpts[SUBSYSTEM].prob((), z)
                * model.cpts[CAUSE].prob((z,), c)
                * model.cpts[OBSERVATION].prob((c, z), o)
            )
            if not skip_solution:
                term *= model.cpts[SOLUTION].prob((c, z, o), assignment[SOLUTION])
            acc += term
        weights[q] = acc
    total = weights.sum()
    return _ranked(model, query_var, weights / total)


def rca(
    model: CbnModel,
    observation_text: str,
    top_k: int = 5,
    subsystem: str | None = None,
) -> RankedDistribution:
    """Rank root causes for a raw failure description.

    The optional subsystem is extra evidence for deployments that know it;
    otherwise the subsystem is marginalized out.
    """
    o = model.assign_observation(observation_text)
    return rca_category(model, o, top_k, subsystem)


def rca_category(
    model: CbnModel,
    observation_category: int,
    top_k: int = 5,
    subsystem: str | None = None,
) -> RankedDistribution:
    evidence: Evidence = {OBSERVATION: model.domains[OBSERVATION].labels[observation_category]}
    if subsystem is not None:
        evidence[SUBSYSTEM] = subsystem
    return conditional(model, CAUSE, evidence).truncate(top_k)


def _adjusted_solution(model: CbnModel, o: int, pz: np.ndarray) -> np.ndarray:
    """Sum of P(z) P(c|z) P(solution|c,z,o) over subsystems and causes."""
    n_z = model.domains[SUBSYSTEM].size
    n_c = model.domains[CAUSE].size
    acc = np.zeros(model.domains[SOLUTION].size, dtype=np.float64)
    for z in range(n_z):
        for c in range(n_c):
            weight = pz[z] * model.cpts[CAUSE].prob((z,), c)
            acc += weight * model.cpts[SOLUTION].row((c, z, o))
    return acc / acc.sum()


def intervene_solution(model: CbnModel, observation_text: str, top_k: int = 5) -> RankedDistribution:
    """Deconfounded solution ranking: the observation is set, not filtered.

    Adjusts over the subsystem and cause so their spurious association with
    the wording of the observation cannot bias the prediction.
    """
    o = model.assign_observation(observation_text)
    return intervene_solution_category(model, o, top_k)


def intervene_solution_category(model: CbnModel, observation_category: int, top_k: int = 5) -> RankedDistribution:
    probs = _adjusted_solution(model, observation_category, model.subsystem_marginal())
    return _ranked(model, SOLUTION, probs).truncate(top_k)


def _target_marginal(model: CbnModel, target) -> np.ndarray:
    if isinstance(target, str):
        return model.env_subsystem_marginal(target)
    domain = model.domains[SUBSYSTEM]
    probs = np.zeros(domain.size, dtype=np.float64)
    for label, p in dict(target).items():
        probs[domain.index(label)] = float(p)
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-6:
        raise ConfigurationError(
            "explicit subsystem distribution must be non-negative and sum to 1 +/- 1e-6"
        )
    return probs


def transport_solution(
    model: CbnModel,
    target,
    observation_text: str,
    top_k: int = 5,
) -> RankedDistribution:
    """Solution ranking re-weighted for another fleet's subsystem mix.

    `target` is either an environment label known to the model or an
    explicit {subsystem label: probability} distribution.
    """
    o = model.assign_observation(observation_text)
    return transport_solution_category(model, target, o, top_k)


def transport_solution_category(
    model: CbnModel, target, observation_category: int, top_k: int = 5
) -> RankedDistribution:
    pz = _target_marginal(model, target)
    probs = _adjusted_solution(model, observation_category, pz)
    return _ranked(model, SOLUTION, probs).truncate(top_k)


def _posterior_gumbel_noise(
    log_p: np.ndarray, observed: int, n_samples: int, rng: np.random.Generator
) -> np.ndarray:
    """Sample the solution mechanism's exogenous noise given its outcome.

    The mechanism is argmax_j(log p_j + g_j) with iid standard Gumbel g.
    Conditioned on the argmax being `observed`, the perturbed maximum is
    Gumbel(0) (the row is normalized) and every other perturbed logit is a
    Gumbel truncated below it. Returns the implied g matrix (samples x k).
    """
    max_val = -np.log(-np.log(rng.random(n_samples)))
    # each competitor's perturbed logit is Gumbel(log p_j) truncated below the max
    exp_draws = rng.exponential(size=(n_samples, log_p.size))
    values = log_p[None, :] - np.log(np.exp(log_p[None, :] - max_val[:, None]) + exp_draws)
    values[:, observed] = max_val
    return values - log_p[None, :]


def recourse(
    model: CbnModel,
    factual: Evidence,
    alpha_text: str,
    noise: NoiseModel = NoiseModel(),
    top_k: int | None = None,
) -> RankedDistribution:
    """What-if solution distribution for one fully recorded incident.

    The factual evidence must assign all four variables. The alternative
    problem description replaces the recorded observation; everything else
    about the incident (subsystem, cause, and in gumbel_max mode the
    abduced solution noise) is held fixed.
    """
    alpha_category = model.assign_observation(alpha_text)
    return recourse_category(model, factual, alpha_category, noise, top_k)


def recourse_category(
    model: CbnModel,
    factual: Evidence,
    alpha_category: int,
    noise: NoiseModel = NoiseModel(),
    top_k: int | None = None,
) -> RankedDistribution:
    missing = [v for v in VARIABLES if v not in factual]
    if missing:
        raise ConfigurationError(f"factual evidence must assign all variables; missing {missing}")
    fixed = _validate_evidence(model, factual)
    z, c, o_f, s_f = fixed[SUBSYSTEM], fixed[CAUSE], fixed[OBSERVATION], fixed[SOLUTION]

    if noise.mode == "interventional":
        # vacuous abduction: just the mechanism row under the new description
        probs = model.cpts[SOLUTION].row((c, z, alpha_category))
    else:
        factual_row = model.cpts[SOLUTION].row((c, z, o_f))
        counterfactual_row = model.cpts[SOLUTION].row((c, z, alpha_category))
        rng = np.random.default_rng(noise.seed)
        g = _posterior_gumbel_noise(np.log(factual_row), s_f, noise.samples, rng)
        outcomes = np.argmax(np.log(counterfactual_row)[None, :] + g, axis=1)
        tallies = np.bincount(outcomes, minlength=model.domains[SOLUTION].size)
        probs = tallies.astype(np.float64) / noise.samples

    ranked = _ranked(model, SOLUTION, probs)
    return ranked.truncate(top_k) if top_k else ranked


def enumerate_interventional_oracle(model: CbnModel, observation_category: int) -> dict[str, float]:
    """Brute-force truncated factorization of the observation intervention.

    Scalar enumeration over the mutilated graph (edges into the observation
    removed); test oracle only, refuses to run on large models.
    """
    n_z = model.domains[SUBSYSTEM].size
    n_c = model.domains[CAUSE].size
    n_s = model.domains[SOLUTION].size
    if n_z * n_c * n_s > 10**6:
        raise OracleRefusedError("oracle limited to 1e6 subsystem*cause*solution cells")
    out = {label: 0.0 for label in model.domains[SOLUTION].labels}
    for z in range(n_z):
        for c in range(n_c):
            for s in range(n_s):
                p = (
                    model.cpts[SUBSYSTEM].prob((), z)
                    * model.cpts[CAUSE].prob((z,), c)
                    * model.cpts[SOLUTION].prob((c, z, observation_category), s)
                )
                out[model.domains[SOLUTION].labels[s]] += p
    return out
