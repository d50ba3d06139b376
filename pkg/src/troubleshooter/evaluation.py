"""Synthetic ground-truth models, classification metrics and causal fidelity."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, RoxRecord
from .errors import ConfigurationError
from .inference import intervene_solution_category, rca, transport_solution_category
from .model import CAUSE, OBSERVATION, SOLUTION, SUBSYSTEM, CbnModel, build_model

_COUNT_SCALE = 10**7


@dataclass(frozen=True)
class GroundTruthSpec:
    """Recipe for a random true model with controllable difficulty.

    obs_noise spreads the cause-to-observation mapping (the diagnosis
    difficulty dial); confounding couples the subsystem into the cause and
    solution tables; text_noise corrupts rendered pseudo-texts.
    """

    z_size: int = 3
    c_size: int = 4
    o_size: int = 4
    s_size: int = 5
    concentration: float = 5.0
    confounding: float = 0.5
    obs_noise: float = 0.1
    text_noise: float = 0.0
    n_environments: int = 1
    seed: int = 0

    def __post_init__(self):
        if min(self.z_size, self.c_size, self.o_size, self.s_size) < 1:
            raise ConfigurationError("domain sizes must be >= 1")
        if self.concentration <= 0:
            raise ConfigurationError("concentration must be > 0")


def _counts_from_probs(probs: np.ndarray) -> dict[int, int]:
    scaled = np.round(probs * _COUNT_SCALE).astype(int)
    return {j: int(c) for j, c in enumerate(scaled) if c > 0}


def build_true_model(spec: GroundTruthSpec) -> CbnModel:
    """Draw a ground-truth model from the recipe, deterministically by seed."""
    rng = np.random.default_rng(spec.seed)
    dirichlet = lambda size: rng.dirichlet(np.full(size, spec.concentration))

    env_marginals = [dirichlet(spec.z_size) for _ in range(spec.n_environments)]
    pz = np.mean(env_marginals, axis=0)

    base_cause = dirichlet(spec.c_size)
    cause_rows = {
        (z,): (1.0 - spec.confounding) * base_cause + spec.confounding * dirichlet(spec.c_size)
        for z in range(spec.z_size)
    }

    uniform_obs = np.full(spec.o_size, 1.0 / spec.o_size)
    obs_rows = {}
    for c in range(spec.c_size):
        signature = np.zeros(spec.o_size)
        signature[c % spec.o_size] = 1.0
        row = (1.0 - spec.obs_noise) * signature + spec.obs_noise * uniform_obs
        for z in range(spec.z_size):
            obs_rows[(c, z)] = row

    z_pull = [dirichlet(spec.s_size) for _ in range(spec.z_size)]
    sol_rows = {}
    for c in range(spec.c_size):
        for o in range(spec.o_size):
            base = dirichlet(spec.s_size)
            for z in range(spec.z_size):
                sol_rows[(c, z, o)] = (
                    (1.0 - spec.confounding) * base + spec.confounding * z_pull[z]
                )

    domains = {
        SUBSYSTEM: tuple(f"subsys{z:02d}" for z in range(spec.z_size)),
        CAUSE: tuple(f"cause{c:02d}" for c in range(spec.c_size)),
        OBSERVATION: tuple(str(o) for o in range(spec.o_size)),
        SOLUTION: tuple(str(s) for s in range(spec.s_size)),
    }
    counts = {
        SUBSYSTEM: {(): _counts_from_probs(pz)},
        CAUSE: {ctx: _counts_from_probs(row) for ctx, row in cause_rows.items()},
        OBSERVATION: {ctx: _counts_from_probs(row) for ctx, row in obs_rows.items()},
        SOLUTION: {ctx: _counts_from_probs(row) for ctx, row in sol_rows.items()},
    }
    env_z_counts = {
        f"env{e}": _counts_from_probs(marginal) for e, marginal in enumerate(env_marginals)
    }
    return build_model(domains, counts, alpha=1e-3, env_z_counts=env_z_counts,
                       meta={"seed": spec.seed, "synthetic": True})


@dataclass(frozen=True)
class Assignment:
    environment: str
    z: int
    c: int
    o: int
    s: int


def sample_assignments(model: CbnModel, n: int, seed: int) -> list[Assignment]:
    """Ancestral sampling from the model, one environment pick per record."""
    if n < 1:
        raise ConfigurationError(f"need n >= 1, got {n}")
    rng = np.random.default_rng(seed)
    environments = model.environments() or ["env0"]
    env_cdf = {
        env: np.cumsum(
            model.env_subsystem_marginal(env) if model.env_z_counts else model.subsystem_marginal()
        )
        for env in environments
    }
    cdf_cache: dict[tuple, np.ndarray] = {}

    def pick(cdf: np.ndarray) -> int:
        # clip guards the draw > cdf[-1] float-drift corner
        return min(int(np.searchsorted(cdf, rng.random(), side="right")), cdf.size - 1)

    def draw(variable: str, ctx: tuple[int, ...]) -> int:
        key = (variable, ctx)
        cdf = cdf_cache.get(key)
        if cdf is None:
            cdf = np.cumsum(model.cpts[variable].row(ctx))
            cdf_cache[key] = cdf
        return pick(cdf)

    out = []
    for _ in range(n):
        env = environments[int(rng.integers(len(environments)))]
        z = pick(env_cdf[env])
        c = draw(CAUSE, (z,))
        o = draw(OBSERVATION, (c, z))
        s = draw(SOLUTION, (c, z, o))
        out.append(Assignment(environment=env, z=z, c=c, o=o, s=s))
    return out


def render_pseudo_text(prefix: str, category: int, n_categories: int,
                       noise_p: float, rng: np.random.Generator) -> str:
    """Two keyword tokens encoding the category; one may be swapped as noise."""
    first, second = f"{prefix}{category}kw1", f"{prefix}{category}kw2"
    if noise_p > 0 and n_categories > 1 and rng.random() < noise_p:
        other = int(rng.integers(n_categories - 1))
        other = other + 1 if other >= category else other
        second = f"{prefix}{other}kw2"
    return f"{first} {second}"


def generate_synthetic(spec: GroundTruthSpec, n: int) -> tuple[Corpus, CbnModel]:
    """Sample a corpus of pseudo-text records plus the model that produced it."""
    true_model = build_true_model(spec)
    assignments = sample_assignments(true_model, n, seed=spec.seed + 1)
    text_rng = np.random.default_rng(spec.seed + 2)
    records = []
    for i, a in enumerate(assignments):
        records.append(
            RoxRecord(
                record_id=str(i),
                environment=a.environment,
                subsystem=true_model.domains[SUBSYSTEM].labels[a.z],
                root_cause=true_model.domains[CAUSE].labels[a.c],
                observation=render_pseudo_text("obs", a.o, spec.o_size, spec.text_noise, text_rng),
                solution=render_pseudo_text("sol", a.s, spec.s_size, spec.text_noise, text_rng),
            )
        )
    corpus = Corpus(records=records, provenance={"source": "synthetic", "seed": spec.seed})
    return corpus, true_model


def fit_categorical(
    assignments: list[Assignment],
    domains: dict[str, tuple[str, ...]],
    alpha: float = 0.1,
) -> CbnModel:
    """Fit CPT counts straight from category tuples (no text pipeline).

    Keeps the fitted model on the true model's label space so causal
    fidelity is well-defined.
    """
    counts: dict[str, dict[tuple[int, ...], dict[int, int]]] = {
        SUBSYSTEM: {}, CAUSE: {}, OBSERVATION: {}, SOLUTION: {},
    }
    env_z_counts: dict[str, dict[int, int]] = {}
    for a in assignments:
        for variable, ctx, value in (
            (SUBSYSTEM, (), a.z),
            (CAUSE, (a.z,), a.c),
            (OBSERVATION, (a.c, a.z), a.o),
            (SOLUTION, (a.c, a.z, a.o), a.s),
        ):
            row = counts[variable].setdefault(ctx, {})
            row[value] = row.get(value, 0) + 1
        env_row = env_z_counts.setdefault(a.environment, {})
        env_row[a.z] = env_row.get(a.z, 0) + 1
    return build_model(domains, counts, alpha=alpha, env_z_counts=env_z_counts)


@dataclass
class MetricsReport:
    """Top-1 diagnosis quality; precision/recall are macro-averaged over
    cause labels with nonzero support."""

    accuracy: float
    macro_precision: float
    macro_recall: float
    per_class: list[tuple[str, float, float, int]] = field(default_factory=list)
    n_test: int = 0
    averaging: str = "macro"

    def as_dict(self) -> dict:
        return {
            "averaging": self.averaging,
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "n_test": self.n_test,
            "per_class": [
                {"label": label, "precision": p, "recall": r, "support": s}
                for label, p, r, s in self.per_class
            ],
        }


def evaluate_rca(model: CbnModel, test: Corpus) -> MetricsReport:
    """Score top-1 root cause prediction against recorded causes."""
    if not test.records:
        raise ConfigurationError("test corpus is empty")
    support: dict[str, int] = {}
    true_positive: dict[str, int] = {}
    predicted: dict[str, int] = {}
    correct = 0
    for record in test.records:
        prediction = rca(model, record.observation, top_k=1).top[0]
        support[record.root_cause] = support.get(record.root_cause, 0) + 1
        predicted[prediction] = predicted.get(prediction, 0) + 1
        if prediction == record.root_cause:
            correct += 1
            true_positive[prediction] = true_positive.get(prediction, 0) + 1

    per_class = []
    for label in sorted(support):
        tp = true_positive.get(label, 0)
        n_predicted = predicted.get(label, 0)
        precision = tp / n_predicted if n_predicted else 0.0
        recall = tp / support[label]
        per_class.append((label, precision, recall, support[label]))
    n = len(test.records)
    return MetricsReport(
        accuracy=correct / n,
        macro_precision=float(np.mean([p for _, p, _, _ in per_class])),
        macro_recall=float(np.mean([r for _, _, r, _ in per_class])),
        per_class=per_class,
        n_test=n,
    )


def bayes_rca_accuracy(true_model: CbnModel) -> float:
    """Best achievable top-1 diagnosis accuracy under the true model."""
    n_z = true_model.domains[SUBSYSTEM].size
    n_c = true_model.domains[CAUSE].size
    n_o = true_model.domains[OBSERVATION].size
    pz = true_model.subsystem_marginal()
    joint_co = np.zeros((n_c, n_o))
    for z in range(n_z):
        for c in range(n_c):
            joint_co[c] += pz[z] * true_model.cpts[CAUSE].prob((z,), c) * true_model.cpts[
                OBSERVATION
            ].row((c, z))
    return float(joint_co.max(axis=0).sum())


@dataclass
class CausalFidelityReport:
    mean_tv_intervention: float
    per_observation: list[float]
    mean_tv_transport: float | None = None

    def as_dict(self) -> dict:
        return {
            "mean_tv_intervention": self.mean_tv_intervention,
            "mean_tv_transport": self.mean_tv_transport,
            "per_observation": self.per_observation,
        }


def _total_variation(p: dict[str, float], q: dict[str, float]) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def evaluate_causal_fidelity(
    model: CbnModel, true_model: CbnModel, transport_env: str | None = None
) -> CausalFidelityReport:
    """Distance between estimated and true interventional distributions."""
    for variable in (SUBSYSTEM, CAUSE, OBSERVATION, SOLUTION):
        if model.domains[variable].labels != true_model.domains[variable].labels:
            raise ConfigurationError(f"domain mismatch on {variable!r}")
    distances = []
    for o in range(model.domains[OBSERVATION].size):
        estimated = intervene_solution_category(model, o, top_k=model.domains[SOLUTION].size)
        truth = intervene_solution_category(true_model, o, top_k=true_model.domains[SOLUTION].size)
        distances.append(_total_variation(estimated.as_dict(), truth.as_dict()))
    mean_transport = None
    if transport_env is not None:
        transport_distances = []
        for o in range(model.domains[OBSERVATION].size):
            estimated = transport_solution_category(
                model, transport_env, o, top_k=model.domains[SOLUTION].size
            )
            truth = transport_solution_category(
                true_model, transport_env, o, top_k=true_model.domains[SOLUTION].size
            )
            transport_distances.append(_total_variation(estimated.as_dict(), truth.as_dict()))
        mean_transport = float(np.mean(transport_distances))
    return CausalFidelityReport(
        mean_tv_intervention=float(np.mean(distances)),
        per_observation=distances,
        mean_tv_transport=mean_transport,
    )


def random_model(seed: int, z_size: int, c_size: int, o_size: int, s_size: int,
                 alpha: float = 0.1) -> CbnModel:
    """Small arbitrary-count model; some contexts are left unseen on purpose
    so backoff paths get exercised."""
    rng = np.random.default_rng(seed)

    def random_row(size: int) -> dict[int, int]:
        row = rng.integers(0, 50, size)
        return {j: int(c) for j, c in enumerate(row) if c > 0}

    counts = {
        SUBSYSTEM: {(): {j: int(c) for j, c in enumerate(rng.integers(1, 50, z_size))}},
        CAUSE: {(z,): random_row(c_size) for z in range(z_size)},
        OBSERVATION: {
            (c, z): random_row(o_size)
            for c in range(c_size)
            for z in range(z_size)
            if rng.random() > 0.2
        },
        SOLUTION: {
            (c, z, o): random_row(s_size)
            for c in range(c_size)
            for z in range(z_size)
            for o in range(o_size)
            if rng.random() > 0.3
        },
    }
    for variable in counts:
        counts[variable] = {ctx: row for ctx, row in counts[variable].items() if row}
    domains = {
        SUBSYSTEM: tuple(f"subsys{z:02d}" for z in range(z_size)),
        CAUSE: tuple(f"cause{c:02d}" for c in range(c_size)),
        OBSERVATION: tuple(str(o) for o in range(o_size)),
        SOLUTION: tuple(str(s) for s in range(s_size)),
    }
    env_z_counts = {
        "envA": {j: int(c) for j, c in enumerate(rng.integers(1, 30, z_size))},
        "envB": {j: int(c) for j, c in enumerate(rng.integers(1, 30, z_size))},
    }
    return build_model(domains, counts, alpha=alpha, env_z_counts=env_z_counts,
                       meta={"seed": seed, "synthetic": True})
