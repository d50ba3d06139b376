"""The fixed four-variable causal network over maintenance records.

Subsystem confounds everything; cause drives observation and solution;
observation also drives solution:

    subsystem -> cause, observation, solution
    cause     -> observation, solution
    observation -> solution

Conditionals are additive-smoothed sparse count tables; unseen solution
contexts back off to coarser parent subsets before falling back to uniform.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, TextCleaner
from .errors import ConfigurationError, ModelFormatError, UnknownLabelError
from .quantizer import Quantizer

SCHEMA_VERSION = 1

SUBSYSTEM = "subsystem"
CAUSE = "cause"
OBSERVATION = "observation"
SOLUTION = "solution"
VARIABLES = (SUBSYSTEM, CAUSE, OBSERVATION, SOLUTION)

# parent lists fix the DAG; order matters for CPT context tuples
PARENTS: dict[str, tuple[str, ...]] = {
    SUBSYSTEM: (),
    CAUSE: (SUBSYSTEM,),
    OBSERVATION: (CAUSE, SUBSYSTEM),
    SOLUTION: (CAUSE, SUBSYSTEM, OBSERVATION),
}

# coarser parent subsets tried, in order, for unseen solution contexts
DEFAULT_BACKOFF: dict[str, tuple[tuple[str, ...], ...]] = {
    SUBSYSTEM: (),
    CAUSE: (),
    OBSERVATION: ((SUBSYSTEM,),),
    SOLUTION: ((CAUSE, SUBSYSTEM), (SUBSYSTEM,)),
}


@dataclass(frozen=True, eq=False)
class CategoricalDomain:
    """Ordered label set for one variable; index() is a bijection."""

    name: str
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels) or not self.labels:
            raise ConfigurationError(f"domain {self.name}: labels must be distinct and non-empty")
        object.__setattr__(self, "_index", {label: i for i, label in enumerate(self.labels)})

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise UnknownLabelError(self.name, label, list(self.labels)) from None

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CategoricalDomain)
            and self.name == other.name
            and self.labels == other.labels
        )

    def __hash__(self):
        return hash((self.name, self.labels))


class SparseCpt:
    """Additive-smoothed conditional probability table over sparse counts.

    Probability of child value j in context t is (count + alpha) /
    (total + alpha * child_size), computed at the finest backoff level
    whose context was observed; an exhausted backoff chain yields the
    uniform distribution (the same formula with all-zero counts).
    """

    def __init__(
        self,
        child: str,
        parents: tuple[str, ...],
        child_size: int,
        parent_sizes: tuple[int, ...],
        alpha: float,
        counts: dict[tuple[int, ...], dict[int, int]],
        backoff: tuple[tuple[str, ...], ...] = (),
    ):
        if alpha <= 0:
            raise ConfigurationError(f"alpha must be > 0, got {alpha}")
        self.child = child
        self.parents = parents
        self.child_size = child_size
        self.parent_sizes = parent_sizes
        self.alpha = alpha
        # empty rows would shadow the backoff chain
        self.counts = {ctx: row for ctx, row in counts.items() if row}
        self.backoff = backoff
        self._totals = {ctx: sum(row.values()) for ctx, row in counts.items()}
        self._levels = []
        for subset in backoff:
            positions = tuple(parents.index(p) for p in subset)
            agg: dict[tuple[int, ...], dict[int, int]] = {}
            for ctx, row in counts.items():
                sub = tuple(ctx[pos] for pos in positions)
                bucket = agg.setdefault(sub, {})
                for j, c in row.items():
                    bucket[j] = bucket.get(j, 0) + c
            totals = {ctx: sum(row.values()) for ctx, row in agg.items()}
            self._levels.append((positions, agg, totals))

    def _resolve(self, context: tuple[int, ...]) -> tuple[dict[int, int], int]:
        row = self.counts.get(context)
        if row is not None:
            return row, self._totals[context]
        for positions, agg, totals in self._levels:
            sub = tuple(context[pos] for pos in positions)
            row = agg.get(sub)
            if row is not None:
                return row, totals[sub]
        return {}, 0

    def prob(self, context: tuple[int, ...], child_idx: int) -> float:
        row, total = self._resolve(context)
        denom = total + self.alpha * self.child_size
        return (row.get(child_idx, 0) + self.alpha) / denom

    def row(self, context: tuple[int, ...]) -> np.ndarray:
        counts_row, total = self._resolve(context)
        out = np.full(self.child_size, self.alpha, dtype=np.float64)
        for j, c in counts_row.items():
            out[j] += c
        out /= total + self.alpha * self.child_size
        return out

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SparseCpt)
            and self.child == other.child
            and self.parents == other.parents
            and self.child_size == other.child_size
            and self.parent_sizes == other.parent_sizes
            and self.alpha == other.alpha
            and self.counts == other.counts
            and self.backoff == other.backoff
        )

    def to_dict(self) -> dict:
        entries = []
        for ctx in sorted(self.counts):
            row = self.counts[ctx]
            entries.append([list(ctx), [[j, row[j]] for j in sorted(row)]])
        return {
            "child": self.child,
            "parents": list(self.parents),
            "child_size": self.child_size,
            "parent_sizes": list(self.parent_sizes),
            "alpha": self.alpha,
            "backoff": [list(s) for s in self.backoff],
            "counts": entries,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SparseCpt":
        counts = {
            tuple(ctx): {int(j): int(c) for j, c in row}
            for ctx, row in data["counts"]
        }
        return cls(
            child=data["child"],
            parents=tuple(data["parents"]),
            child_size=data["child_size"],
            parent_sizes=tuple(data["parent_sizes"]),
            alpha=data["alpha"],
            counts=counts,
            backoff=tuple(tuple(s) for s in data["backoff"]),
        )


@dataclass
class CbnModel:
    """Domains, CPTs and quantizers: everything a query needs, immutable."""

    domains: dict[str, CategoricalDomain]
    cpts: dict[str, SparseCpt]
    env_z_counts: dict[str, dict[int, int]]
    meta: dict = field(default_factory=dict)
    observation_quantizer: Quantizer | None = None
    solution_quantizer: Quantizer | None = None
    cleaner: TextCleaner = field(default_factory=TextCleaner)

    @property
    def alpha(self) -> float:
        return self.cpts[SUBSYSTEM].alpha

    def domain(self, name: str) -> CategoricalDomain:
        return self.domains[name]

    def environments(self) -> list[str]:
        return sorted(self.env_z_counts)

    def index_of(self, variable: str, label: str) -> int:
        return self.domains[variable].index(label)

    def joint(self, subsystem: str, cause: str, observation: str, solution: str) -> float:
        """Factorized joint probability of one full assignment."""
        z = self.index_of(SUBSYSTEM, subsystem)
        c = self.index_of(CAUSE, cause)
        o = self.index_of(OBSERVATION, observation)
        s = self.index_of(SOLUTION, solution)
        return self.joint_by_index(z, c, o, s)

    def joint_by_index(self, z: int, c: int, o: int, s: int) -> float:
        return (
            self.cpts[SUBSYSTEM].prob((), z)
            * self.cpts[CAUSE].prob((z,), c)
            * self.cpts[OBSERVATION].prob((c, z), o)
            * self.cpts[SOLUTION].prob((c, z, o), s)
        )

    def subsystem_marginal(self) -> np.ndarray:
        return self.cpts[SUBSYSTEM].row(())

    def env_subsystem_marginal(self, environment: str) -> np.ndarray:
        if environment not in self.env_z_counts:
            raise UnknownLabelError("environment", environment, self.environments())
        size = self.domains[SUBSYSTEM].size
        out = np.full(size, self.alpha, dtype=np.float64)
        counts = self.env_z_counts[environment]
        for z, c in counts.items():
            out[z] += c
        out /= sum(counts.values()) + self.alpha * size
        return out

    def assign_observation(self, raw_text: str) -> int:
        if self.observation_quantizer is None:
            raise ConfigurationError("model has no observation quantizer")
        return self.observation_quantizer.assign(self.cleaner(raw_text))

    def assign_solution(self, raw_text: str) -> int:
        if self.solution_quantizer is None:
            raise ConfigurationError("model has no solution quantizer")
        return self.solution_quantizer.assign(self.cleaner(raw_text))

    def validate_joint_normalization(self, tol: float = 1e-6) -> float:
        """Exhaustively check the joint sums to one; guarded by domain size."""
        sizes = [self.domains[v].size for v in VARIABLES]
        if int(np.prod(sizes)) > 10**6:
            raise ConfigurationError("joint normalization check limited to 1e6 cells")
        total = 0.0
        for z in range(sizes[0]):
            for c in range(sizes[1]):
                for o in range(sizes[2]):
                    for s in range(sizes[3]):
                        total += self.joint_by_index(z, c, o, s)
        if abs(total - 1.0) > tol:
            raise ConfigurationError(f"joint sums to {total}, expected 1")
        return total


def fit(
    train: Corpus,
    observation_quantizer: Quantizer,
    solution_quantizer: Quantizer,
    alpha: float = 0.1,
    cleaner: TextCleaner | None = None,
    seed: int = 0,
) -> CbnModel:
    """Tally co-occurrence counts over the fixed DAG from a training corpus."""
    if not train.records:
        raise ConfigurationError("training corpus is empty")
    cleaner = cleaner or TextCleaner()

    z_labels = tuple(sorted({r.subsystem for r in train.records}))
    c_labels = tuple(sorted({r.root_cause for r in train.records}))
    o_labels = tuple(str(i) for i in range(observation_quantizer.codebook.n_categories))
    s_labels = tuple(str(i) for i in range(solution_quantizer.codebook.n_categories))
    domains = {
        SUBSYSTEM: CategoricalDomain(SUBSYSTEM, z_labels),
        CAUSE: CategoricalDomain(CAUSE, c_labels),
        OBSERVATION: CategoricalDomain(OBSERVATION, o_labels),
        SOLUTION: CategoricalDomain(SOLUTION, s_labels),
    }

    counts: dict[str, dict[tuple[int, ...], dict[int, int]]] = {v: {} for v in VARIABLES}
    env_z_counts: dict[str, dict[int, int]] = {}
    for record in train.records:
        z = domains[SUBSYSTEM].index(record.subsystem)
        c = domains[CAUSE].index(record.root_cause)
        o = observation_quantizer.assign(cleaner(record.observation, record.record_id))
        s = solution_quantizer.assign(cleaner(record.solution, record.record_id))
        for variable, ctx, value in (
            (SUBSYSTEM, (), z),
            (CAUSE, (z,), c),
            (OBSERVATION, (c, z), o),
            (SOLUTION, (c, z, o), s),
        ):
            row = counts[variable].setdefault(ctx, {})
            row[value] = row.get(value, 0) + 1
        env_row = env_z_counts.setdefault(record.environment, {})
        env_row[z] = env_row.get(z, 0) + 1

    sizes = {v: domains[v].size for v in VARIABLES}
    cpts = {
        v: SparseCpt(
            child=v,
            parents=PARENTS[v],
            child_size=sizes[v],
            parent_sizes=tuple(sizes[p] for p in PARENTS[v]),
            alpha=alpha,
            counts=counts[v],
            backoff=DEFAULT_BACKOFF[v],
        )
        for v in VARIABLES
    }

    meta = {
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "alpha": alpha,
        "training_records": len(train.records),
        "fit_timestamp": os.environ.get("SOURCE_DATE_EPOCH", ""),
    }
    return CbnModel(
        domains=domains,
        cpts=cpts,
        env_z_counts=env_z_counts,
        meta=meta,
        observation_quantizer=observation_quantizer,
        solution_quantizer=solution_quantizer,
        cleaner=cleaner,
    )


def build_model(
    domains: dict[str, tuple[str, ...]],
    counts: dict[str, dict[tuple[int, ...], dict[int, int]]],
    alpha: float,
    env_z_counts: dict[str, dict[int, int]] | None = None,
    meta: dict | None = None,
) -> CbnModel:
    """Assemble a model directly from count tables (synthetic and test models)."""
    doms = {name: CategoricalDomain(name, tuple(labels)) for name, labels in domains.items()}
    sizes = {v: doms[v].size for v in VARIABLES}
    cpts = {
        v: SparseCpt(
            child=v,
            parents=PARENTS[v],
            child_size=sizes[v],
            parent_sizes=tuple(sizes[p] for p in PARENTS[v]),
            alpha=alpha,
            counts=counts.get(v, {}),
            backoff=DEFAULT_BACKOFF[v],
        )
        for v in VARIABLES
    }
    base_meta = {"schema_version": SCHEMA_VERSION, "seed": 0, "alpha": alpha,
                 "training_records": 0, "fit_timestamp": ""}
    base_meta.update(meta or {})
    return CbnModel(domains=doms, cpts=cpts, env_z_counts=env_z_counts or {}, meta=base_meta)


def _model_to_dict(model: CbnModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "meta": model.meta,
        "domains": {name: list(dom.labels) for name, dom in model.domains.items()},
        "cpts": {name: cpt.to_dict() for name, cpt in model.cpts.items()},
        "env_z_counts": {
            env: [[z, c] for z, c in sorted(row.items())]
            for env, row in model.env_z_counts.items()
        },
        "cleaner": {
            "stopwords": sorted(model.cleaner.stopwords),
            "stemming": model.cleaner.stemming,
        },
        "quantizers": {
            "observation": model.observation_quantizer.to_dict()
            if model.observation_quantizer
            else None,
            "solution": model.solution_quantizer.to_dict()
            if model.solution_quantizer
            else None,
        },
    }


def save(model: CbnModel) -> bytes:
    """Serialize to one canonical JSON document (stable byte-for-byte)."""
    doc = _model_to_dict(model)
    return json.dumps(doc, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode(
        "utf-8"
    )


def load(artifact: bytes) -> CbnModel:
    """Parse an artifact; schema or payload problems raise ModelFormatError."""
    try:
        doc = json.loads(artifact.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ModelFormatError(f"artifact is not UTF-8 at byte {exc.start}") from exc
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"artifact is not valid JSON at byte {exc.pos}") from exc
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise ModelFormatError("artifact missing schema_version")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ModelFormatError(
            f"unsupported schema_version {doc['schema_version']} (supported: {SCHEMA_VERSION});"
            " migrate the artifact"
        )
    try:
        domains = {
            name: CategoricalDomain(name, tuple(labels))
            for name, labels in doc["domains"].items()
        }
        cpts = {name: SparseCpt.from_dict(data) for name, data in doc["cpts"].items()}
        env_z_counts = {
            env: {int(z): int(c) for z, c in rows}
            for env, rows in doc["env_z_counts"].items()
        }
        cleaner = TextCleaner(
            stopwords=frozenset(doc["cleaner"]["stopwords"]),
            stemming=doc["cleaner"]["stemming"],
        )
        quantizers = doc["quantizers"]
        obs_q = Quantizer.from_dict(quantizers["observation"]) if quantizers["observation"] else None
        sol_q = Quantizer.from_dict(quantizers["solution"]) if quantizers["solution"] else None
        meta = doc["meta"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"artifact payload malformed: {exc}") from exc
    return CbnModel(
        domains=domains,
        cpts=cpts,
        env_z_counts=env_z_counts,
        meta=meta,
        observation_quantizer=obs_q,
        solution_quantizer=sol_q,
        cleaner=cleaner,
    )


def save_to_path(model: CbnModel, path: str) -> None:
    """Atomic write: temp file in the target directory, then rename."""
    data = save(model)
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_from_path(path: str) -> CbnModel:
    with open(path, "rb") as handle:
        return load(handle.read())
