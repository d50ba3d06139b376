"""Shared fixtures: small corpora, pinned models and brute-force oracles."""

from __future__ import annotations

import json

import pytest

from troubleshooter.corpus import Corpus, RoxRecord, TextCleaner
from troubleshooter.evaluation import GroundTruthSpec, generate_synthetic
from troubleshooter.model import (
    CAUSE,
    OBSERVATION,
    SOLUTION,
    SUBSYSTEM,
    CbnModel,
    build_model,
    fit,
)
from troubleshooter.quantizer import QuantizerParams, fit_quantizer

SMALL_ROWS = [
    {
        "environment": "fleet-a",
        "subsystem": "brakes",
        "root_cause": "part damaged",
        "observation": "failure mechanical brake trailer",
        "solution": "damaged cable removed and replaced with new",
    },
    {
        "environment": "fleet-a",
        "subsystem": "doors",
        "root_cause": "incorrect maintenance",
        "observation": "door fails to close at terminus",
        "solution": "door sensor realigned and tested",
    },
    {
        "environment": "fleet-b",
        "subsystem": "brakes",
        "root_cause": "part damaged",
        "observation": "brake pressure dropping on axle two",
        "solution": "worn pad replaced and pressure recalibrated",
    },
]


def jsonl_bytes(rows: list[dict]) -> bytes:
    return "\n".join(json.dumps(row) for row in rows).encode("utf-8") + b"\n"


@pytest.fixture
def small_jsonl() -> bytes:
    return jsonl_bytes(SMALL_ROWS)


@pytest.fixture(scope="session")
def synthetic_pair() -> tuple[Corpus, CbnModel]:
    spec = GroundTruthSpec(
        z_size=3, c_size=4, o_size=4, s_size=5, seed=7, n_environments=2, confounding=0.5
    )
    return generate_synthetic(spec, 600)


@pytest.fixture(scope="session")
def fitted_model(synthetic_pair) -> CbnModel:
    corpus, _ = synthetic_pair
    cleaner = TextCleaner()
    params = QuantizerParams(seed=3)
    obs_q = fit_quantizer(
        "observation", [cleaner(r.observation) for r in corpus.records], params
    )
    sol_q = fit_quantizer("solution", [cleaner(r.solution) for r in corpus.records], params)
    return fit(corpus, obs_q, sol_q, alpha=0.1, cleaner=cleaner, seed=3)


def confounded_model() -> CbnModel:
    """Pinned model where conditioning and intervening rank solutions
    differently: the subsystem drives both the wording of the observation
    and the fix that gets applied."""
    domains = {
        SUBSYSTEM: ("bogie", "cab"),
        CAUSE: ("wear",),
        OBSERVATION: ("0", "1"),
        SOLUTION: ("0", "1"),
    }
    counts = {
        SUBSYSTEM: {(): {0: 5000, 1: 5000}},
        CAUSE: {(0,): {0: 10000}, (1,): {0: 10000}},
        OBSERVATION: {(0, 0): {0: 9000, 1: 1000}, (0, 1): {0: 1000, 1: 9000}},
        SOLUTION: {
            (0, 0, 0): {0: 9000, 1: 1000},
            (0, 0, 1): {0: 9500, 1: 500},
            (0, 1, 0): {0: 2000, 1: 8000},
            (0, 1, 1): {0: 3500, 1: 6500},
        },
    }
    return build_model(domains, counts, alpha=0.01,
                       env_z_counts={"envA": {0: 900, 1: 100}, "envB": {0: 100, 1: 900}})


def exhaustive_conditional(model: CbnModel, query_var: str, evidence: dict) -> dict[str, float]:
    """Oracle: scalar enumeration of the full joint, then the ratio of marginals."""
    sizes = {v: model.domains[v].size for v in (SUBSYSTEM, CAUSE, OBSERVATION, SOLUTION)}
    fixed = {v: model.domains[v].index(label) for v, label in evidence.items()}
    weights = [0.0] * sizes[query_var]
    for z in range(sizes[SUBSYSTEM]):
        if SUBSYSTEM in fixed and fixed[SUBSYSTEM] != z:
            continue
        for c in range(sizes[CAUSE]):
            if CAUSE in fixed and fixed[CAUSE] != c:
                continue
            for o in range(sizes[OBSERVATION]):
                if OBSERVATION in fixed and fixed[OBSERVATION] != o:
                    continue
                for s in range(sizes[SOLUTION]):
                    if SOLUTION in fixed and fixed[SOLUTION] != s:
                        continue
                    p = model.joint_by_index(z, c, o, s)
                    q = {"subsystem": z, "cause": c, "observation": o, "solution": s}[query_var]
                    weights[q] += p
    total = sum(weights)
    return {
        model.domains[query_var].labels[i]: w / total for i, w in enumerate(weights)
    }
