"""HTTP JSON API over a loaded model snapshot."""

from __future__ import annotations

import itertools
import threading

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import advisory as advisory_mod
from . import inference
from .config import ServiceConfig
from .corpus import Corpus
from .errors import TroubleshooterError, UnknownLabelError
from .model import CAUSE, OBSERVATION, SOLUTION, SUBSYSTEM, CbnModel


class ModelHolder:
    """Shared read-only snapshot; swap() replaces it atomically."""

    def __init__(self, model: CbnModel, index: advisory_mod.SolutionIndex | None = None):
        self._lock = threading.Lock()
        self._model = model
        self._index = index

    @property
    def snapshot(self) -> tuple[CbnModel, advisory_mod.SolutionIndex | None]:
        with self._lock:
            return self._model, self._index

    def swap(self, model: CbnModel, index: advisory_mod.SolutionIndex | None = None) -> None:
        with self._lock:
            self._model = model
            self._index = index


class DiagnoseRequest(BaseModel):
    text: str
    top_k: int | None = None
    subsystem: str | None = None


class SolveRequest(BaseModel):
    text: str
    top_k: int | None = None
    generate: bool = False
    k_retrieve: int | None = None


class TransportRequest(BaseModel):
    text: str
    target_env: str | None = None
    z_marginal: dict[str, float] | None = None
    top_k: int | None = None


class FactualBody(BaseModel):
    z: str
    c: str
    o_text: str
    s_text: str


class RecourseRequest(BaseModel):
    factual: FactualBody | None = None
    record_id: str | None = None
    alt_text: str
    mode: str = "gumbel_max"
    samples: int = 10_000
    seed: int | None = None


def _entries(ranked: inference.RankedDistribution) -> list[dict]:
    return [{"label": label, "probability": p} for label, p in ranked.entries]


def _model_meta(model: CbnModel) -> dict:
    return {
        "schema_version": model.meta.get("schema_version"),
        "alpha": model.meta.get("alpha"),
        "seed": model.meta.get("seed"),
        "training_records": model.meta.get("training_records"),
        "fit_timestamp": model.meta.get("fit_timestamp"),
    }


def create_app(
    holder: ModelHolder,
    config: ServiceConfig | None = None,
    corpus: Corpus | None = None,
    generator=None,
) -> FastAPI:
    """Build the API around a model holder.

    The generator is injected for tests; by default a remote client is used
    when llm.url is configured, the deterministic stub otherwise.
    """
    config = config or ServiceConfig()
    app = FastAPI(title="causal troubleshooter", version="1")
    seed_counter = itertools.count(1)
    seed_lock = threading.Lock()
    generation_slots = threading.BoundedSemaphore(max(1, config.max_concurrent_generations))

    @app.exception_handler(UnknownLabelError)
    def _unknown_label(request: Request, exc: UnknownLabelError):
        return JSONResponse(
            status_code=422,
            content={"error": {"code": "unknown_label", "message": str(exc),
                               "known": exc.known or []}},
        )

    @app.exception_handler(TroubleshooterError)
    def _engine_error(request: Request, exc: TroubleshooterError):
        return JSONResponse(
            status_code=422,
            content={"error": {"code": type(exc).__name__, "message": str(exc)}},
        )

    @app.get("/v1/health")
    def health():
        return {"status": "ok"}

    @app.get("/v1/model")
    def model_info():
        model, _ = holder.snapshot
        return {
            "schema_version": model.meta.get("schema_version"),
            "domains": {name: dom.size for name, dom in model.domains.items()},
            "environments": model.environments(),
            "meta": _model_meta(model),
        }

    @app.post("/v1/diagnose")
    def diagnose(body: DiagnoseRequest):
        model, _ = holder.snapshot
        causes = inference.rca(
            model, body.text, top_k=body.top_k or config.top_k, subsystem=body.subsystem
        )
        return {"causes": _entries(causes), "model_meta": _model_meta(model)}

    def _solutions_payload(model, index, ranked, k_retrieve):
        payload = []
        for label, probability in ranked.entries:
            category = int(label)
            exemplars: list[str] = []
            if index is not None and category in index.buckets:
                exemplars = advisory_mod.retrieve(index, category, k_retrieve)
            payload.append(
                {"category": label, "probability": probability, "exemplars": exemplars}
            )
        return payload

    @app.post("/v1/solve")
    def solve(body: SolveRequest):
        model, index = holder.snapshot
        k_retrieve = body.k_retrieve if body.k_retrieve is not None else config.k_retrieve
        ranked = inference.intervene_solution(model, body.text, top_k=body.top_k or config.top_k)
        solutions = _solutions_payload(model, index, ranked, k_retrieve)
        response = {"solutions": solutions, "model_meta": _model_meta(model)}
        if body.generate:
            causes = inference.rca(model, body.text, top_k=config.top_k)
            retrieved = solutions[0]["exemplars"] if solutions else []
            prompt = advisory_mod.build_prompt(body.text, causes, retrieved)
            client = generator
            if client is None:
                client = (
                    advisory_mod.RemoteGenerator(config.llm_url, timeout=config.request_timeout)
                    if config.llm_url
                    else advisory_mod.StubGenerator(retrieved)
                )
            with generation_slots:
                result = client.generate(prompt)
            response["advisory"] = {
                "options": result.options,
                "raw_generation": result.raw_generation,
                "provenance": result.provenance,
            }
        return response

    @app.post("/v1/transport")
    def transport(body: TransportRequest):
        model, index = holder.snapshot
        if (body.target_env is None) == (body.z_marginal is None):
            return JSONResponse(
                status_code=422,
                content={"error": {"code": "bad_request",
                                   "message": "provide exactly one of target_env or z_marginal"}},
            )
        target = body.target_env if body.target_env is not None else body.z_marginal
        ranked = inference.transport_solution(
            model, target, body.text, top_k=body.top_k or config.top_k
        )
        return {
            "solutions": _solutions_payload(model, index, ranked, config.k_retrieve),
            "target": body.target_env or "explicit",
            "model_meta": _model_meta(model),
        }

    @app.post("/v1/recourse")
    def recourse(body: RecourseRequest):
        model, _ = holder.snapshot
        if (body.factual is None) == (body.record_id is None):
            return JSONResponse(
                status_code=422,
                content={"error": {"code": "bad_request",
                                   "message": "provide exactly one of factual or record_id"}},
            )
        if body.record_id is not None:
            if corpus is None:
                return JSONResponse(
                    status_code=422,
                    content={"error": {"code": "no_corpus",
                                       "message": "record lookup needs a corpus_path configured"}},
                )
            try:
                record = corpus.by_id(body.record_id)
            except KeyError:
                return JSONResponse(
                    status_code=422,
                    content={"error": {"code": "unknown_record",
                                       "message": f"no record with id {body.record_id!r}"}},
                )
            z, c = record.subsystem, record.root_cause
            o_text, s_text = record.observation, record.solution
        else:
            z, c = body.factual.z, body.factual.c
            o_text, s_text = body.factual.o_text, body.factual.s_text

        if body.seed is None:
            with seed_lock:
                seed = next(seed_counter)
        else:
            seed = body.seed
        factual_o = model.assign_observation(o_text)
        factual_s = model.assign_solution(s_text)
        factual = {
            SUBSYSTEM: z,
            CAUSE: c,
            OBSERVATION: model.domains[OBSERVATION].labels[factual_o],
            SOLUTION: model.domains[SOLUTION].labels[factual_s],
        }
        noise = inference.NoiseModel(mode=body.mode, samples=body.samples, seed=seed)
        ranked = inference.recourse(model, factual, body.alt_text, noise)
        return {
            "counterfactual": _entries(ranked.truncate(config.top_k)),
            "factual_solution": factual[SOLUTION],
            "factual_cause": c,
            "mode": body.mode,
            "samples": body.samples,
            "seed": seed,
            "model_meta": _model_meta(model),
        }

    return app


def serve(config: ServiceConfig) -> None:
    """Load the model (and corpus, if configured), then run the server.

    The model must load before the port binds; uvicorn's shutdown handling
    finishes in-flight requests on SIGTERM/SIGINT.
    """
    import uvicorn

    from .corpus import ingest
    from .errors import ConfigurationError
    from .model import load_from_path
    from .quantizer import RemoteEmbedder

    model = load_from_path(config.model_path)
    if config.embedder_url:
        client = RemoteEmbedder(config.embedder_url, timeout=config.request_timeout)
        for quantizer in (model.observation_quantizer, model.solution_quantizer):
            if quantizer is None:
                continue
            if quantizer.embedder.mode != "remote":
                raise ConfigurationError(
                    "embedder.url is set but the artifact was trained with the"
                    " built-in embedder; retrain with the remote embedder instead"
                )
            quantizer.remote_client = client
    corpus = None
    index = None
    if config.corpus_path:
        with open(config.corpus_path, "rb") as handle:
            fmt = "csv" if config.corpus_path.endswith(".csv") else "jsonl"
            corpus, _ = ingest(handle.read(), format=fmt, cleaner=model.cleaner,
                               source_path=config.corpus_path)
        index = advisory_mod.build_index(corpus, model)
    holder = ModelHolder(model, index)
    app = create_app(holder, config, corpus=corpus)
    uvicorn.run(app, host=config.host, port=config.port, timeout_graceful_shutdown=10)
