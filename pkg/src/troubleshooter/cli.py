"""Command-line interface: train, query, evaluate and serve."""

from __future__ import annotations

import argparse
import json
import sys

from . import advisory as advisory_mod
from . import inference
from .config import load_config
from .corpus import TextCleaner, ingest, split
from .errors import TroubleshooterError
from .evaluation import evaluate_rca
from .model import OBSERVATION, SOLUTION, SUBSYSTEM, CAUSE, fit, load_from_path, save_to_path
from .quantizer import ClusterParams, QuantizerParams, fit_quantizer
from .stopwords import DEFAULT_STOPWORDS, load_stopwords


class _StageFailure(Exception):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")


def _run_stage(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except TroubleshooterError as exc:
        raise _StageFailure(stage, exc) from exc
    except OSError as exc:
        raise _StageFailure(stage, exc) from exc


def _read_corpus(path: str, fmt: str, cleaner: TextCleaner):
    with open(path, "rb") as handle:
        data = handle.read()
    return ingest(data, format=fmt, cleaner=cleaner, source_path=path)


def _render_table(title: str, rows: list[tuple[str, float]], label_header: str) -> str:
    width = max([len(label_header)] + [len(label) for label, _ in rows]) + 2
    lines = [title, f"{label_header:<{width}}Probability"]
    for label, p in rows:
        lines.append(f"{label:<{width}}{p:.4f}")
    return "\n".join(lines)


def _print_ranked(ranked: inference.RankedDistribution, as_json: bool, title: str,
                  label_header: str) -> None:
    if as_json:
        print(json.dumps({"variable": ranked.variable, "entries": _json_entries(ranked)}))
    else:
        print(_render_table(title, list(ranked.entries), label_header))


def _json_entries(ranked: inference.RankedDistribution) -> list[dict]:
    return [{"label": label, "probability": p} for label, p in ranked.entries]


def cmd_train(args) -> int:
    stopwords = load_stopwords(args.stopwords) if args.stopwords else DEFAULT_STOPWORDS
    cleaner = TextCleaner(stopwords=stopwords, stemming=not args.no_stem)
    corpus, report = _run_stage("ingest", _read_corpus, args.data, args.format, cleaner)
    print(f"ingest report\n{report.summary()}")

    cluster = ClusterParams(
        min_cluster_size=args.min_cluster_size, distance_threshold=args.distance_threshold
    )
    params = QuantizerParams(
        embed_dim=args.embed_dim, reduced_dim=args.reduced_dim, seed=args.seed, cluster=cluster
    )
    obs_texts = [cleaner(r.observation, r.record_id) for r in corpus.records]
    sol_texts = [cleaner(r.solution, r.record_id) for r in corpus.records]
    obs_q = _run_stage("fit observation quantizer", fit_quantizer, "observation", obs_texts, params)
    sol_q = _run_stage("fit solution quantizer", fit_quantizer, "solution", sol_texts, params)
    model = _run_stage(
        "fit model", fit, corpus, obs_q, sol_q, alpha=args.alpha, cleaner=cleaner, seed=args.seed
    )
    _run_stage("save artifact", save_to_path, model, args.out)

    sizes = {name: dom.size for name, dom in model.domains.items()}
    print(f"model written to {args.out}")
    print(
        "domains: "
        + ", ".join(f"{name}={sizes[name]}" for name in (SUBSYSTEM, CAUSE, OBSERVATION, SOLUTION))
    )
    print(f"environments: {', '.join(model.environments())}")
    return 0


def cmd_diagnose(args) -> int:
    model = _run_stage("load model", load_from_path, args.model)
    ranked = _run_stage(
        "diagnose", inference.rca, model, args.text, top_k=args.top_k, subsystem=args.subsystem
    )
    _print_ranked(ranked, args.json, "Ranking of the most probable potential root causes",
                  "Potential Root Cause")
    return 0


def cmd_solve(args) -> int:
    model = _run_stage("load model", load_from_path, args.model)
    if args.target_env:
        ranked = _run_stage(
            "transport", inference.transport_solution, model, args.target_env, args.text,
            top_k=args.top_k,
        )
        title = f"Ranking of the most probable potential solutions (transported to {args.target_env})"
    else:
        ranked = _run_stage(
            "solve", inference.intervene_solution, model, args.text, top_k=args.top_k
        )
        title = "Ranking of the most probable potential solutions"

    retrieved: list[str] = []
    if args.data:
        corpus, _ = _run_stage("ingest corpus", _read_corpus, args.data, args.format, model.cleaner)
        index = _run_stage("build index", advisory_mod.build_index, corpus, model)
        top_category = int(ranked.top[0])
        if top_category in index.buckets:
            retrieved = advisory_mod.retrieve(index, top_category, args.k_retrieve)

    payload = {"variable": ranked.variable, "entries": _json_entries(ranked)}
    if retrieved:
        payload["exemplars"] = retrieved
    if args.generate:
        causes = _run_stage("diagnose", inference.rca, model, args.text, top_k=args.top_k)
        prompt = advisory_mod.build_prompt(args.text, causes, retrieved)
        client = (
            advisory_mod.RemoteGenerator(args.llm_url)
            if args.llm_url
            else advisory_mod.StubGenerator(retrieved)
        )
        result = _run_stage("generate", client.generate, prompt)
        payload["advisory"] = {
            "options": result.options,
            "raw_generation": result.raw_generation,
            "provenance": result.provenance,
        }

    if args.json:
        print(json.dumps(payload))
    else:
        print(_render_table(title, list(ranked.entries), "Potential Solution"))
        for i, text in enumerate(retrieved, start=1):
            print(f"  [{i}] {text}")
        if args.generate:
            print("advisory options:")
            for option in payload["advisory"]["options"]:
                print(f" - {option}")
    return 0


def cmd_recourse(args) -> int:
    model = _run_stage("load model", load_from_path, args.model)
    corpus, _ = _run_stage("ingest corpus", _read_corpus, args.data, args.format, model.cleaner)
    try:
        record = corpus.by_id(args.record_id)
    except KeyError as exc:
        raise _StageFailure("lookup record", exc) from exc
    factual = {
        SUBSYSTEM: record.subsystem,
        CAUSE: record.root_cause,
        OBSERVATION: model.domains[OBSERVATION].labels[model.assign_observation(record.observation)],
        SOLUTION: model.domains[SOLUTION].labels[model.assign_solution(record.solution)],
    }
    noise = inference.NoiseModel(mode=args.mode, samples=args.samples, seed=args.seed)
    ranked = _run_stage(
        "recourse", inference.recourse, model, factual, args.alt_text, noise, top_k=args.top_k
    )
    if args.json:
        print(json.dumps({
            "variable": ranked.variable,
            "entries": _json_entries(ranked),
            "factual_solution": factual[SOLUTION],
            "mode": args.mode,
            "seed": args.seed,
        }))
    else:
        print(_render_table(
            f"Counterfactual solutions for record {args.record_id} (mode {args.mode})",
            list(ranked.entries), "Potential Solution"))
        print(f"factual solution category: {factual[SOLUTION]}")
    return 0


def cmd_evaluate(args) -> int:
    model = _run_stage("load model", load_from_path, args.model)
    corpus, _ = _run_stage("ingest corpus", _read_corpus, args.data, args.format, model.cleaner)
    test = corpus
    if args.train_fraction is not None:
        _, test = _run_stage("split", split, corpus, args.train_fraction, args.seed)
    report = _run_stage("evaluate", evaluate_rca, model, test)
    if args.json:
        print(json.dumps(report.as_dict()))
    else:
        print(f"root cause classification ({report.averaging} averaging, n={report.n_test})")
        print(f"accuracy:  {report.accuracy:.4f}")
        print(f"precision: {report.macro_precision:.4f}")
        print(f"recall:    {report.macro_recall:.4f}")
        width = max(len(label) for label, _, _, _ in report.per_class) + 2
        print(f"{'cause':<{width}}precision  recall  support")
        for label, precision, recall, support in report.per_class:
            print(f"{label:<{width}}{precision:9.4f}  {recall:6.4f}  {support:7d}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    config = load_config(
        args.config,
        model_path=args.model,
        corpus_path=args.data,
        host=args.host,
        port=args.port,
        llm_url=args.llm_url,
    )
    serve(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="troubleshooter",
        description="Causality-aware troubleshooting over maintenance records",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="ingest records and fit a model artifact")
    train.add_argument("--data", required=True)
    train.add_argument("--out", required=True)
    train.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--alpha", type=float, default=0.1)
    train.add_argument("--embed-dim", type=int, default=4096)
    train.add_argument("--reduced-dim", type=int, default=64)
    train.add_argument("--min-cluster-size", type=int, default=5)
    train.add_argument("--distance-threshold", type=float, default=0.35)
    train.add_argument("--stopwords")
    train.add_argument("--no-stem", action="store_true")
    train.set_defaults(func=cmd_train)

    diagnose = sub.add_parser("diagnose", help="rank root causes for an observation")
    diagnose.add_argument("text")
    diagnose.add_argument("--model", required=True)
    diagnose.add_argument("--top-k", type=int, default=5)
    diagnose.add_argument("--subsystem")
    diagnose.add_argument("--json", action="store_true")
    diagnose.set_defaults(func=cmd_diagnose)

    solve = sub.add_parser("solve", help="rank deconfounded solutions for an observation")
    solve.add_argument("text")
    solve.add_argument("--model", required=True)
    solve.add_argument("--top-k", type=int, default=5)
    solve.add_argument("--target-env", help="transport the ranking to this environment")
    solve.add_argument("--data", help="corpus for exemplar retrieval")
    solve.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    solve.add_argument("--k-retrieve", type=int, default=6)
    solve.add_argument("--generate", action="store_true")
    solve.add_argument("--llm-url")
    solve.add_argument("--json", action="store_true")
    solve.set_defaults(func=cmd_solve)

    recourse = sub.add_parser("recourse", help="counterfactual solution for a recorded incident")
    recourse.add_argument("--model", required=True)
    recourse.add_argument("--data", required=True)
    recourse.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    recourse.add_argument("--record-id", required=True)
    recourse.add_argument("--alt-text", required=True)
    recourse.add_argument("--mode", choices=["interventional", "gumbel_max"], default="gumbel_max")
    recourse.add_argument("--samples", type=int, default=10_000)
    recourse.add_argument("--seed", type=int, default=0)
    recourse.add_argument("--top-k", type=int, default=5)
    recourse.add_argument("--json", action="store_true")
    recourse.set_defaults(func=cmd_recourse)

    evaluate = sub.add_parser("evaluate", help="score diagnosis quality on a corpus")
    evaluate.add_argument("--model", required=True)
    evaluate.add_argument("--data", required=True)
    evaluate.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    evaluate.add_argument("--train-fraction", type=float,
                          help="evaluate only the held-out side of this split")
    evaluate.add_argument("--seed", type=int, default=0)
    evaluate.add_argument("--json", action="store_true")
    evaluate.set_defaults(func=cmd_evaluate)

    serve_cmd = sub.add_parser("serve", help="run the HTTP API")
    serve_cmd.add_argument("--config")
    serve_cmd.add_argument("--model")
    serve_cmd.add_argument("--data")
    serve_cmd.add_argument("--host")
    serve_cmd.add_argument("--port", type=int)
    serve_cmd.add_argument("--llm-url")
    serve_cmd.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _StageFailure as exc:
        print(f"error in {exc.stage}: {exc.cause}", file=sys.stderr)
        return 1
    except TroubleshooterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
