"""Command-line entry point: index, link, evaluate, bench.

Progress goes to stderr; data to stdout or --out. All randomness flows
from --seed. Exit codes: 0 ok, 1 config, 2 I/O/format, 3 backend
unavailable, 4 evaluation/truth errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench as bench_mod
from .corpus import load_records
from .errors import (BackendError, ConfigError, EvaluationError, InputError,
                     LinkageError)
from .evaluation import (GroundTruth, TaskConfig, load_ground_truth, run_task)
from .gateway import GatewayConfig
from .pipeline import LinkagePipeline, PipelineConfig
from .sparse import save_sparse_index


def _exit_code(exc: LinkageError) -> int:
    if isinstance(exc, BackendError):
        return 3
    if isinstance(exc, EvaluationError):
        return 4
    if isinstance(exc, InputError):
        return 2
    return 1  # ConfigError and anything else configuration-shaped


def _add_shared_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file (flags win)")
    p.add_argument("--reference", help="reference corpus file")
    p.add_argument("--queries", help="query file")
    p.add_argument("--format-in", dest="format_in", default="csv",
                   choices=["csv", "jsonl"], help="input file format")
    p.add_argument("--text-col", default="text")
    p.add_argument("--block-col", default=None)
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--backend", default="mock", choices=["mock", "remote"])
    p.add_argument("--gateway-url", default=None)
    p.add_argument("--embed-model", default="mock-embed")
    p.add_argument("--rerank-model", default="mock-rerank")
    p.add_argument("--select-model", default="mock-select")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--llm-select", action="store_true")
    p.add_argument("--blocking", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--format", default="table", choices=["table", "json"])
    p.add_argument("--cache", default=None, help="embedding cache file")
    p.add_argument("--index-mode", default="exact",
                   choices=["exact", "approximate"])


def _apply_config_file(args: argparse.Namespace,
                       parser: argparse.ArgumentParser, argv: list[str]) -> None:
    """Config precedence: CLI flags > config file > defaults."""
    if not args.config:
        return
    path = Path(args.config)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    explicit = {a.lstrip("-").split("=")[0].replace("-", "_")
                for a in argv if a.startswith("--")}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        value = value.strip("\"'")
        if not hasattr(args, key):
            raise ConfigError(f"{path}: line {lineno}: unknown key {key!r}")
        if key in explicit:
            continue
        current = getattr(args, key)
        if isinstance(current, bool):
            value = value.lower() in ("1", "true", "yes")
        elif isinstance(current, int):
            value = int(value)
        elif isinstance(current, float):
            value = float(value)
        setattr(args, key, value)


def _pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    if args.k < 1:
        raise ConfigError("--k must be >= 1")
    if args.tau is not None and not 0.0 <= args.tau <= 1.0:
        raise ConfigError("--tau must be in [0, 1]")
    gw = GatewayConfig(mode=args.backend, base_url=args.gateway_url,
                       embed_model=args.embed_model,
                       rerank_model=args.rerank_model,
                       select_model=args.select_model)
    return PipelineConfig(k=args.k, gateway=gw, use_blocking=args.blocking,
                          use_llm_select=args.llm_select,
                          index_mode=args.index_mode,
                          cache_path=args.cache, jobs=args.jobs)


def _load_reference(args: argparse.Namespace):
    if not args.reference:
        raise ConfigError("--reference is required")
    return load_records(args.reference, args.format_in, args.text_col,
                        args.block_col, role="reference")


def _load_queries(args: argparse.Namespace):
    if not args.queries:
        raise ConfigError("--queries is required")
    return load_records(args.queries, args.format_in, args.text_col,
                        args.block_col, role="query")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_index(args: argparse.Namespace) -> int:
    corpus = _load_reference(args)
    out_dir = Path(args.out or "enl_index")
    out_dir.mkdir(parents=True, exist_ok=True)
    cache_path = args.cache or str(out_dir / "embeddings.enlk")
    args.cache = cache_path
    cfg = _pipeline_config(args)
    pipeline = LinkagePipeline(corpus, cfg)
    save_sparse_index(pipeline.sparse_index, out_dir / "sparse.enls")
    print(f"indexed {len(corpus)} records | "
          f"vocab {len(pipeline.sparse_index.vocab)} terms | "
          f"dim {pipeline.embeddings.dim} | cache {cache_path}",
          file=sys.stderr)
    return 0


def cmd_link(args: argparse.Namespace) -> int:
    corpus = _load_reference(args)
    queries = _load_queries(args)
    cfg = _pipeline_config(args)
    pipeline = LinkagePipeline(corpus, cfg)
    results = pipeline.link_many(list(queries))

    lines = ["query_id,query,match_id,match,score,selector,n_candidates"]
    for q, res in zip(queries, results):
        top = res.scored[0] if res.scored else None
        score = top.rerank_score if top is not None else 0.0
        pred = res.prediction
        if args.tau is not None and (top is None or score <= args.tau):
            pred = None  # abstain below the threshold
        match_id = "" if pred is None else str(pred)
        match = "" if pred is None else _csv_field(corpus[pred].raw)
        out_score = 0.0 if pred is None else score
        lines.append(f"{q.id},{_csv_field(q.raw)},{match_id},{match},"
                     f"{out_score:.6f},{res.selector},{res.candidate_counts[2]}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _csv_field(value: str) -> str:
    if any(c in value for c in ",\"\n"):
        return '"' + value.replace('"', '""') + '"'
    return value


def cmd_evaluate(args: argparse.Namespace) -> int:
    corpus = _load_reference(args)
    queries = _load_queries(args)
    if not args.truth:
        raise ConfigError("--truth is required for evaluate")
    truth = load_ground_truth(args.truth, corpus)
    cfg = _pipeline_config(args)
    task = TaskConfig(name=args.task_name, queries=queries, corpus=corpus,
                      truth=truth, pipeline=cfg, seed=args.seed,
                      test_fraction=args.test_fraction, tau=args.tau)
    report = run_task(task)
    if args.format == "json":
        _emit(report.to_json() + "\n", args.out)
    else:
        _emit(report.to_table() + "\n", args.out)
        if args.out:
            print(report.to_table(), file=sys.stderr)
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    corpus = _load_reference(args)
    queries = _load_queries(args)
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --sizes value {args.sizes!r}") from exc
    if not sizes:
        raise ConfigError("--sizes must list at least one corpus size")
    if args.truth:
        truth = load_ground_truth(args.truth, corpus)
    else:
        truth = GroundTruth.identity(queries, corpus)
    cfg = _pipeline_config(args)
    task = TaskConfig(name="bench", queries=queries, corpus=corpus,
                      truth=truth, pipeline=cfg, seed=args.seed,
                      test_fraction=args.test_fraction)
    rows = bench_mod.run_scaling(task, sizes, args.seed)
    _emit(bench_mod.rows_to_csv(rows), args.out)
    if args.out:
        print(bench_mod.rows_to_table(rows), file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ensemblelink",
        description="Zero-shot record linkage: ensemble retrieval + reranking")
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="build and persist indexes")
    _add_shared_flags(p_index)
    p_index.set_defaults(func=cmd_index)

    p_link = sub.add_parser("link", help="link a query file to a reference file")
    _add_shared_flags(p_link)
    p_link.set_defaults(func=cmd_link)

    p_eval = sub.add_parser("evaluate", help="run the evaluation protocol")
    _add_shared_flags(p_eval)
    p_eval.add_argument("--truth", default=None, help="ground truth CSV")
    p_eval.add_argument("--test-fraction", type=float, default=0.4)
    p_eval.add_argument("--task-name", default="task")
    p_eval.set_defaults(func=cmd_evaluate)

    p_bench = sub.add_parser("bench", help="scalability benchmark")
    _add_shared_flags(p_bench)
    p_bench.add_argument("--sizes", required=True,
                         help="comma-separated corpus sizes")
    p_bench.add_argument("--truth", default=None)
    p_bench.add_argument("--test-fraction", type=float, default=0.4)
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args, parser, argv)
        return args.func(args)
    except LinkageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
