"""Command-line pipeline: ingest, label, assemble, predict, evaluate,
stability, trends, serve.

Every data-producing subcommand writes its artifacts plus a manifest.json
into the --out directory. Exit codes: 0 on success, 1 on expected
failures (bad input, missing files, backend exhaustion), 2 on usage
errors. Output files other than the manifest contain no timestamps, so
reruns with the same inputs and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from citecast import __version__
from citecast.backends import (
    BackendConfig,
    BackendConfigError,
    FailedPrediction,
    Prediction,
    PredictionIOError,
    UsageLedger,
    Verdict,
    load_backend_profiles,
    make_transport,
    predict_batch,
    read_predictions,
    write_predictions,
)
from citecast.corpus import CorpusError, PaperRecord, descriptive_stats, ingest
from citecast.evaluation import (
    EvaluationError,
    agreement,
    agreement_to_dict,
    build_report,
    journal_breakdown,
    render_report,
    report_to_dict,
)
from citecast.labeling import LabelingError, LabelSpec, label_corpus, read_labels, write_labels
from citecast.prompting import (
    TemplateError,
    assemble,
    load_templates,
    read_bundles,
    write_bundles,
)
from citecast.trends import (
    RankConfig,
    TrendsError,
    load_stopwords,
    load_theme_map,
    phrase_trends,
    ranked_phrases,
    treemap_export,
)


class CliError(ValueError):
    """Expected operator-facing failure; message is the explanation."""


_EXPECTED_ERRORS = (
    CliError,
    CorpusError,
    LabelingError,
    TemplateError,
    BackendConfigError,
    PredictionIOError,
    EvaluationError,
    TrendsError,
    OSError,
)


@dataclasses.dataclass
class RunManifest:
    """Provenance for one output directory."""

    command: str
    arguments: dict
    inputs: dict
    outputs: list[str]
    package_version: str = __version__
    seed: int | None = None
    template_version: str | None = None
    started_at: str = ""
    finished_at: str = ""

    def write(self, out_dir: Path) -> None:
        body = dataclasses.asdict(self)
        path = out_dir / "manifest.json"
        path.write_text(
            json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _manifest(args: argparse.Namespace, inputs: dict) -> RunManifest:
    arguments = {
        key: (str(value) if isinstance(value, Path) else value)
        for key, value in vars(args).items()
        if key not in ("handler", "command") and value is not None
    }
    return RunManifest(
        command=args.command,
        arguments=arguments,
        inputs={k: str(v) for k, v in inputs.items()},
        outputs=[],
        started_at=_now(),
    )


def _finish(manifest: RunManifest, out_dir: Path, outputs: list[str]) -> None:
    manifest.outputs = outputs
    manifest.finished_at = _now()
    manifest.write(out_dir)


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, body: object) -> None:
    path.write_text(
        json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _ingest_strict(path: str) -> list[PaperRecord]:
    """Load a corpus, failing loudly on any rejected line."""
    records, report = ingest(path)
    if report.rejected:
        details = "; ".join(
            f"line {issue.line_number}: {issue.reason}" for issue in report.rejected[:5]
        )
        more = (
            f" (+{len(report.rejected) - 5} more)" if len(report.rejected) > 5 else ""
        )
        raise CliError(f"corpus has {len(report.rejected)} bad lines: {details}{more}")
    if not records:
        raise CliError(f"no records in {path}")
    return records


def cmd_ingest(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    manifest = _manifest(args, {"corpus": args.corpus})
    records, report = ingest(args.corpus)
    issues = {
        "total_lines": report.total_lines,
        "accepted": report.accepted,
        "rejected": [
            {"line": i.line_number, "reason": i.reason} for i in report.rejected
        ],
        "warnings": [
            {"line": i.line_number, "reason": i.reason} for i in report.warnings
        ],
    }
    _write_json(out / "ingest_report.json", issues)
    outputs = ["ingest_report.json"]
    if not records:
        _finish(manifest, out, outputs)
        raise CliError(f"no valid records in {args.corpus}")

    with_citations = [r for r in records if r.citation_count is not None]
    if with_citations:
        summary = descriptive_stats(with_citations)
        stats = {
            "total_records": summary.total_records,
            "records_without_citations": len(records) - len(with_citations),
            "ungrouped": summary.ungrouped_count,
            "never_cited": {
                "count": summary.never_cited_count,
                "fraction": round(summary.never_cited_fraction, 4),
            },
            "low_cited_at_most_5": {
                "count": summary.low_cited_count,
                "fraction": round(summary.low_cited_fraction, 4),
            },
            "groups": {
                group.key: {
                    "count": gs.count,
                    "mean": round(gs.mean, 1),
                    "median": gs.median,
                    "sd": round(gs.sd, 1),
                    "iqr": gs.iqr,
                    "max": gs.max,
                }
                for group, gs in summary.groups.items()
            },
        }
        _write_json(out / "stats.json", stats)
        outputs.append("stats.json")

    _finish(manifest, out, outputs)
    print(
        f"accepted {report.accepted} of {report.total_lines} lines "
        f"({len(report.rejected)} rejected, {len(report.warnings)} warnings)"
    )
    if report.rejected:
        for issue in report.rejected[:10]:
            print(f"  rejected line {issue.line_number}: {issue.reason}", file=sys.stderr)
    return 0


def cmd_label(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    manifest = _manifest(args, {"corpus": args.corpus})
    records = _ingest_strict(args.corpus)
    spec = LabelSpec(k_percent=args.k)
    labels = label_corpus(records, spec)
    write_labels(labels, out / "labels.jsonl")

    slice_summary = descriptive_stats(records, slice_percent=args.k)
    slice_stats = {
        "k_percent": args.k,
        "positives": slice_summary.total_records,
        "groups": {
            group.key: {
                "count": gs.count,
                "mean": round(gs.mean, 1),
                "median": gs.median,
                "sd": round(gs.sd, 1),
                "iqr": gs.iqr,
                "max": gs.max,
            }
            for group, gs in slice_summary.groups.items()
        },
    }
    _write_json(out / "slice_stats.json", slice_stats)
    _finish(manifest, out, ["labels.jsonl", "slice_stats.json"])
    positives = sum(1 for label in labels if label.positive)
    print(f"labeled {len(labels)} records, {positives} positives at top {args.k:g}%")
    return 0


def cmd_assemble(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    manifest = _manifest(args, {"corpus": args.corpus, "templates": args.templates or "packaged"})
    records = _ingest_strict(args.corpus)
    store = load_templates(args.templates)
    manifest.template_version = store.version

    bundles = []
    skipped = 0
    for record in records:
        try:
            bundles.append(assemble(record, store))
        except TemplateError:
            if args.skip_ungrouped:
                skipped += 1
                continue
            raise
    if not bundles:
        raise CliError("no records could be assembled")
    write_bundles(bundles, out / "bundles.jsonl")
    _finish(manifest, out, ["bundles.jsonl"])
    note = f", skipped {skipped} without a template" if skipped else ""
    print(f"assembled {len(bundles)} prompts{note}")
    return 0


def _resolve_backend(args: argparse.Namespace) -> BackendConfig:
    name = args.backend
    if args.backends_config:
        profiles = load_backend_profiles(args.backends_config)
        if name not in profiles:
            known = ", ".join(sorted(profiles)) or "none"
            raise CliError(f"unknown backend profile {name!r} (available: {known})")
        return profiles[name]
    if name != "mock":
        raise CliError(
            f"backend {name!r} needs --backends-config; only 'mock' is built in"
        )
    return BackendConfig(name="mock", endpoint="mock")


def _run_batch(
    args: argparse.Namespace, config: BackendConfig, seed: int
) -> tuple[list[Prediction | FailedPrediction], UsageLedger]:
    bundles = read_bundles(args.bundles)
    if not bundles:
        raise CliError(f"no bundles in {args.bundles}")
    transport = make_transport(
        config,
        seed=seed,
        positive_bias=args.positive_bias,
        flip_rate=args.flip_rate,
    )
    return predict_batch(bundles, config, transport, rng_seed=seed)


def _usage_body(ledger: UsageLedger) -> dict:
    return {
        "total_requests": ledger.total_requests,
        "total_retries": ledger.total_retries,
        "total_input_tokens": ledger.total_input_tokens,
        "total_output_tokens": ledger.total_output_tokens,
        "total_cost_usd": ledger.total_cost_usd,
        "wall_time_seconds": round(ledger.wall_time, 3),
    }


def cmd_predict(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    manifest = _manifest(args, {"bundles": args.bundles})
    manifest.seed = args.seed
    config = _resolve_backend(args)
    results, ledger = _run_batch(args, config, args.seed)
    write_predictions(results, out / "predictions.jsonl")
    _write_json(out / "usage.json", _usage_body(ledger))
    _finish(manifest, out, ["predictions.jsonl", "usage.json"])
    failed = sum(1 for r in results if isinstance(r, FailedPrediction))
    print(
        f"{len(results)} predictions ({failed} failed), "
        f"{ledger.total_retries} retries, cost ${ledger.total_cost_usd:.6f}"
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    inputs = {"labels": args.labels, "predictions": args.predictions}
    if args.corpus:
        inputs["corpus"] = args.corpus
    manifest = _manifest(args, inputs)
    labels = read_labels(args.labels)
    predictions = read_predictions(args.predictions)
    if not predictions:
        raise CliError(f"no predictions in {args.predictions}")

    label_ids = {label.record_id for label in labels}
    prediction_ids = {p.record_id for p in predictions}
    unmatched = sorted(prediction_ids - label_ids)
    if unmatched:
        shown = ", ".join(repr(i) for i in unmatched[:5])
        more = f" (+{len(unmatched) - 5} more)" if len(unmatched) > 5 else ""
        raise CliError(f"predictions without labels: {shown}{more}")

    # Rebuild the ledger from the rows so the report is reproducible
    # from files alone; wall time is not part of it.
    ledger = UsageLedger()
    for result in predictions:
        ledger.record(result)

    report = build_report(labels, predictions, args.backend_name, ledger)
    _write_json(out / "report.json", report_to_dict(report))
    (out / "report.txt").write_text(render_report(report), encoding="utf-8")
    outputs = ["report.json", "report.txt"]

    if args.corpus:
        records = _ingest_strict(args.corpus)
        rows = journal_breakdown(predictions, records)
        _write_json(
            out / "journals.json",
            [
                {
                    "journal": row.journal,
                    "total": row.total,
                    "by_year": {str(year): n for year, n in row.by_year.items()},
                }
                for row in rows
            ],
        )
        outputs.append("journals.json")

    _finish(manifest, out, outputs)
    sys.stdout.write(render_report(report))
    return 0


def cmd_stability(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    manifest = _manifest(args, {"bundles": args.bundles, "corpus": args.corpus})
    manifest.seed = args.seed
    config = _resolve_backend(args)
    records = _ingest_strict(args.corpus)
    years = {record.record_id: record.year for record in records}

    run_a, ledger_a = _run_batch(args, config, args.seed)
    run_b, ledger_b = _run_batch(args, config, args.seed + 1)
    write_predictions(run_a, out / "predictions_a.jsonl")
    write_predictions(run_b, out / "predictions_b.jsonl")

    result = agreement(run_a, run_b, years)
    body = agreement_to_dict(result)
    body["seeds"] = [args.seed, args.seed + 1]
    _write_json(out / "agreement.json", body)
    _write_json(out / "usage.json", _usage_body(ledger_a.add(ledger_b)))
    _finish(
        manifest,
        out,
        ["predictions_a.jsonl", "predictions_b.jsonl", "agreement.json", "usage.json"],
    )
    average = body["average"]
    print(
        f"agreement over {result.compared} records: "
        f"{'n/a' if average is None else average}"
    )
    return 0


def cmd_trends(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    inputs = {"corpus": args.corpus, "predictions": args.predictions}
    manifest = _manifest(args, inputs)
    records = _ingest_strict(args.corpus)
    predictions = read_predictions(args.predictions)
    positive_ids = {
        p.record_id
        for p in predictions
        if isinstance(p, Prediction) and p.verdict is Verdict.POSITIVE
    }
    missing = sorted(
        positive_ids - {record.record_id for record in records}
    )
    if missing:
        shown = ", ".join(repr(i) for i in missing[:5])
        raise CliError(f"predictions without corpus records: {shown}")
    chosen = [r for r in records if r.record_id in positive_ids]
    if not chosen:
        raise CliError("no predicted positives to analyze")

    config = RankConfig(
        window=args.window,
        damping=args.damping,
        top_fraction=args.top_fraction,
    )
    stopwords = load_stopwords(args.stopwords)
    theme_map = load_theme_map(args.themes)
    texts = [f"{record.title}. {record.abstract}" for record in chosen]
    counts, themed = phrase_trends(
        texts, config=config, stopwords=stopwords, theme_map=theme_map
    )

    _write_json(
        out / "phrases.json",
        [{"phrase": phrase, "count": count} for phrase, count in ranked_phrases(counts)],
    )
    _write_json(
        out / "themes.json",
        {
            theme: [{"phrase": p, "count": c} for p, c in phrases]
            for theme, phrases in themed.items()
        },
    )
    _write_json(out / "treemap.json", treemap_export(themed))
    _finish(manifest, out, ["phrases.json", "themes.json", "treemap.json"])
    print(
        f"extracted {len(counts)} phrases from {len(chosen)} predicted positives"
    )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from citecast.service import ServiceSettings, create_app

    config = _resolve_backend(args)
    settings = ServiceSettings(
        backend=config,
        template_dir=args.templates,
        year_min=args.year_min,
        year_max=args.year_max,
        seed=args.seed,
        positive_bias=args.positive_bias,
        flip_rate=args.flip_rate,
    )
    app = create_app(settings)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", default="mock", help="backend profile name")
    parser.add_argument(
        "--backends-config", default=None, help="JSON file with backend profiles"
    )
    parser.add_argument("--seed", type=int, default=0, help="mock determinism seed")
    parser.add_argument(
        "--positive-bias",
        type=float,
        default=0.5,
        help="mock probability of a positive base verdict",
    )
    parser.add_argument(
        "--flip-rate",
        type=float,
        default=0.0,
        help="mock probability of flipping the base verdict per seed",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="citecast",
        description="Predict highly cited papers from publication-time text.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("ingest", help="validate a corpus and summarize it")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_ingest)

    p = commands.add_parser("label", help="assign per-year top-percentile labels")
    p.add_argument("--corpus", required=True)
    p.add_argument("--k", type=float, default=5.0, help="top percentage, e.g. 5")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_label)

    p = commands.add_parser("assemble", help="render era prompts for each record")
    p.add_argument("--corpus", required=True)
    p.add_argument("--templates", default=None, help="template directory (default: packaged)")
    p.add_argument(
        "--skip-ungrouped",
        action="store_true",
        help="skip records whose year has no template instead of failing",
    )
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_assemble)

    p = commands.add_parser("predict", help="run prompts through a backend")
    p.add_argument("--bundles", required=True)
    _add_backend_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_predict)

    p = commands.add_parser("evaluate", help="score predictions against labels")
    p.add_argument("--labels", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--corpus", default=None, help="adds a journal breakdown")
    p.add_argument("--backend-name", default="unknown", help="name shown in the report")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_evaluate)

    p = commands.add_parser(
        "stability", help="run a batch twice and measure verdict agreement"
    )
    p.add_argument("--bundles", required=True)
    p.add_argument("--corpus", required=True, help="source of publication years")
    _add_backend_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_stability)

    p = commands.add_parser("trends", help="extract phrases from predicted positives")
    p.add_argument("--corpus", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--themes", default=None, help="theme config (default: packaged)")
    p.add_argument("--stopwords", default=None, help="stopword list (default: packaged)")
    p.add_argument("--window", type=int, default=2)
    p.add_argument("--damping", type=float, default=0.85)
    p.add_argument("--top-fraction", type=float, default=1.0 / 3.0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_trends)

    p = commands.add_parser("serve", help="run the prediction service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--templates", default=None, help="template directory (default: packaged)")
    p.add_argument("--year-min", type=int, default=1991)
    p.add_argument("--year-max", type=int, default=2100)
    _add_backend_flags(p)
    p.set_defaults(handler=cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except _EXPECTED_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
