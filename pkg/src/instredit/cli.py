"""Command-line entry point: one subcommand per workflow stage.

The ``pipeline`` subcommand chains generate -> apply -> judge -> filter ->
split over a records file and writes a manifest that, together with the
inputs and the provider transcript, makes every output reproducible.

Exit codes: 0 on success, 1 on validation/usage errors, 2 on provider
errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from instredit import __version__
from instredit.diffs import MismatchError, compute_diff, render_diff
from instredit.editing import (
    DEFAULT_MAX_CHUNK_TOKENS,
    EmptyOutputError,
    OversizeLineError,
    TurnError,
    apply_edit,
    apply_multi_turn,
    generate_turn_sequence,
)
from instredit.evaluation import MissingOutputError, evaluate
from instredit.judging import (
    DEFAULT_ALPHA,
    MissingScoreError,
    ScoreParseError,
    filter_records,
    score_records,
)
from instredit.metrics import EmptyInputError, MetricReport
from instredit.providers import (
    GenerationSettings,
    Provider,
    ProviderError,
    RecordingProvider,
    ReplayProvider,
    Transcript,
    complete_many,
    make_provider,
)
from instredit.records import (
    Category,
    EmptySourceError,
    InsufficientDataError,
    SamplingConfig,
    SchemaError,
    SourceFormatError,
    ingest,
    read_records,
    split_dataset,
    with_fields,
    write_records,
)
from instredit.templates import (
    ParseError,
    TemplateError,
    build_instruction_prompt,
    parse_edit_request,
    template_digests,
)

_VALIDATION_ERRORS = (
    ValueError,
    SchemaError,
    SourceFormatError,
    EmptySourceError,
    InsufficientDataError,
    TemplateError,
    ParseError,
    ScoreParseError,
    MissingScoreError,
    MissingOutputError,
    EmptyInputError,
    MismatchError,
    OversizeLineError,
    EmptyOutputError,
    OSError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def load_config(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` configuration; '#' starts a comment line."""
    config: dict[str, str] = {}
    for line_number, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{line_number}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        config[key.strip()] = value.strip()
    return config


class _Options:
    """Flag values with config-file fallback; flags always win."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = load_config(args.config) if getattr(args, "config", None) else {}

    def get(self, name: str, default=None, cast=str):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        raw = self.config.get(name)
        if raw is not None:
            return cast(raw)
        return default


def _settings(opts: _Options) -> GenerationSettings:
    return GenerationSettings(
        temperature=opts.get("temperature", 0.2, float),
        top_p=opts.get("top_p", 0.95, float),
        max_output_tokens=opts.get("max_output_tokens", 4096, int),
    )


def _provider(opts: _Options) -> Provider:
    replay = opts.get("replay")
    if replay:
        return ReplayProvider(Transcript.load(replay))
    name = opts.get("provider")
    if not name:
        raise ValueError("no provider configured: pass --provider or --replay")
    provider = make_provider(
        name,
        endpoint=opts.get("endpoint"),
        model=opts.get("model"),
        api_key_env=opts.get("api_key_env"),
    )
    record = opts.get("record")
    if record:
        path = Path(record)
        transcript = Transcript.load(path) if path.exists() else Transcript()
        provider = RecordingProvider(provider, transcript, path)
    return provider


def _add_provider_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--provider", help="identity|replacer|workflow|constant:N|http")
    parser.add_argument("--replay", help="answer all calls from this transcript JSONL")
    parser.add_argument("--record", help="record all calls into this transcript JSONL")
    parser.add_argument("--endpoint", help="http provider endpoint URL")
    parser.add_argument("--model", help="http provider model name")
    parser.add_argument("--api-key-env", dest="api_key_env",
                        help="environment variable holding the API key")
    parser.add_argument("--temperature", type=float)
    parser.add_argument("--top-p", dest="top_p", type=float)
    parser.add_argument("--max-output-tokens", dest="max_output_tokens", type=int)
    parser.add_argument("--jobs", type=int, help="parallel requests (default 1)")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--templates", help="override the built-in template directory")


# --------------------------------------------------------------------------
# Subcommand handlers


def cmd_diff(args: argparse.Namespace) -> int:
    original = Path(args.original).read_text(encoding="utf-8")
    edited = Path(args.edited).read_text(encoding="utf-8")
    rendering = render_diff(compute_diff(original, edited))
    if rendering:
        print(rendering)
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    opts = _Options(args)
    category = Category(args.category)
    src = Path(args.src)
    files = sorted(p for p in src.iterdir() if p.is_file()) if src.is_dir() else [src]
    sampling = SamplingConfig(
        seed=opts.get("seed", 0, int),
        min_tokens=opts.get("min_tokens", 200, int),
        max_tokens=opts.get("max_tokens", 2000, int),
        max_records=opts.get("max_records", None, int),
    )
    records = ingest(category, files, sampling)
    write_records(records, args.out)
    _log(f"ingested {len(records)} {category.value} records -> {args.out}")
    return 0


def _generate_requests(records, provider, settings, opts):
    """Fill in one edit request per record that does not have one yet."""
    pending = [r for r in records if not r.edit_requests]
    prompts = [
        build_instruction_prompt(r, opts.get("templates")) for r in pending
    ]
    results = complete_many(
        provider, prompts, settings, concurrency_limit=opts.get("jobs", 1, int)
    )
    by_id: dict[str, str] = {}
    for record, result in zip(pending, results):
        if isinstance(result, Exception):
            raise result
        by_id[record.id] = parse_edit_request(result)
    return [
        with_fields(r, edit_requests=[by_id[r.id]]) if r.id in by_id else r
        for r in records
    ]


def cmd_generate(args: argparse.Namespace) -> int:
    opts = _Options(args)
    records = read_records(args.infile)
    updated = _generate_requests(records, _provider(opts), _settings(opts), opts)
    write_records(updated, args.out)
    _log(f"generated instructions for {len(updated)} records -> {args.out}")
    return 0


def _apply_edits(records, provider, settings, opts):
    """Apply the first edit request of each record; store edited and diff."""
    max_chunk = opts.get("max_chunk_tokens", DEFAULT_MAX_CHUNK_TOKENS, int)
    out = []
    for record in records:
        if not record.edit_requests:
            raise ValueError(f"record {record.id} has no edit request to apply")
        if record.edited is not None:
            out.append(record)
            continue
        edited = apply_edit(
            record.original,
            record.edit_requests[0],
            provider,
            settings,
            max_chunk_tokens=max_chunk,
            templates_dir=opts.get("templates"),
            jobs=opts.get("jobs", 1, int),
        )
        rendering = render_diff(compute_diff(record.original, edited))
        out.append(with_fields(record, edited=edited, diff=rendering))
    return out


def cmd_apply(args: argparse.Namespace) -> int:
    opts = _Options(args)
    records = read_records(args.infile)
    updated = _apply_edits(records, _provider(opts), _settings(opts), opts)
    write_records(updated, args.out)
    _log(f"applied edits to {len(updated)} records -> {args.out}")
    return 0


def _write_quarantine(quarantined, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record, reason in quarantined:
            handle.write(
                json.dumps(
                    {"record": record.to_json_dict(), "reason": reason},
                    ensure_ascii=False,
                )
            )
            handle.write("\n")


def cmd_judge(args: argparse.Namespace) -> int:
    opts = _Options(args)
    records = read_records(args.infile)
    alpha = opts.get("alpha", DEFAULT_ALPHA, int)
    scored, quarantined = score_records(
        records,
        _provider(opts),
        _settings(opts),
        templates_dir=opts.get("templates"),
        jobs=opts.get("jobs", 1, int),
        strict=bool(args.strict),
    )
    kept, rejected = filter_records(scored, alpha)
    write_records(kept, args.out_kept)
    write_records(rejected, args.out_rejected)
    if args.out_quarantine:
        _write_quarantine(quarantined, args.out_quarantine)
    elif quarantined:
        raise ScoreParseError(
            f"{len(quarantined)} records unparseable; pass --out-quarantine"
        )
    _log(
        f"judged {len(records)} records: {len(kept)} kept, "
        f"{len(rejected)} rejected, {len(quarantined)} quarantined (alpha={alpha})"
    )
    return 0


def cmd_filter(args: argparse.Namespace) -> int:
    opts = _Options(args)
    records = read_records(args.infile)
    alpha = opts.get("alpha", DEFAULT_ALPHA, int)
    kept, rejected = filter_records(records, alpha)
    write_records(kept, args.out_kept)
    write_records(rejected, args.out_rejected)
    _log(f"filtered: {len(kept)} kept, {len(rejected)} rejected (alpha={alpha})")
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    opts = _Options(args)
    records = read_records(args.infile)
    train, test = split_dataset(
        records,
        opts.get("test_fraction", 0.1, float),
        opts.get("seed", 0, int),
    )
    write_records(train, args.out_train)
    write_records(test, args.out_test)
    _log(f"split {len(records)} records into {len(train)} train / {len(test)} test")
    return 0


def _read_candidates(path: str | Path) -> dict[str, str]:
    candidates: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", line_number) from exc
            if not isinstance(data, dict) or "id" not in data or "output" not in data:
                raise SchemaError('expected {"id": ..., "output": ...}', line_number)
            candidates[data["id"]] = data["output"]
    return candidates


def _print_report(report: MetricReport) -> None:
    for cat in sorted(report.per_category, key=lambda c: c.value):
        score = report.per_category[cat]
        print(
            f"{cat.value:8s} bleu={score.bleu:.4f} rouge_l={score.rouge_l:.4f} "
            f"n={report.sample_count[cat]}"
        )
    print(
        f"{'overall':8s} bleu={report.overall.bleu:.4f} "
        f"rouge_l={report.overall.rouge_l:.4f} ({report.aggregation})"
    )


def cmd_eval(args: argparse.Namespace) -> int:
    records = read_records(args.test)
    candidates = _read_candidates(args.candidates)
    report = evaluate(records, candidates, weighted=bool(args.weighted))
    if args.report:
        Path(args.report).write_text(
            json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
    _print_report(report)
    return 0


def cmd_multiturn(args: argparse.Namespace) -> int:
    opts = _Options(args)
    records = read_records(args.infile)
    provider = _provider(opts)
    settings = _settings(opts)
    max_chunk = opts.get("max_chunk_tokens", DEFAULT_MAX_CHUNK_TOKENS, int)
    templates_dir = opts.get("templates")
    updated = []
    audit_rows = []
    for record in records:
        task = generate_turn_sequence(
            record, args.turns, provider, settings, templates_dir
        )
        result = apply_multi_turn(
            record.original,
            task,
            provider,
            settings,
            max_chunk_tokens=max_chunk,
            templates_dir=templates_dir,
            jobs=opts.get("jobs", 1, int),
        )
        rendering = render_diff(compute_diff(record.original, result.final))
        updated.append(
            with_fields(
                record,
                edit_requests=list(task.instructions),
                edited=result.final,
                diff=rendering,
            )
        )
        audit_rows.append({"id": record.id, "turns": list(result.turns)})
    write_records(updated, args.out)
    if args.audit:
        with open(args.audit, "w", encoding="utf-8") as handle:
            for row in audit_rows:
                handle.write(json.dumps(row, ensure_ascii=False))
                handle.write("\n")
    _log(f"multi-turn edited {len(updated)} records ({args.turns} turns) -> {args.out}")
    return 0


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def cmd_pipeline(args: argparse.Namespace) -> int:
    opts = _Options(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    provider = _provider(opts)
    settings = _settings(opts)
    alpha = opts.get("alpha", DEFAULT_ALPHA, int)
    seed = opts.get("seed", 0, int)
    test_fraction = opts.get("test_fraction", 0.1, float)
    max_chunk = opts.get("max_chunk_tokens", DEFAULT_MAX_CHUNK_TOKENS, int)

    records = read_records(args.infile)
    _log(f"pipeline: {len(records)} records in")

    records = _generate_requests(records, provider, settings, opts)
    generated_path = out_dir / "generated.jsonl"
    write_records(records, generated_path)
    _log("pipeline: instructions generated")

    records = _apply_edits(records, provider, settings, opts)
    edited_path = out_dir / "edited.jsonl"
    write_records(records, edited_path)
    _log("pipeline: edits applied")

    scored, quarantined = score_records(
        records,
        provider,
        settings,
        templates_dir=opts.get("templates"),
        jobs=opts.get("jobs", 1, int),
    )
    kept, rejected = filter_records(scored, alpha)
    kept_path = out_dir / "kept.jsonl"
    rejected_path = out_dir / "rejected.jsonl"
    quarantine_path = out_dir / "quarantine.jsonl"
    write_records(kept, kept_path)
    write_records(rejected, rejected_path)
    _write_quarantine(quarantined, quarantine_path)
    _log(
        f"pipeline: judged (kept {len(kept)}, rejected {len(rejected)}, "
        f"quarantined {len(quarantined)}, alpha={alpha})"
    )

    train, test = split_dataset(kept, test_fraction, seed)
    train_path = out_dir / "train.jsonl"
    test_path = out_dir / "test.jsonl"
    write_records(train, train_path)
    write_records(test, test_path)
    _log(f"pipeline: split into {len(train)} train / {len(test)} test")

    outputs = [
        generated_path,
        edited_path,
        kept_path,
        rejected_path,
        quarantine_path,
        train_path,
        test_path,
    ]
    manifest = {
        "version": __version__,
        "alpha": alpha,
        "seed": seed,
        "test_fraction": test_fraction,
        "max_chunk_tokens": max_chunk,
        "provider": provider.name,
        "settings": {
            "temperature": settings.temperature,
            "top_p": settings.top_p,
            "max_output_tokens": settings.max_output_tokens,
        },
        "templates": template_digests(opts.get("templates")),
        "input": {"path": str(args.infile), "sha256": _sha256_file(Path(args.infile))},
        "outputs": {path.name: _sha256_file(path) for path in outputs},
        "counts": {
            "in": len(records),
            "kept": len(kept),
            "rejected": len(rejected),
            "quarantined": len(quarantined),
            "train": len(train),
            "test": len(test),
        },
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _log(f"pipeline: manifest written -> {out_dir / 'manifest.json'}")
    return 0


# --------------------------------------------------------------------------
# Parser assembly


def build_parser() -> _Parser:
    parser = _Parser(prog="instredit", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("diff", help="render the diff of two text files")
    p.add_argument("--original", required=True)
    p.add_argument("--edited", required=True)
    p.set_defaults(handler=cmd_diff)

    p = sub.add_parser("ingest", help="build original-only records from sources")
    p.add_argument("--category", required=True, choices=[c.value for c in Category])
    p.add_argument("--src", required=True, help="source file or directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--min-tokens", dest="min_tokens", type=int)
    p.add_argument("--max-tokens", dest="max_tokens", type=int)
    p.add_argument("--max-records", dest="max_records", type=int)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("generate", help="generate one edit request per record")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    _add_provider_flags(p)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("apply", help="apply edit requests, store edited text + diff")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-chunk-tokens", dest="max_chunk_tokens", type=int)
    _add_common(p)
    _add_provider_flags(p)
    p.set_defaults(handler=cmd_apply)

    p = sub.add_parser("judge", help="score records and filter by threshold")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--alpha", type=int)
    p.add_argument("--strict", action="store_true",
                   help="require the judge output to be a bare score")
    p.add_argument("--out-kept", dest="out_kept", required=True)
    p.add_argument("--out-rejected", dest="out_rejected", required=True)
    p.add_argument("--out-quarantine", dest="out_quarantine")
    _add_common(p)
    _add_provider_flags(p)
    p.set_defaults(handler=cmd_judge)

    p = sub.add_parser("filter", help="partition already-scored records by threshold")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--alpha", type=int)
    p.add_argument("--out-kept", dest="out_kept", required=True)
    p.add_argument("--out-rejected", dest="out_rejected", required=True)
    _add_common(p)
    p.set_defaults(handler=cmd_filter)

    p = sub.add_parser("split", help="stratified train/test split")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-train", dest="out_train", required=True)
    p.add_argument("--out-test", dest="out_test", required=True)
    _add_common(p)
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("eval", help="score candidate outputs against references")
    p.add_argument("--test", required=True, help="test split records JSONL")
    p.add_argument("--candidates", required=True,
                   help='JSONL of {"id": ..., "output": ...}')
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--weighted", action="store_true",
                   help="overall = mean over samples instead of categories")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("multiturn", help="generate and apply K-turn edit sequences")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--turns", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--audit", help="write per-turn intermediate outputs here")
    p.add_argument("--max-chunk-tokens", dest="max_chunk_tokens", type=int)
    _add_common(p)
    _add_provider_flags(p)
    p.set_defaults(handler=cmd_multiturn)

    p = sub.add_parser("pipeline", help="generate -> apply -> judge -> filter -> split")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--alpha", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    p.add_argument("--max-chunk-tokens", dest="max_chunk_tokens", type=int)
    _add_common(p)
    _add_provider_flags(p)
    p.set_defaults(handler=cmd_pipeline)

    return parser


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _log(str(exc))
        return 1
    if not getattr(args, "handler", None):
        _log(parser.format_usage())
        return 1
    try:
        return args.handler(args)
    except TurnError as exc:
        _log(f"error: {exc}")
        return 2 if isinstance(exc.__cause__, ProviderError) else 1
    except ProviderError as exc:
        _log(f"provider error: {exc}")
        return 2
    except _VALIDATION_ERRORS as exc:
        _log(f"error: {exc}")
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
