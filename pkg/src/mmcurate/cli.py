"""Command-line entry points.

Every command ends by printing exactly one JSON object on its last stdout
line, so wrapping scripts can parse results without scraping logs. Exit
codes: 0 all clean, 1 the run finished but some records failed (or a
runtime error), 2 bad usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from .cache import FileCache
from .errors import MmcurateError
from .henna import (
    AttractionSource,
    Taxonomy,
    generate_items,
    validate_benchmark,
)
from .instructify import (
    ARABIC_CHOICE_LABELS,
    TemplateSet,
    mcq_to_instruction,
    vqa_to_instruction,
)
from .judging import JudgeItem, replay_raw, run_judging
from .manifest import AdapterConfig, build_manifest, format_param_count
from .metrics import (
    McqItem,
    dimension_report,
    format_dimension_table,
    load_predictions,
    mcq_accuracy,
    vqa_accuracy,
)
from .pipeline import FilterConfig, filter_records, run_pipeline, translate_records
from .providers import (
    EchoTranslationProvider,
    HashEmbeddingProvider,
    HttpEmbeddingProvider,
    HttpJudgeProvider,
    HttpTranslationProvider,
    RetryPolicy,
)
from .records import compute_stats, load_records, write_records

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED_RECORDS = 1
EXIT_USAGE = 2


def _emit(summary: dict[str, Any]) -> None:
    print(json.dumps(summary, ensure_ascii=False, sort_keys=True))


def _load_config(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    if not isinstance(data, dict):
        raise MmcurateError("config file must hold a JSON object")
    return data


def _setting(
    args: argparse.Namespace,
    config: dict[str, Any],
    key: str,
    default: Any = None,
    env: str | None = None,
) -> Any:
    """Flag beats config file beats environment beats default. Absent flags are None."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    if env and env in os.environ:
        return os.environ[env]
    return default


def _cache(args: argparse.Namespace, config: dict[str, Any]) -> FileCache | None:
    cache_dir = _setting(args, config, "cache_dir")
    return FileCache(cache_dir) if cache_dir else None


def _retry_policy(args: argparse.Namespace, config: dict[str, Any]) -> RetryPolicy:
    attempts, schedule = _filter_config(args, config).retry
    return RetryPolicy(max_attempts=attempts, schedule=tuple(schedule))


def _translation_provider(args: argparse.Namespace, config: dict[str, Any]):
    kind = _setting(args, config, "translator", "echo")
    if kind == "echo":
        return EchoTranslationProvider()
    if kind == "http":
        url = _setting(args, config, "translate_url")
        if not url:
            raise MmcurateError("http translator needs --translate-url")
        key = _setting(args, config, "translate_api_key", env="TRANSLATE_API_KEY")
        return HttpTranslationProvider(url, api_key=key, retry=_retry_policy(args, config))
    raise MmcurateError(f"unknown translator {kind!r}")


def _embedding_provider(args: argparse.Namespace, config: dict[str, Any]):
    kind = _setting(args, config, "embedder", "hash")
    if kind == "hash":
        return HashEmbeddingProvider()
    if kind == "http":
        url = _setting(args, config, "embed_url")
        if not url:
            raise MmcurateError("http embedder needs --embed-url")
        key = _setting(args, config, "embed_api_key", env="EMBED_API_KEY")
        return HttpEmbeddingProvider(url, api_key=key, retry=_retry_policy(args, config))
    raise MmcurateError(f"unknown embedder {kind!r}")


def _judge_provider(args: argparse.Namespace, config: dict[str, Any]):
    url = _setting(args, config, "judge_url")
    if not url:
        raise MmcurateError("judging needs --judge-url")
    key = _setting(args, config, "judge_api_key", env="JUDGE_API_KEY")
    return HttpJudgeProvider(url, api_key=key, retry=_retry_policy(args, config))


def _filter_config(args: argparse.Namespace, config: dict[str, Any]) -> FilterConfig:
    attempts = int(_setting(args, config, "retry_attempts", 3))
    schedule = _setting(args, config, "retry_backoff", [1.0, 4.0, 16.0])
    if isinstance(schedule, str):
        schedule = [float(part) for part in schedule.split(",") if part]
    return FilterConfig(
        threshold=float(_setting(args, config, "threshold", 0.80)),
        mode=_setting(args, config, "mode", "strict_greater"),
        policy=_setting(args, config, "policy", "all_fields"),
        batch_size=int(_setting(args, config, "batch_size", 32)),
        max_in_flight=int(_setting(args, config, "concurrency", 4)),
        retry=(attempts, tuple(float(s) for s in schedule)),
    )


def _read_jsonl(path: str, required: Sequence[str] = ()) -> list[dict[str, Any]]:
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MmcurateError(f"{path}: line {line_number}: parse failure ({exc.msg})")
            missing = [key for key in required if key not in row]
            if missing:
                raise MmcurateError(
                    f"{path}: line {line_number}: missing field(s) {', '.join(missing)}"
                )
            rows.append(row)
    return rows


def cmd_translate(args: argparse.Namespace, config: dict[str, Any]) -> int:
    records = list(
        load_records(args.input, args.schema, strict=not args.lenient, dataset_name=args.dataset)
    )
    if args.dry_run:
        _emit({"command": "translate", "dry_run": True, "input": len(records)})
        return EXIT_OK
    out = translate_records(
        records,
        _translation_provider(args, config),
        _cache(args, config),
        args.src_lang,
        args.tgt_lang,
        _filter_config(args, config),
    )
    failed = sum(1 for r in out if r.status == "failed")
    write_records(args.output, out)
    _emit(
        {
            "command": "translate",
            "input": len(records),
            "translated": len(records) - failed,
            "failed": failed,
            "output": str(args.output),
        }
    )
    return EXIT_FAILED_RECORDS if failed else EXIT_OK


def cmd_filter(args: argparse.Namespace, config: dict[str, Any]) -> int:
    records = list(load_records(args.input, args.schema, strict=not args.lenient))
    if args.dry_run:
        _emit({"command": "filter", "dry_run": True, "input": len(records)})
        return EXIT_OK
    fc = _filter_config(args, config)
    kept, rejected, failed, decisions = filter_records(
        records, _embedding_provider(args, config), _cache(args, config), fc
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_records(out_dir / "kept.jsonl", kept)
    write_records(out_dir / "rejected.jsonl", rejected)
    write_records(out_dir / "failed.jsonl", failed)
    with (out_dir / "decisions.jsonl").open("w", encoding="utf-8") as handle:
        for decision in decisions:
            handle.write(json.dumps(decision.to_dict(), ensure_ascii=False) + "\n")
    _emit(
        {
            "command": "filter",
            "input": len(records),
            "kept": len(kept),
            "rejected": len(rejected),
            "failed": len(failed),
            "threshold": fc.threshold,
            "mode": fc.mode,
            "out_dir": str(out_dir),
        }
    )
    return EXIT_FAILED_RECORDS if failed else EXIT_OK


def cmd_pipeline(args: argparse.Namespace, config: dict[str, Any]) -> int:
    records = list(
        load_records(args.input, args.schema, strict=not args.lenient, dataset_name=args.dataset)
    )
    if args.dry_run:
        _emit({"command": "pipeline", "dry_run": True, "input": len(records)})
        return EXIT_OK
    summary = run_pipeline(
        records,
        _translation_provider(args, config),
        _embedding_provider(args, config),
        _cache(args, config),
        args.out_dir,
        args.src_lang,
        args.tgt_lang,
        _filter_config(args, config),
        dataset_name=args.dataset or "dataset",
    )
    summary["command"] = "pipeline"
    _emit(summary)
    return EXIT_FAILED_RECORDS if summary["failed"] else EXIT_OK


def cmd_stats(args: argparse.Namespace, config: dict[str, Any]) -> int:
    before = list(load_records(args.before, args.schema, strict=False))
    after = list(load_records(args.after, args.schema, strict=False))
    rows = compute_stats(before, after, args.name)
    summary = {"command": "stats", "rows": [r.to_dict() for r in rows]}
    if args.dry_run:
        summary["dry_run"] = True
    _emit(summary)
    return EXIT_OK


def cmd_instructify(args: argparse.Namespace, config: dict[str, Any]) -> int:
    if args.task == "vqa":
        templates = (
            TemplateSet.from_file(args.templates, rng_seed=args.seed)
            if args.templates
            else TemplateSet.default_arabic(rng_seed=args.seed)
        )
        records = list(load_records(args.input, "vqa", strict=not args.lenient))
        if args.dry_run:
            _emit({"command": "instructify", "dry_run": True, "input": len(records)})
            return EXIT_OK
        out = [vqa_to_instruction(r, templates) for r in records]
    else:
        rows = _read_jsonl(args.input)
        if args.dry_run:
            _emit({"command": "instructify", "dry_run": True, "input": len(rows)})
            return EXIT_OK
        out = [
            mcq_to_instruction(
                record_id=str(row["id"]),
                image=str(row.get("image", "")),
                question=str(row["question"]),
                choices=[str(c) for c in row["choices"]],
                answer_index=int(row["answer_index"]),
            )
            for row in rows
        ]
    count = write_records(args.output, out)
    _emit(
        {
            "command": "instructify",
            "task": args.task,
            "input": count,
            "written": count,
            "output": str(args.output),
        }
    )
    return EXIT_OK


def cmd_eval_vqa(args: argparse.Namespace, config: dict[str, Any]) -> int:
    per_model = load_predictions(args.predictions)
    golds: dict[str, list[str]] = {}
    for record in load_records(args.golds, "vqa", strict=False):
        answers = record.answers_tgt if args.field == "tgt" else record.answers_src
        if answers is None:
            raise MmcurateError(f"record {record.id} has no {args.field} answers")
        golds[record.id] = answers
    if args.dry_run:
        _emit({"command": "eval-vqa", "dry_run": True, "n": len(golds)})
        return EXIT_OK
    models = []
    for model_id in sorted(per_model):
        scored = vqa_accuracy(
            per_model[model_id], golds, require_full_coverage=not args.partial
        )
        models.append(
            {
                "model_id": model_id,
                "accuracy": scored["accuracy"],
                "correct": scored["correct"],
                "total": scored["total"],
            }
        )
    _emit({"command": "eval-vqa", "n": len(golds), "models": models})
    return EXIT_OK


def cmd_eval_mcq(args: argparse.Namespace, config: dict[str, Any]) -> int:
    per_model = load_predictions(args.predictions)
    items = []
    for row in _read_jsonl(args.items, required=("id", "choices", "answer_index")):
        choices = [str(c) for c in row["choices"]]
        try:
            gold_index = int(row["answer_index"])
        except (TypeError, ValueError):
            raise MmcurateError(
                f"item {row['id']}: answer_index {row['answer_index']!r} is not an integer"
            )
        items.append(
            McqItem(
                item_id=str(row["id"]),
                labels=list(ARABIC_CHOICE_LABELS[: len(choices)]),
                choices=choices,
                gold_index=gold_index,
                dimension=row.get("dimension"),
            )
        )
    if args.dry_run:
        _emit({"command": "eval-mcq", "dry_run": True, "n": len(items)})
        return EXIT_OK
    tagged = bool(items) and all(item.dimension for item in items)
    models = []
    for model_id in sorted(per_model):
        scored = mcq_accuracy(per_model[model_id], items)
        entry: dict[str, Any] = {
            "model_id": model_id,
            "accuracy": scored["accuracy"],
            "correct": scored["correct"],
            "total": scored["total"],
        }
        if tagged:
            report = dimension_report(per_model[model_id], items)
            entry["dimensions"] = report["dimensions"]
            print(f"{model_id}:")
            print(format_dimension_table(report))
        models.append(entry)
    _emit({"command": "eval-mcq", "n": len(items), "models": models})
    return EXIT_OK


def cmd_judge(args: argparse.Namespace, config: dict[str, Any]) -> int:
    if args.replay:
        result = replay_raw(args.replay)
    else:
        rows = _read_jsonl(
            args.items, required=("id", "question", "gold_answer", "model_answer")
        )
        items = [
            JudgeItem(
                id=str(row["id"]),
                question=str(row["question"]),
                gold_answer=str(row["gold_answer"]),
                model_answer=str(row["model_answer"]),
                image=row.get("image"),
                country=row.get("country"),
            )
            for row in rows
        ]
        if args.dry_run:
            _emit({"command": "judge", "dry_run": True, "n": len(items)})
            return EXIT_OK
        result = run_judging(
            items,
            _judge_provider(args, config),
            cache=_cache(args, config),
            raw_path=args.raw_out,
            template_path=args.template,
        )
    summary: dict[str, Any] = {
        "command": "judge",
        "judged": len(result.judgments),
        "unjudged": len(result.unjudged),
    }
    if result.judgments:
        summary["scores"] = result.aggregate
    _emit(summary)
    return EXIT_FAILED_RECORDS if result.unjudged else EXIT_OK


def _taxonomy(args: argparse.Namespace) -> Taxonomy:
    return Taxonomy.from_file(args.taxonomy) if args.taxonomy else Taxonomy()


def cmd_henna_gen(args: argparse.Namespace, config: dict[str, Any]) -> int:
    rows = _read_jsonl(args.sources, required=("name", "country", "image", "wiki_text"))
    sources = [
        AttractionSource(
            name=str(row["name"]),
            country=str(row["country"]),
            image=str(row["image"]),
            wiki_text=str(row["wiki_text"]),
            wiki_title=str(row.get("wiki_title", "")),
            category=row.get("category"),
        )
        for row in rows
    ]
    if args.dry_run:
        _emit({"command": "henna-gen", "dry_run": True, "sources": len(sources)})
        return EXIT_OK
    items = generate_items(
        sources,
        _judge_provider(args, config),
        n_per_source=args.questions,
        taxonomy=_taxonomy(args),
        max_in_flight=int(_setting(args, config, "concurrency", 4)),
    )
    count = write_records(args.output, items)
    _emit(
        {
            "command": "henna-gen",
            "sources": len(sources),
            "items": count,
            "output": str(args.output),
        }
    )
    return EXIT_OK


def cmd_henna_validate(args: argparse.Namespace, config: dict[str, Any]) -> int:
    items = list(load_records(args.input, "benchmark", strict=not args.lenient))
    report = validate_benchmark(
        items, _taxonomy(args), min_images_per_country=args.min_images
    )
    report["command"] = "henna-validate"
    if args.dry_run:
        report["dry_run"] = True
    _emit(report)
    return EXIT_FAILED_RECORDS if report["violations"] else EXIT_OK


def cmd_manifest(args: argparse.Namespace, config: dict[str, Any]) -> int:
    adapter_flags = (
        args.adapter_rank, args.adapter_alpha, args.adapter_dropout, args.adapter_targets,
    )
    adapter = None
    if any(flag is not None for flag in adapter_flags):
        if any(flag is None for flag in adapter_flags):
            raise MmcurateError(
                "--adapter-rank, --adapter-alpha, --adapter-dropout, and "
                "--adapter-targets go together; pass all or none"
            )
        adapter = AdapterConfig(
            rank=args.adapter_rank,
            alpha=args.adapter_alpha,
            dropout=args.adapter_dropout,
            target_modules=tuple(args.adapter_targets.split(",")),
        )
    manifest = build_manifest(args.arch, adapter)
    if args.dry_run:
        _emit({"command": "manifest", "dry_run": True, "architecture": args.arch})
        return EXIT_OK
    if args.output:
        with open(args.output, "w", encoding="utf-8") as handle:
            json.dump(manifest, handle, ensure_ascii=False, indent=2)
            handle.write("\n")
    summary = {
        "command": "manifest",
        "total": format_param_count(manifest["total_param_count"]),
        "manifest": manifest,
    }
    if args.output:
        summary["output"] = str(args.output)
    _emit(summary)
    return EXIT_OK


def cmd_serve(args: argparse.Namespace, config: dict[str, Any]) -> int:
    from .service import create_app

    if args.dry_run:
        _emit(
            {
                "command": "serve",
                "dry_run": True,
                "db": str(args.db),
                "host": args.host,
                "port": args.port,
            }
        )
        return EXIT_OK
    import uvicorn

    app = create_app(args.db, media_dir=args.media_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--cache-dir", dest="cache_dir", help="provider cache directory")
    parser.add_argument("--retry-attempts", dest="retry_attempts", type=int)
    parser.add_argument(
        "--retry-backoff", dest="retry_backoff",
        help="comma-separated delays in seconds, e.g. 1,4,16",
    )
    parser.add_argument("--dry-run", action="store_true", help="validate inputs, run nothing")
    parser.add_argument("--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmcurate",
        description="Curate and evaluate translated multimodal instruction data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("translate", help="translate source fields of a record file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--schema", choices=("caption", "vqa"), default="caption")
    p.add_argument("--src-lang", default="en")
    p.add_argument("--tgt-lang", default="ar")
    p.add_argument("--dataset", help="dataset name used to synthesize missing ids")
    p.add_argument("--lenient", action="store_true", help="ignore unknown fields")
    p.add_argument("--translator", choices=("echo", "http"))
    p.add_argument("--translate-url", dest="translate_url")
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--concurrency", dest="concurrency", type=int, help="in-flight provider batches (default 4)")
    _add_common(p)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("filter", help="keep records whose translation is faithful")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--schema", choices=("caption", "vqa"), default="caption")
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--threshold", type=float)
    p.add_argument("--mode", choices=("strict_greater", "greater_equal"))
    p.add_argument("--policy", choices=("all_fields", "concatenated"))
    p.add_argument("--embedder", choices=("hash", "http"))
    p.add_argument("--embed-url", dest="embed_url")
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--concurrency", dest="concurrency", type=int, help="in-flight provider batches (default 4)")
    _add_common(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("pipeline", help="translate then filter in one run")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--schema", choices=("caption", "vqa"), default="caption")
    p.add_argument("--src-lang", default="en")
    p.add_argument("--tgt-lang", default="ar")
    p.add_argument("--dataset")
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--threshold", type=float)
    p.add_argument("--mode", choices=("strict_greater", "greater_equal"))
    p.add_argument("--policy", choices=("all_fields", "concatenated"))
    p.add_argument("--translator", choices=("echo", "http"))
    p.add_argument("--translate-url", dest="translate_url")
    p.add_argument("--embedder", choices=("hash", "http"))
    p.add_argument("--embed-url", dest="embed_url")
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--concurrency", dest="concurrency", type=int, help="in-flight provider batches (default 4)")
    _add_common(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("stats", help="kept/input counts per split with reduction ratios")
    p.add_argument("--before", required=True)
    p.add_argument("--after", required=True)
    p.add_argument("--schema", choices=("caption", "vqa"), default="caption")
    p.add_argument("--name", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("instructify", help="convert records to instruction examples")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--task", choices=("vqa", "mcq"), default="vqa")
    p.add_argument("--templates", help="plain-text template file, one template per line")
    p.add_argument("--seed", type=int, default=0, help="template-choice seed")
    p.add_argument("--lenient", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_instructify)

    p_eval = sub.add_parser("eval", help="accuracy metrics")
    eval_sub = p_eval.add_subparsers(dest="eval_command", required=True)

    p = eval_sub.add_parser("vqa", help="exact-match accuracy for open answers")
    p.add_argument("--predictions", required=True)
    p.add_argument("--golds", required=True)
    p.add_argument("--field", choices=("tgt", "src"), default="tgt")
    p.add_argument(
        "--partial", action="store_true",
        help="score only predicted items instead of counting gaps as wrong",
    )
    _add_common(p)
    p.set_defaults(func=cmd_eval_vqa)

    p = eval_sub.add_parser("mcq", help="lettered-choice accuracy")
    p.add_argument("--predictions", required=True)
    p.add_argument("--items", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_eval_mcq)

    p = sub.add_parser("judge", help="rubric-score model answers with a judge model")
    p.add_argument("--items", help="JSONL of question/gold_answer/model_answer rows")
    p.add_argument("--judge-url", dest="judge_url")
    p.add_argument("--template", help="override the built-in rubric template")
    p.add_argument("--raw-out", help="append raw judge responses here")
    p.add_argument("--replay", help="re-parse a raw response file instead of calling a judge")
    _add_common(p)
    p.set_defaults(func=cmd_judge)

    p_henna = sub.add_parser("henna", help="cultural benchmark generation")
    henna_sub = p_henna.add_subparsers(dest="henna_command", required=True)

    p = henna_sub.add_parser("gen", help="generate QA pairs from attraction articles")
    p.add_argument("--sources", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--questions", type=int, default=10)
    p.add_argument("--taxonomy", help="JSON file with countries/categories lists")
    p.add_argument("--judge-url", dest="judge_url")
    p.add_argument("--concurrency", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_henna_gen)

    p = henna_sub.add_parser("validate", help="structural checks on a benchmark file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--min-images", type=int, default=10)
    p.add_argument("--taxonomy", help="JSON file with countries/categories lists")
    p.add_argument("--lenient", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_henna_validate)

    p = sub.add_parser("manifest", help="emit a two-stage training manifest")
    p.add_argument("--arch", required=True)
    p.add_argument("--out", dest="output")
    p.add_argument("--adapter-rank", type=int)
    p.add_argument("--adapter-alpha", type=float)
    p.add_argument("--adapter-dropout", type=float)
    p.add_argument("--adapter-targets", help="comma-separated module names")
    _add_common(p)
    p.set_defaults(func=cmd_manifest)

    p = sub.add_parser("serve", help="run the blind rating service")
    p.add_argument("--db", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--media-dir")
    _add_common(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _load_config(getattr(args, "config", None))
        return args.func(args, config)
    except MmcurateError as exc:
        print(json.dumps({"error": str(exc)}, ensure_ascii=False), file=sys.stderr)
        return EXIT_FAILED_RECORDS
    except FileNotFoundError as exc:
        print(json.dumps({"error": str(exc)}, ensure_ascii=False), file=sys.stderr)
        return EXIT_FAILED_RECORDS


if __name__ == "__main__":
    sys.exit(main())
