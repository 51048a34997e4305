"""Command line front end.

Subcommands mirror the pipeline stages: parse, clean, assign, measures,
batch and serve. Exit code 0 means at least one trial/file succeeded, 2
means nothing succeeded, 1 is a usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from .asc_parser import parse_asc
from .batch import run_batch
from .cleaning import clean_fixations
from .config import PipelineConfig, load_config, save_config
from .errors import GazePipelineError, InvalidConfig
from .line_assign import assign_with_fallback, y_correction
from .stimulus import attach_ias_to_trials, build_stimulus

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_SUCCESS = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; the CLI contract reserves 2 for
    # "ran but nothing succeeded", so remap.
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="gazepipeline", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_files=True):
        if needs_files:
            p.add_argument("files", nargs="+", help="ASC or zip input files")
        p.add_argument("--config", help="pipeline config JSON file")
        p.add_argument("--out", default="gazepipeline_out", help="output directory")
        p.add_argument("--workers", type=int, help="parallel worker count")
        p.add_argument("--ias", help="directory holding .ias interest-area files")
        p.add_argument("--method", help="comma-separated assignment methods")

    for name in ("parse", "clean", "assign", "measures", "batch"):
        common(sub.add_parser(name))
    serve = sub.add_parser("serve")
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument("--host", default="127.0.0.1")
    return parser


def _load_cli_config(args) -> PipelineConfig:
    if args.config:
        config = load_config(Path(args.config).read_text())
    else:
        config = PipelineConfig()
    if getattr(args, "workers", None) is not None:
        if args.workers < 1:
            raise InvalidConfig("workers", "must be an integer >= 1")
        config.workers = args.workers
    if getattr(args, "method", None):
        config.methods = [m.strip() for m in args.method.split(",") if m.strip()]
    config.validate()
    return config


def _read_inputs(args) -> tuple[list[tuple[str, bytes]], dict[str, str]]:
    files = []
    for name in args.files:
        path = Path(name)
        if not path.is_file():
            raise FileNotFoundError(name)
        files.append((path.name, path.read_bytes()))
    ias: dict[str, str] = {}
    if args.ias:
        ias_dir = Path(args.ias)
        if not ias_dir.is_dir():
            raise FileNotFoundError(args.ias)
        for p in sorted(ias_dir.glob("*.ias")):
            ias[p.name] = p.read_text()
    return files, ias


def _stem(name: str) -> str:
    return Path(name).stem or "file"


def _parsed_trials(files, ias, config):
    """Parse each file, attach stimuli; yields (name, trials, warnings)."""
    for name, data in files:
        warnings: list[str] = []
        try:
            parsed = parse_asc(data.decode("utf-8", errors="replace"), config.parse)
        except GazePipelineError as exc:
            yield name, [], [str(exc)]
            continue
        warnings.extend(parsed.warnings)
        warnings.extend(attach_ias_to_trials(parsed.trials, ias))
        yield name, parsed.trials, warnings


def _cmd_parse(args) -> int:
    config = _load_cli_config(args)
    files, ias = _read_inputs(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    successes = 0
    for name, trials, warnings in _parsed_trials(files, ias, config):
        doc = {
            "file": name,
            "trials": [
                {
                    "metadata": asdict(t.metadata),
                    "n_fixations": len(t.fixations),
                    "n_saccades": len(t.saccades),
                    "n_blinks": len(t.blinks),
                    "n_char_boxes": len(t.char_boxes),
                    "is_practice": t.is_practice,
                    "is_question": t.is_question,
                }
                for t in trials
            ],
            "warnings": warnings,
        }
        (out / f"{_stem(name)}_trials.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n"
        )
        print(f"{name}: {len(trials)} trial(s), {len(warnings)} warning(s)")
        if trials:
            successes += 1
    return EXIT_OK if successes else EXIT_NO_SUCCESS


def _cmd_clean(args) -> int:
    config = _load_cli_config(args)
    files, ias = _read_inputs(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    successes = 0
    for name, trials, warnings in _parsed_trials(files, ias, config):
        doc: dict = {"file": name, "trials": {}, "warnings": warnings}
        for trial in trials:
            if not trial.char_boxes:
                doc["warnings"].append(
                    f"trial {trial.metadata.trial_id}: no stimulus, skipped"
                )
                continue
            stimulus = build_stimulus(trial.char_boxes, config.parse.include_spaces_in_words)
            cleaned, report = clean_fixations(
                trial.fixations, trial.blinks, stimulus, config.cleaning
            )
            doc["trials"][trial.metadata.trial_id] = {
                "n_before": len(trial.fixations),
                "n_after": len(cleaned),
                "counts": report.counts,
                "dispositions": [
                    {"index": d.index, "status": d.status, "merged_into": d.merged_into}
                    for d in report.dispositions
                ],
            }
            successes += 1
        (out / f"{_stem(name)}_cleaning.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n"
        )
        print(f"{name}: cleaned {len(doc['trials'])} trial(s)")
    return EXIT_OK if successes else EXIT_NO_SUCCESS


def _cmd_assign(args) -> int:
    import csv

    config = _load_cli_config(args)
    files, ias = _read_inputs(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    successes = 0
    for name, trials, warnings in _parsed_trials(files, ias, config):
        for w in warnings:
            print(f"{name}: {w}", file=sys.stderr)
        rows = []
        for trial in trials:
            if not trial.char_boxes:
                continue
            stimulus = build_stimulus(trial.char_boxes, config.parse.include_spaces_in_words)
            cleaned, _ = clean_fixations(
                trial.fixations, trial.blinks, stimulus, config.cleaning
            )
            fallback_warnings: list[str] = []
            for method in config.methods:
                assignment = assign_with_fallback(
                    method, cleaned, stimulus, config.assignment, fallback_warnings
                )
                values, _mean = y_correction(assignment, cleaned)
                for i, fix in enumerate(cleaned):
                    rows.append(
                        {
                            "trial_id": trial.metadata.trial_id,
                            "method": method,
                            "fixation_idx": i,
                            "x": fix.x,
                            "y": fix.y,
                            "line_idx": assignment.line_idx[i],
                            "corrected_y": assignment.corrected_y[i],
                            "y_correction": values[i],
                        }
                    )
            for w in fallback_warnings:
                print(f"{name} trial {trial.metadata.trial_id}: {w}", file=sys.stderr)
            successes += 1
        path = out / f"{_stem(name)}_assignments.csv"
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(
                fh,
                fieldnames=["trial_id", "method", "fixation_idx", "x", "y",
                            "line_idx", "corrected_y", "y_correction"],
                lineterminator="\n",
            )
            writer.writeheader()
            writer.writerows(rows)
        print(f"{name}: wrote {len(rows)} assignment row(s)")
    return EXIT_OK if successes else EXIT_NO_SUCCESS


def _cmd_measures(args) -> int:
    config = _load_cli_config(args)
    files, ias = _read_inputs(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        result = run_batch(files, ias, config)
    except GazePipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_SUCCESS
    for table, text in result.tables.items():
        (out / f"{table}.csv").write_text(text)
    (out / "summary.json").write_text(
        json.dumps(result.summary, indent=2, sort_keys=True) + "\n"
    )
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote 4 measure tables for {len(result.results)} trial(s) to {out}")
    return EXIT_OK


def _cmd_batch(args) -> int:
    config = _load_cli_config(args)
    files, ias = _read_inputs(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        result = run_batch(files, ias, config)
    except GazePipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_SUCCESS
    archive_path = out / "results.zip"
    archive_path.write_bytes(result.archive)
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    overall = result.summary["overall"]
    print(
        f"processed {overall['trial_count']} trial(s); "
        f"fixations {overall['fixations_before']} -> {overall['fixations_after']}; "
        f"archive at {archive_path}"
    )
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    port = args.port if args.port is not None else int(os.environ.get("PORT", 8000))
    uvicorn.run(app, host=args.host, port=port)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "parse": _cmd_parse,
        "clean": _cmd_clean,
        "assign": _cmd_assign,
        "measures": _cmd_measures,
        "batch": _cmd_batch,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except FileNotFoundError as exc:
        print(f"no such file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except json.JSONDecodeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
