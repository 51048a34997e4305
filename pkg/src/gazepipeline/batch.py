"""Whole-corpus processing: parallel per-trial pipeline runs and exports.

Outputs are bit-reproducible: trials are ordered by (file name, trial
start time) before serialization, CSV/JSON writers use fixed formats,
and zip entries carry a constant timestamp, so the worker count never
changes a byte.
"""

from __future__ import annotations

import csv
import io
import json
import re
import zipfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

from .asc_parser import TrialRecord, parse_asc
from .cleaning import DISPOSITIONS, CleaningReport, clean_fixations
from .config import WOC_LABEL, PipelineConfig, config_to_dict, save_config
from .errors import BatchFailed, EmptyStimulus, GazePipelineError, MissingIasFile
from .line_assign import (
    LineAssignment,
    assign_with_fallback,
    realign_saccades,
    wisdom_of_crowds,
    y_correction,
)
from .measures import (
    FixationFeatureRow,
    SaccadeFeatureRow,
    SentenceMeasuresRow,
    WordMeasuresRow,
    assign_words,
    fixation_features,
    row_to_dict,
    saccade_features,
    sentence_measures,
    word_measures,
)
from .scenes import build_scene
from .stimulus import attach_ias_to_trials, build_stimulus

TABLE_ROW_TYPES = {
    "fixations": FixationFeatureRow,
    "saccades": SaccadeFeatureRow,
    "words": WordMeasuresRow,
    "sentences": SentenceMeasuresRow,
}
TABLE_SELECTION_KEYS = {
    "fixations": "fixation_measures",
    "saccades": "saccade_measures",
    "words": "word_measures",
    "sentences": "sentence_measures",
}
# Constant zip metadata so archive bytes depend only on content.
ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


@dataclass
class TrialResult:
    file_id: str
    trial_id: str
    start_ms: int
    fixation_rows: list = field(default_factory=list)
    saccade_rows: list = field(default_factory=list)
    word_rows: list = field(default_factory=list)
    sentence_rows: list = field(default_factory=list)
    report: CleaningReport | None = None
    n_before: int = 0
    n_after: int = 0
    assignments: dict = field(default_factory=dict)
    y_corrections: dict = field(default_factory=dict)
    y_correction_means: dict = field(default_factory=dict)
    question_response: str | None = None
    scene: dict | None = None
    warnings: list = field(default_factory=list)


@dataclass
class BatchResult:
    tables: dict
    summary: dict
    warnings: list
    archive: bytes
    results: list


def run_pipeline(trial: TrialRecord, config: PipelineConfig, file_id: str = "") -> TrialResult:
    """Clean, assign, realign and measure one trial."""
    if not trial.char_boxes:
        raise MissingIasFile(trial.metadata.trial_id, trial.metadata.ias_file)
    try:
        stimulus = build_stimulus(trial.char_boxes, config.parse.include_spaces_in_words)
    except EmptyStimulus:
        raise MissingIasFile(trial.metadata.trial_id, trial.metadata.ias_file) from None

    result = TrialResult(
        file_id=file_id,
        trial_id=trial.metadata.trial_id,
        start_ms=trial.metadata.start_ms,
        question_response=trial.metadata.question_response,
        n_before=len(trial.fixations),
    )

    cleaned, report = clean_fixations(trial.fixations, trial.blinks, stimulus, config.cleaning)
    result.report = report
    result.n_after = len(cleaned)

    assignments: dict[str, LineAssignment] = {}

    def compute(label: str) -> LineAssignment:
        if label not in assignments:
            if label == WOC_LABEL:
                members = [compute(m) for m in config.assignment.woc_members]
                assignments[label] = wisdom_of_crowds(members)
            else:
                assignments[label] = assign_with_fallback(
                    label, cleaned, stimulus, config.assignment, result.warnings
                )
        return assignments[label]

    for method in config.methods:
        compute(method)
    result.assignments = {m: assignments[m] for m in config.methods}

    for method in config.methods:
        values, _ = y_correction(assignments[method], cleaned)
        result.y_corrections[method] = values
        mean_abs = sum(abs(v) for v in values) / len(values) if values else 0.0
        result.y_correction_means[method] = mean_abs

    analysis = assignments[config.analysis_method()]
    realigned = realign_saccades(trial.saccades, cleaned, analysis)
    hits = assign_words(cleaned, analysis, stimulus)
    result.word_rows = word_measures(cleaned, hits, stimulus)
    result.fixation_rows = fixation_features(cleaned, hits, analysis, stimulus)
    result.saccade_rows = saccade_features(realigned, stimulus, config.measures.deviation_y_frac)
    result.sentence_rows = sentence_measures(cleaned, hits, stimulus)

    if config.output.emit_plot_data:
        result.scene = build_scene(
            stimulus,
            raw_fixations=trial.fixations,
            cleaned_fixations=cleaned,
            assignments=[assignments[m] for m in config.methods],
            realigned=realigned,
            report=report,
            word_rows=result.word_rows,
        )
    return result


def _selected(config: PipelineConfig, table: str) -> set[str] | None:
    chosen = getattr(config.measures, TABLE_SELECTION_KEYS[table])
    return None if chosen is None else set(chosen)


def _table_columns(table: str, selected: set[str] | None) -> list[str]:
    row_cls = TABLE_ROW_TYPES[table]
    keys = row_cls.KEY_FIELDS
    out = []
    for f in fields(row_cls):
        if selected is None or f.name in keys or f.name in selected:
            out.append(f.name)
    return out


def _write_csv(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


_ROW_ATTR = {
    "fixations": "fixation_rows",
    "saccades": "saccade_rows",
    "words": "word_rows",
    "sentences": "sentence_rows",
}


def combined_csv(results: list[TrialResult], table: str, config: PipelineConfig) -> str:
    selected = _selected(config, table)
    columns = ["file_id", "trial_id"] + _table_columns(table, selected)
    rows = []
    for r in results:
        for row in getattr(r, _ROW_ATTR[table]):
            d = row_to_dict(row, selected)
            d["file_id"] = r.file_id
            d["trial_id"] = r.trial_id
            rows.append(d)
    return _write_csv(columns, rows)


def trial_csv(result: TrialResult, table: str, config: PipelineConfig) -> str:
    selected = _selected(config, table)
    columns = _table_columns(table, selected)
    rows = [row_to_dict(row, selected) for row in getattr(result, _ROW_ATTR[table])]
    return _write_csv(columns, rows)


def summarize(results: list[TrialResult]) -> dict:
    """Aggregate trial/fixation/cleaning/correction/response statistics.

    Returns {"overall": block, "per_file": {file_id: block}} where each
    block has trial_count, fixations_before/after, per-disposition
    counts, per-algorithm mean |y-correction|, and question-response
    tallies (None responses tally under "unanswered").
    """

    def empty_block() -> dict:
        return {
            "trial_count": 0,
            "fixations_before": 0,
            "fixations_after": 0,
            "dispositions": {name: 0 for name in DISPOSITIONS},
            "mean_abs_y_correction": {},
            "question_responses": {},
        }

    def feed(block: dict, r: TrialResult, sums: dict) -> None:
        block["trial_count"] += 1
        block["fixations_before"] += r.n_before
        block["fixations_after"] += r.n_after
        if r.report:
            for name, count in r.report.counts.items():
                block["dispositions"][name] += count
        for method, values in r.y_corrections.items():
            total, count = sums.setdefault(method, (0.0, 0))
            sums[method] = (total + sum(abs(v) for v in values), count + len(values))
        key = r.question_response if r.question_response is not None else "unanswered"
        block["question_responses"][key] = block["question_responses"].get(key, 0) + 1

    def close(block: dict, sums: dict) -> dict:
        block["mean_abs_y_correction"] = {
            method: (total / count if count else 0.0)
            for method, (total, count) in sorted(sums.items())
        }
        block["question_responses"] = dict(sorted(block["question_responses"].items()))
        return block

    overall = empty_block()
    overall_sums: dict = {}
    per_file: dict[str, tuple[dict, dict]] = {}
    for r in results:
        feed(overall, r, overall_sums)
        block, sums = per_file.setdefault(r.file_id, (empty_block(), {}))
        feed(block, r, sums)
    return {
        "overall": close(overall, overall_sums),
        "per_file": {
            name: close(block, sums) for name, (block, sums) in sorted(per_file.items())
        },
    }


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name) or "unnamed"


def _file_stem(name: str) -> str:
    base = name.replace("\\", "/").rsplit("/", 1)[-1]
    if "." in base:
        base = base.rsplit(".", 1)[0]
    return _safe_name(base)


def expand_inputs(files: list[tuple[str, bytes]], ias: dict[str, str]):
    """Unpack zip inputs into ASC files and extra IAS entries."""
    out_files: list[tuple[str, bytes]] = []
    ias = dict(ias)
    warnings: list[str] = []
    for name, data in files:
        if name.lower().endswith(".zip") or data[:4] == b"PK\x03\x04":
            try:
                with zipfile.ZipFile(io.BytesIO(data)) as zf:
                    for info in sorted(zf.infolist(), key=lambda i: i.filename):
                        if info.is_dir():
                            continue
                        inner = info.filename
                        low = inner.lower()
                        if low.endswith(".asc"):
                            out_files.append((inner, zf.read(info)))
                        elif low.endswith(".ias"):
                            ias[inner.rsplit("/", 1)[-1]] = zf.read(info).decode(
                                "utf-8", errors="replace"
                            )
                        else:
                            warnings.append(f"{name}: ignored zip entry {inner}")
            except zipfile.BadZipFile:
                warnings.append(f"{name}: not a readable zip archive")
        else:
            out_files.append((name, data))
    return out_files, ias, warnings


def _process_one(task):
    file_id, trial, config = task
    try:
        return run_pipeline(trial, config, file_id=file_id), None
    except GazePipelineError as exc:
        return None, f"{file_id} trial {trial.metadata.trial_id}: {exc}"


def run_batch(files: list[tuple[str, bytes]], ias: dict[str, str],
              config: PipelineConfig, progress=None) -> BatchResult:
    """Process every trial of every file; raise BatchFailed on zero successes.

    `progress`, when given, is called as progress(files_done, files_total)
    each time all trials of a file have finished.
    """
    config.validate()
    warnings: list[str] = []
    expanded, ias_map, zip_warnings = expand_inputs(files, ias)
    warnings.extend(zip_warnings)

    tasks: list[tuple[str, TrialRecord, PipelineConfig]] = []
    file_names: list[str] = []
    for name, data in sorted(expanded, key=lambda pair: pair[0]):
        file_names.append(name)
        try:
            parsed = parse_asc(data.decode("utf-8", errors="replace"), config.parse)
        except GazePipelineError as exc:
            warnings.append(f"{name}: {exc}")
            continue
        warnings.extend(f"{name}: {w}" for w in parsed.warnings)
        warnings.extend(f"{name}: {w}" for w in attach_ias_to_trials(parsed.trials, ias_map))
        for trial in sorted(parsed.trials, key=lambda t: t.metadata.start_ms):
            tasks.append((name, trial, config))

    total_files = len(file_names)
    remaining = {name: 0 for name in file_names}
    for name, _, _ in tasks:
        remaining[name] += 1
    files_done = sum(1 for name in file_names if remaining[name] == 0)
    if progress:
        progress(files_done, total_files)

    if config.workers > 1 and len(tasks) > 1:
        pool = ProcessPoolExecutor(max_workers=config.workers)
        outcome_iter = pool.map(_process_one, tasks)
    else:
        pool = None
        outcome_iter = map(_process_one, tasks)

    results: list[TrialResult] = []
    try:
        for (name, _, _), (result, error) in zip(tasks, outcome_iter):
            if error is not None:
                warnings.append(error)
            else:
                warnings.extend(f"{result.file_id} trial {result.trial_id}: {w}"
                                for w in result.warnings)
                results.append(result)
            remaining[name] -= 1
            if remaining[name] == 0:
                files_done += 1
                if progress:
                    progress(files_done, total_files)
    finally:
        if pool is not None:
            pool.shutdown()
    if not results:
        raise BatchFailed("no trial could be processed; see warnings")

    results.sort(key=lambda r: (r.file_id, r.start_ms))
    tables = {t: combined_csv(results, t, config) for t in TABLE_ROW_TYPES}
    summary = summarize(results)
    archive = build_archive(results, tables, summary, config)
    return BatchResult(
        tables=tables, summary=summary, warnings=warnings, archive=archive, results=results
    )


def build_archive(results: list[TrialResult], tables: dict, summary: dict,
                  config: PipelineConfig) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:

        def add(path: str, text: str) -> None:
            info = zipfile.ZipInfo(path, date_time=ZIP_EPOCH)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.create_system = 3
            info.external_attr = 0o644 << 16
            zf.writestr(info, text, compresslevel=6)

        for table in ("fixations", "saccades", "words", "sentences"):
            add(f"combined/{table}.csv", tables[table])
        add("summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
        add("config.json", save_config(config))

        if config.output.separate_files_per_trial:
            for r in results:
                base = f"trials/{_file_stem(r.file_id)}/{_safe_name(r.trial_id)}"
                for table in ("fixations", "saccades", "words", "sentences"):
                    add(f"{base}/{table}.csv", trial_csv(r, table, config))
                report = {
                    "counts": r.report.counts if r.report else {},
                    "dispositions": [
                        {"index": d.index, "status": d.status, "merged_into": d.merged_into}
                        for d in (r.report.dispositions if r.report else [])
                    ],
                    "merge_pairs": [list(p) for p in (r.report.merge_pairs if r.report else [])],
                }
                add(f"{base}/cleaning.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
        if config.output.emit_plot_data:
            for r in results:
                if r.scene is not None:
                    add(
                        f"plots/{_file_stem(r.file_id)}/{_safe_name(r.trial_id)}.json",
                        json.dumps(r.scene, indent=2, sort_keys=True) + "\n",
                    )
    return buf.getvalue()


def config_snapshot(config: PipelineConfig) -> dict:
    return config_to_dict(config)
