"""Pipeline configuration: JSON persistence, validation, content hashing.

The JSON schema mirrors the dataclass structure exactly. Unknown keys
are rejected by name, missing keys fall back to defaults, and
load_config(save_config(c)) reproduces c field for field.
"""

from __future__ import annotations

import hashlib
import json
import typing
from dataclasses import asdict, dataclass, field, fields

from .asc_parser import AscParseConfig
from .cleaning import CleaningConfig
from .errors import InvalidConfig
from .line_assign import ALGORITHMS, AssignmentParams
from .measures import (
    FixationFeatureRow,
    SaccadeFeatureRow,
    SentenceMeasuresRow,
    WordMeasuresRow,
)

WOC_LABEL = "wisdom_of_crowds"


def _measure_names(row_cls) -> set[str]:
    return {f.name for f in fields(row_cls)} - set(row_cls.KEY_FIELDS)


SELECTABLE = {
    "word_measures": _measure_names(WordMeasuresRow),
    "fixation_measures": _measure_names(FixationFeatureRow),
    "saccade_measures": _measure_names(SaccadeFeatureRow),
    "sentence_measures": _measure_names(SentenceMeasuresRow),
}


@dataclass
class MeasuresConfig:
    # None selects every column of the corresponding table.
    analysis_method: str | None = None
    deviation_y_frac: float = 0.5
    word_measures: list[str] | None = None
    fixation_measures: list[str] | None = None
    saccade_measures: list[str] | None = None
    sentence_measures: list[str] | None = None


@dataclass
class OutputConfig:
    separate_files_per_trial: bool = False
    emit_plot_data: bool = False


@dataclass
class PipelineConfig:
    parse: AscParseConfig = field(default_factory=AscParseConfig)
    cleaning: CleaningConfig = field(default_factory=CleaningConfig)
    assignment: AssignmentParams = field(default_factory=AssignmentParams)
    methods: list[str] = field(default_factory=lambda: ["attach"])
    measures: MeasuresConfig = field(default_factory=MeasuresConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    workers: int = 1

    def analysis_method(self) -> str:
        return self.measures.analysis_method or self.methods[0]

    def validate(self) -> None:
        try:
            self.parse.validate()
        except ValueError as exc:
            raise InvalidConfig("parse", str(exc)) from exc
        self.cleaning.validate()
        if not self.methods:
            raise InvalidConfig("assignment.methods", "must name at least one method")
        known = set(ALGORITHMS) | {WOC_LABEL}
        for m in self.methods:
            if m not in known:
                raise InvalidConfig("assignment.methods", f"unknown method {m!r}")
        for m in self.assignment.woc_members:
            if m not in ALGORITHMS:
                raise InvalidConfig("assignment.woc_members", f"unknown member {m!r}")
        if not self.assignment.woc_members and WOC_LABEL in self.methods:
            raise InvalidConfig("assignment.woc_members", "ensemble needs members")
        a = self.assignment
        ordered = [
            ("regress_k_min", a.regress_k_min, "regress_k_max", a.regress_k_max),
            ("regress_o_min", a.regress_o_min, "regress_o_max", a.regress_o_max),
            ("regress_s_min", a.regress_s_min, "regress_s_max", a.regress_s_max),
            ("stretch_scale_min", a.stretch_scale_min, "stretch_scale_max", a.stretch_scale_max),
            ("stretch_offset_min", a.stretch_offset_min, "stretch_offset_max", a.stretch_offset_max),
        ]
        for lo_name, lo, hi_name, hi in ordered:
            if lo > hi:
                raise InvalidConfig(lo_name, f"must not exceed {hi_name}")
        if a.regress_s_min <= 0:
            raise InvalidConfig("regress_s_min", "must be positive")
        if a.compare_n_nearest < 1:
            raise InvalidConfig("compare_n_nearest", "must be at least 1")
        for name in ("chain_x_max", "chain_y_max", "compare_sweep_px", "merge_slope_max",
                     "slice_x_back_max"):
            if getattr(a, name) < 0:
                raise InvalidConfig(name, "must be non-negative")
        if a.slice_run_y_max is not None and a.slice_run_y_max <= 0:
            raise InvalidConfig("slice_run_y_max", "must be positive when set")
        m = self.measures
        if m.deviation_y_frac < 0:
            raise InvalidConfig("measures.deviation_y_frac", "must be non-negative")
        if m.analysis_method is not None and m.analysis_method not in self.methods:
            raise InvalidConfig("measures.analysis_method", "must be one of the chosen methods")
        for key, allowed in SELECTABLE.items():
            chosen = getattr(m, key)
            if chosen is None:
                continue
            for name in chosen:
                if name not in allowed:
                    raise InvalidConfig(f"measures.{key}", f"unknown measure {name!r}")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise InvalidConfig("workers", "must be an integer >= 1")
        if not isinstance(self.output.separate_files_per_trial, bool):
            raise InvalidConfig("output.separate_files_per_trial", "must be a boolean")
        if not isinstance(self.output.emit_plot_data, bool):
            raise InvalidConfig("output.emit_plot_data", "must be a boolean")


def _type_ok(value, tp) -> bool:
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        return any(_type_ok(value, arg) for arg in typing.get_args(tp))
    if tp is type(None):
        return value is None
    if tp is bool:
        return isinstance(value, bool)
    if tp is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if tp is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if tp is str:
        return isinstance(value, str)
    if origin is list or tp is list:
        if not isinstance(value, list):
            return False
        args = typing.get_args(tp)
        return all(_type_ok(v, args[0]) for v in value) if args else True
    if origin is dict or tp is dict:
        return isinstance(value, dict)
    return True


def _load_flat(cls, data, path: str):
    if not isinstance(data, dict):
        raise InvalidConfig(path.rstrip("."), "must be a JSON object")
    hints = typing.get_type_hints(cls)
    allowed = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in allowed:
            raise InvalidConfig(f"{path}{key}", "unknown key")
        tp = hints[key]
        if not _type_ok(value, tp):
            raise InvalidConfig(f"{path}{key}", f"wrong type {type(value).__name__}")
        if tp is float and isinstance(value, int):
            value = float(value)
        if typing.get_origin(tp) is typing.Union and float in typing.get_args(tp) \
                and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        kwargs[key] = value
    return cls(**kwargs)


def load_config(text: str | bytes | dict) -> PipelineConfig:
    """Parse and validate a pipeline config JSON document."""
    if isinstance(text, dict):
        doc = text
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfig("$", f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidConfig("$", "top level must be a JSON object")

    top_allowed = {"parse", "cleaning", "assignment", "measures", "output", "workers"}
    for key in doc:
        if key not in top_allowed:
            raise InvalidConfig(key, "unknown key")

    assignment_doc = dict(doc.get("assignment", {})) if isinstance(doc.get("assignment", {}), dict) \
        else doc.get("assignment")
    if not isinstance(assignment_doc, dict):
        raise InvalidConfig("assignment", "must be a JSON object")
    methods = assignment_doc.pop("methods", ["attach"])
    if not _type_ok(methods, list[str]):
        raise InvalidConfig("assignment.methods", "must be a list of strings")

    workers = doc.get("workers", 1)
    if not _type_ok(workers, int):
        raise InvalidConfig("workers", f"wrong type {type(workers).__name__}")

    config = PipelineConfig(
        parse=_load_flat(AscParseConfig, doc.get("parse", {}), "parse."),
        cleaning=_load_flat(CleaningConfig, doc.get("cleaning", {}), "cleaning."),
        assignment=_load_flat(AssignmentParams, assignment_doc, "assignment."),
        methods=list(methods),
        measures=_load_flat(MeasuresConfig, doc.get("measures", {}), "measures."),
        output=_load_flat(OutputConfig, doc.get("output", {}), "output."),
        workers=workers,
    )
    config.validate()
    return config


def config_to_dict(config: PipelineConfig) -> dict:
    doc = {
        "parse": asdict(config.parse),
        "cleaning": asdict(config.cleaning),
        "assignment": asdict(config.assignment),
        "measures": asdict(config.measures),
        "output": asdict(config.output),
        "workers": config.workers,
    }
    doc["assignment"]["methods"] = list(config.methods)
    return doc


def save_config(config: PipelineConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n"


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def hash_config(data) -> str:
    """Content hash of any JSON-serializable object (canonical form)."""
    return hashlib.sha256(canonical_json(data).encode()).hexdigest()
