"""Multi-line reading eye-tracking pipeline.

Parse EyeLink ASC recordings, clean fixations, assign them to text
lines with classical drift-correction algorithms or an ensemble vote,
derive reading measures, and run it all in batch, over HTTP, or from
the command line.
"""

from .asc_parser import (
    AscParseConfig,
    Blink,
    Fixation,
    ParseResult,
    Saccade,
    TrialMetadata,
    TrialRecord,
    parse_asc,
)
from .batch import BatchResult, TrialResult, run_batch, run_pipeline, summarize
from .cleaning import CleaningConfig, CleaningReport, clean_fixations, is_outside_stimulus
from .config import (
    MeasuresConfig,
    OutputConfig,
    PipelineConfig,
    load_config,
    save_config,
)
from .errors import (
    AlgorithmFailure,
    BatchFailed,
    EmptyStimulus,
    ExternalTimeout,
    GazePipelineError,
    InvalidConfig,
    InvalidExternalOutput,
    LengthMismatch,
    MissingIasFile,
    NoTrialsFound,
    UnknownMethod,
)
from .external import ExternalAssignerHandle, apply_external_assigner
from .line_assign import (
    ALGORITHMS,
    AssignmentParams,
    LineAssignment,
    assign,
    realign_saccades,
    wisdom_of_crowds,
    y_correction,
)
from .measures import (
    assign_words,
    fixation_features,
    saccade_features,
    sentence_measures,
    word_measures,
)
from .stimulus import CharBox, Stimulus, WordBox, build_stimulus, parse_ias

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "AlgorithmFailure",
    "AscParseConfig",
    "AssignmentParams",
    "BatchFailed",
    "BatchResult",
    "Blink",
    "CharBox",
    "CleaningConfig",
    "CleaningReport",
    "EmptyStimulus",
    "ExternalAssignerHandle",
    "ExternalTimeout",
    "Fixation",
    "GazePipelineError",
    "InvalidConfig",
    "InvalidExternalOutput",
    "LengthMismatch",
    "LineAssignment",
    "MeasuresConfig",
    "MissingIasFile",
    "NoTrialsFound",
    "OutputConfig",
    "ParseResult",
    "PipelineConfig",
    "Saccade",
    "Stimulus",
    "TrialMetadata",
    "TrialRecord",
    "TrialResult",
    "UnknownMethod",
    "WordBox",
    "apply_external_assigner",
    "assign",
    "assign_words",
    "build_stimulus",
    "clean_fixations",
    "fixation_features",
    "is_outside_stimulus",
    "load_config",
    "parse_asc",
    "parse_ias",
    "realign_saccades",
    "run_batch",
    "run_pipeline",
    "saccade_features",
    "save_config",
    "sentence_measures",
    "summarize",
    "wisdom_of_crowds",
    "word_measures",
    "y_correction",
]
