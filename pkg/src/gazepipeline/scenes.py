"""Plot data as JSON scene descriptions instead of rendered images.

A scene carries everything a renderer needs in screen pixels: stimulus
layers (characters, char boxes, word boxes), one fixation series per
algorithm plus the uncorrected series, saccade segments with raw and
snapped y, cleaning disposition highlights, and word-measure labels.
Scenes are plain dicts so they serialize deterministically with sorted
keys.
"""

from __future__ import annotations

from .asc_parser import Fixation
from .cleaning import CleaningReport
from .line_assign import LineAssignment, RealignedSaccade
from .measures import WordMeasuresRow, row_to_dict
from .stimulus import Stimulus

SCENE_VERSION = 1


def stimulus_layers(stimulus: Stimulus) -> dict:
    return {
        "characters": [
            {"char": c.char, "x": c.center_x, "y": c.center_y}
            for c in stimulus.chars if not c.is_space
        ],
        "char_boxes": [
            {"x_min": c.x_min, "y_min": c.y_min, "x_max": c.x_max, "y_max": c.y_max}
            for c in stimulus.chars
        ],
        "word_boxes": [
            {
                "word_idx": w.word_idx,
                "text": w.text,
                "line_idx": w.line_idx,
                "x_min": w.x_min,
                "y_min": w.y_min,
                "x_max": w.x_max,
                "y_max": w.y_max,
            }
            for w in stimulus.words
        ],
        "line_centers_y": list(stimulus.line_centers_y),
    }


def fixation_series(label: str, fixations: list[Fixation],
                    assignment: LineAssignment | None = None) -> dict:
    points = []
    for i, f in enumerate(fixations):
        points.append(
            {
                "i": i,
                "x": f.x,
                "y": assignment.corrected_y[i] if assignment else f.y,
                "duration_ms": f.duration_ms,
                "line_idx": assignment.line_idx[i] if assignment else None,
            }
        )
    return {"label": label, "points": points}


def saccade_segments(realigned: list[RealignedSaccade]) -> list[dict]:
    segments = []
    for rs in realigned:
        s = rs.saccade
        segments.append(
            {
                "x_start": s.x_start,
                "y_start": s.y_start,
                "x_end": s.x_end,
                "y_end": s.y_end,
                "y_start_snapped": rs.y_start_snapped,
                "y_end_snapped": rs.y_end_snapped,
                "from_line": rs.from_line,
                "to_line": rs.to_line,
            }
        )
    return segments


def disposition_highlights(fixations: list[Fixation], report: CleaningReport) -> list[dict]:
    by_index = {f.index: f for f in fixations}
    out = []
    for d in report.dispositions:
        f = by_index.get(d.index)
        if f is None:
            continue
        out.append(
            {
                "i": d.index,
                "x": f.x,
                "y": f.y,
                "duration_ms": f.duration_ms,
                "status": d.status,
                "merged_into": d.merged_into,
            }
        )
    return out


def word_measure_labels(rows: list[WordMeasuresRow], stimulus: Stimulus,
                        measure: str = "total_fixation_duration_ms") -> list[dict]:
    """One numeric label per word box, placed at the box top edge."""
    boxes = {w.word_idx: w for w in stimulus.words}
    labels = []
    for row in rows:
        value = row_to_dict(row).get(measure)
        box = boxes[row.word_idx]
        labels.append(
            {
                "word_idx": row.word_idx,
                "x": (box.x_min + box.x_max) / 2.0,
                "y": box.y_min,
                "value": value,
            }
        )
    return labels


def build_scene(
    stimulus: Stimulus,
    raw_fixations: list[Fixation] | None = None,
    cleaned_fixations: list[Fixation] | None = None,
    assignments: list[LineAssignment] | None = None,
    realigned: list[RealignedSaccade] | None = None,
    report: CleaningReport | None = None,
    word_rows: list[WordMeasuresRow] | None = None,
    label_measure: str = "total_fixation_duration_ms",
) -> dict:
    """Assemble whichever scene parts are available into one document."""
    scene: dict = {"version": SCENE_VERSION, "layers": stimulus_layers(stimulus)}
    series = []
    if cleaned_fixations is not None:
        series.append(fixation_series("uncorrected", cleaned_fixations))
        for a in assignments or []:
            series.append(fixation_series(a.algorithm, cleaned_fixations, a))
    scene["fixations"] = series
    scene["saccades"] = saccade_segments(realigned) if realigned else []
    if report is not None and raw_fixations is not None:
        scene["dispositions"] = disposition_highlights(raw_fixations, report)
    else:
        scene["dispositions"] = []
    if word_rows is not None:
        scene["word_labels"] = word_measure_labels(word_rows, stimulus, label_measure)
    else:
        scene["word_labels"] = []
    return scene
