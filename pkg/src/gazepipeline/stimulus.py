"""Geometric text model: characters grouped into words, lines and sentences.

Character bounding boxes come from REGION CHAR messages, from interest-area
(IAS) files, or from custom CSV/JSON imports. ``build_stimulus`` derives the
line/word/sentence structure that cleaning, line assignment and the measures
all operate on.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field, replace

from .errors import EmptyStimulus, MissingColumn, NonNumericCell

SENTENCE_TERMINATORS = ".!?"

# Vertical centers within this fraction of the median box height belong to
# the same text line.
LINE_GROUP_TOLERANCE = 0.5


@dataclass
class CharBox:
    """Bounding box of a single stimulus character."""

    index: int
    char: str
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    line_idx: int = -1
    word_idx: int = -1

    @property
    def center_x(self) -> float:
        return (self.x_min + self.x_max) / 2.0

    @property
    def center_y(self) -> float:
        return (self.y_min + self.y_max) / 2.0

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def is_space(self) -> bool:
        return self.char.isspace() or self.char == ""


@dataclass
class WordBox:
    """Hull of the character boxes making up one word."""

    word_idx: int
    text: str
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    line_idx: int
    sentence_idx: int


@dataclass
class Stimulus:
    """Full text geometry for one trial."""

    chars: list[CharBox]
    words: list[WordBox]
    line_centers_y: list[float]
    line_heights: list[float]
    char_width: float
    include_spaces: bool
    # Hull (x_min, y_min, x_max, y_max) per line, used by the cleaning step.
    line_hulls: list[tuple[float, float, float, float]] = field(default_factory=list)

    @property
    def n_lines(self) -> int:
        return len(self.line_centers_y)

    def line_spacing(self) -> float:
        """Median gap between adjacent line centers; line height for one line."""
        if len(self.line_centers_y) < 2:
            return self.line_heights[0] if self.line_heights else 0.0
        gaps = [
            b - a for a, b in zip(self.line_centers_y, self.line_centers_y[1:])
        ]
        return statistics.median(gaps)

    def line_chars(self, line_idx: int) -> list[CharBox]:
        return [c for c in self.chars if c.line_idx == line_idx]

    def line_words(self, line_idx: int) -> list[WordBox]:
        return [w for w in self.words if w.line_idx == line_idx]


@dataclass
class ColumnMap:
    """Source header names for each required fixation/stimulus column."""

    fixation: dict[str, str] = field(default_factory=dict)
    stimulus: dict[str, str] = field(default_factory=dict)
    confidence: dict[str, float] = field(default_factory=dict)

    FIXATION_TARGETS = ("x", "y", "start", "end", "duration")
    STIMULUS_TARGETS = ("char", "x_min", "y_min", "x_max", "y_max")


_SYNONYMS: dict[str, tuple[str, ...]] = {
    "x": ("x", "fix_x", "xs", "x_pos"),
    "y": ("y", "fix_y", "ys", "y_pos"),
    "start": ("start", "start_time", "onset", "t_start"),
    "end": ("end", "end_time", "offset", "t_end"),
    "duration": ("dur", "duration", "fix_dur"),
    "char": ("char", "character", "letter"),
    "x_min": ("x_min", "left", "x1", "xmin"),
    "y_min": ("y_min", "top", "y1", "ymin"),
    "x_max": ("x_max", "right", "x2", "xmax"),
    "y_max": ("y_max", "bottom", "y2", "ymax"),
}


def build_stimulus(char_boxes: list[CharBox], include_spaces: bool = False) -> Stimulus:
    """Group character boxes into lines, words and sentences.

    Lines are formed by clustering vertical centers within half the median
    box height; words split at space characters; with ``include_spaces`` the
    trailing space box is folded into the preceding word's hull. The result
    is independent of the input ordering.
    """
    if not char_boxes:
        raise EmptyStimulus("no character boxes")

    heights = [b.y_max - b.y_min for b in char_boxes]
    tol = LINE_GROUP_TOLERANCE * statistics.median(heights)

    # Sort by vertical center so grouping is permutation-invariant.
    by_y = sorted(char_boxes, key=lambda b: (b.center_y, b.x_min, b.index))
    line_groups: list[list[CharBox]] = [[by_y[0]]]
    for box in by_y[1:]:
        group = line_groups[-1]
        mean_cy = sum(b.center_y for b in group) / len(group)
        if box.center_y - mean_cy <= tol:
            group.append(box)
        else:
            line_groups.append([box])

    chars: list[CharBox] = []
    words: list[WordBox] = []
    line_centers: list[float] = []
    line_heights: list[float] = []
    line_hulls: list[tuple[float, float, float, float]] = []

    for line_idx, group in enumerate(line_groups):
        group.sort(key=lambda b: (b.x_min, b.index))
        y_min = min(b.y_min for b in group)
        y_max = max(b.y_max for b in group)
        x_min = min(b.x_min for b in group)
        x_max = max(b.x_max for b in group)
        line_centers.append((y_min + y_max) / 2.0)
        line_heights.append(y_max - y_min)
        line_hulls.append((x_min, y_min, x_max, y_max))

        # Split the line into words at space boxes.
        current: list[CharBox] = []
        word_groups: list[tuple[list[CharBox], list[CharBox]]] = []
        trailing_spaces: list[CharBox] = []
        for box in group:
            if box.is_space:
                if current:
                    trailing_spaces.append(box)
                # leading spaces on a line are dropped from word membership
            else:
                if trailing_spaces:
                    word_groups.append((current, trailing_spaces))
                    current, trailing_spaces = [], []
                current.append(box)
        if current or trailing_spaces:
            word_groups.append((current, trailing_spaces))

        for letters, spaces in word_groups:
            if not letters:
                continue
            word_idx = len(words)
            hull_boxes = letters + (spaces if include_spaces else [])
            for b in letters:
                chars.append(replace(b, line_idx=line_idx, word_idx=word_idx))
            for b in spaces:
                chars.append(replace(b, line_idx=line_idx, word_idx=word_idx))
            words.append(
                WordBox(
                    word_idx=word_idx,
                    text="".join(b.char for b in letters),
                    x_min=min(b.x_min for b in hull_boxes),
                    y_min=min(b.y_min for b in hull_boxes),
                    x_max=max(b.x_max for b in hull_boxes),
                    y_max=max(b.y_max for b in hull_boxes),
                    line_idx=line_idx,
                    sentence_idx=0,
                )
            )

    # Sentences: split after words ending in terminal punctuation.
    sentence = 0
    for word in words:
        word.sentence_idx = sentence
        if word.text and word.text[-1] in SENTENCE_TERMINATORS:
            sentence += 1

    non_space_widths = [c.width for c in chars if not c.is_space]
    if not non_space_widths:
        non_space_widths = [c.width for c in chars]
    char_width = statistics.median(non_space_widths)

    # Reading order indices.
    for i, c in enumerate(chars):
        c.index = i

    return Stimulus(
        chars=chars,
        words=words,
        line_centers_y=line_centers,
        line_heights=line_heights,
        char_width=char_width,
        include_spaces=include_spaces,
        line_hulls=line_hulls,
    )


def parse_ias(text: str) -> tuple[list[CharBox], list[str]]:
    """Expand RECTANGLE interest areas into per-character boxes.

    IAS regions are word-level: each label's hull is divided uniformly
    across its characters. A space box is synthesized between adjacent
    regions on the same line so word boundaries survive ``build_stimulus``.
    Returns the boxes plus any warnings for skipped lines.
    """
    warnings: list[str] = []
    regions: list[tuple[str, float, float, float, float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if parts[0].upper() != "RECTANGLE":
            warnings.append(f"ias line {lineno}: ignored non-RECTANGLE entry {parts[0]!r}")
            continue
        if len(parts) < 7:
            warnings.append(f"ias line {lineno}: malformed RECTANGLE entry")
            continue
        try:
            x_min, y_min, x_max, y_max = (float(v) for v in parts[2:6])
        except ValueError:
            warnings.append(f"ias line {lineno}: non-numeric coordinates")
            continue
        label = " ".join(parts[6:])
        regions.append((label, x_min, y_min, x_max, y_max))

    boxes: list[CharBox] = []
    prev: tuple[str, float, float, float, float] | None = None
    for label, x_min, y_min, x_max, y_max in regions:
        if prev is not None:
            same_line = abs(((prev[2] + prev[4]) - (y_min + y_max)) / 2.0) < (y_max - y_min)
            if same_line:
                gap_lo, gap_hi = prev[3], x_min
                if gap_hi - gap_lo <= 0:
                    mid = (gap_lo + gap_hi) / 2.0
                    gap_lo, gap_hi = mid - 0.5, mid + 0.5
                boxes.append(
                    CharBox(
                        index=len(boxes),
                        char=" ",
                        x_min=gap_lo,
                        y_min=min(prev[2], y_min),
                        x_max=gap_hi,
                        y_max=max(prev[4], y_max),
                    )
                )
        n = max(len(label), 1)
        step = (x_max - x_min) / n
        for i, ch in enumerate(label or " "):
            boxes.append(
                CharBox(
                    index=len(boxes),
                    char=ch,
                    x_min=x_min + i * step,
                    y_min=y_min,
                    x_max=x_min + (i + 1) * step,
                    y_max=y_max,
                )
            )
        prev = (label, x_min, y_min, x_max, y_max)
    return boxes, warnings


def attach_ias_to_trials(trials, ias_files: dict[str, str]) -> list[str]:
    """Fill ``trial.char_boxes`` from IAS file contents, matched by name.

    Exact filename match first, then case-insensitive basename fallback.
    Trials that cannot be matched are left without boxes and reported in
    the returned warning list; callers decide whether that is fatal.
    """
    warnings: list[str] = []
    by_basename = {_basename(k).lower(): k for k in ias_files}
    for trial in trials:
        if trial.char_boxes:
            continue
        wanted = trial.metadata.ias_file
        if not wanted:
            warnings.append(f"trial {trial.metadata.trial_id}: no REGION CHAR data and no IAS file named")
            continue
        key = None
        if wanted in ias_files:
            key = wanted
        else:
            fallback = by_basename.get(_basename(wanted).lower())
            if fallback is not None:
                key = fallback
                warnings.append(
                    f"trial {trial.metadata.trial_id}: IAS file {wanted!r} matched "
                    f"{fallback!r} by case-insensitive basename"
                )
        if key is None:
            warnings.append(f"trial {trial.metadata.trial_id}: missing IAS file {wanted!r}")
            continue
        boxes, ias_warnings = parse_ias(ias_files[key])
        warnings.extend(ias_warnings)
        trial.char_boxes = boxes
    return warnings


def _basename(path: str) -> str:
    return path.replace("\\", "/").rsplit("/", 1)[-1]


def guess_column_map(headers: list[str]) -> ColumnMap:
    """Match table headers against the synonym table, case-insensitively.

    Exact synonym matches score 1.0; a header merely containing a synonym
    scores 0.5. Unmatched targets stay empty with confidence 0 so the UI
    can ask the user to resolve them.
    """
    lowered = [(h, h.strip().lower()) for h in headers]
    cmap = ColumnMap()

    def find(target: str) -> tuple[str, float]:
        syns = _SYNONYMS[target]
        for original, low in lowered:
            if low in syns:
                return original, 1.0
        for original, low in lowered:
            if any(s in low for s in syns if len(s) > 1):
                return original, 0.5
        return "", 0.0

    for target in ColumnMap.FIXATION_TARGETS:
        source, conf = find(target)
        if source:
            cmap.fixation[target] = source
        cmap.confidence[target] = conf
    for target in ColumnMap.STIMULUS_TARGETS:
        source, conf = find(target)
        if source:
            cmap.stimulus[target] = source
        cmap.confidence[target] = conf
    return cmap


def import_custom(fixation_rows: list[dict], stimulus_rows: list[dict], cmap: ColumnMap, include_spaces: bool = False):
    """Build fixations and a Stimulus from already-extracted custom tables.

    Rows are flat mappings (CSV rows or JSON objects). Either ``end`` or
    ``duration`` must be mapped for fixations; the other is derived.
    """
    from .asc_parser import Fixation  # local import to avoid a cycle

    fx = cmap.fixation
    for required in ("x", "y", "start"):
        if required not in fx:
            raise MissingColumn(required)
    if "end" not in fx and "duration" not in fx:
        raise MissingColumn("end or duration")
    for required in ColumnMap.STIMULUS_TARGETS:
        if required not in cmap.stimulus:
            raise MissingColumn(required)

    def num(row: dict, source: str, row_idx: int) -> float:
        value = row.get(source)
        if value is None:
            raise NonNumericCell(row_idx, source)
        try:
            return float(value)
        except (TypeError, ValueError):
            raise NonNumericCell(row_idx, source) from None

    fixations = []
    for i, row in enumerate(fixation_rows):
        start = num(row, fx["start"], i)
        if "end" in fx and row.get(fx["end"]) not in (None, ""):
            end = num(row, fx["end"], i)
            duration = end - start
        else:
            duration = num(row, fx["duration"], i)
            end = start + duration
        fixations.append(
            Fixation(
                index=i,
                eye="R",
                start_ms=int(start),
                end_ms=int(end),
                duration_ms=int(duration),
                x=num(row, fx["x"], i),
                y=num(row, fx["y"], i),
                pupil=0.0,
            )
        )
    fixations.sort(key=lambda f: f.start_ms)
    for i, f in enumerate(fixations):
        f.index = i

    sm = cmap.stimulus
    boxes = []
    for i, row in enumerate(stimulus_rows):
        char = str(row.get(sm["char"], ""))
        boxes.append(
            CharBox(
                index=i,
                char=char,
                x_min=num(row, sm["x_min"], i),
                y_min=num(row, sm["y_min"], i),
                x_max=num(row, sm["x_max"], i),
                y_max=num(row, sm["y_max"], i),
            )
        )
    return fixations, build_stimulus(boxes, include_spaces=include_spaces)
