"""Word assignment and fixation/saccade/word/sentence reading measures.

All functions are pure and operate on cleaned, line-assigned trials.
Unset measure values stay None and serialize as empty CSV cells; a
`selected` set limits which measure columns appear without ever changing
the surviving values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .asc_parser import Fixation
from .line_assign import LineAssignment, RealignedSaccade
from .stimulus import Stimulus

DEVIATION_Y_FRAC_DEFAULT = 0.5


@dataclass
class WordHit:
    """Where one fixation landed: word and character granularity."""

    word_idx: int
    char_idx_in_line: int
    char_idx_in_word: int


@dataclass
class WordMeasuresRow:
    word_idx: int
    text: str
    line_idx: int
    sentence_idx: int
    first_fixation_duration_ms: int | None
    single_fixation_duration_ms: int | None
    gaze_duration_ms: int | None
    go_past_time_ms: int | None
    total_fixation_count: int
    total_fixation_duration_ms: int
    skipped_first_pass: bool

    KEY_FIELDS = ("word_idx", "text", "line_idx", "sentence_idx")


@dataclass
class FixationFeatureRow:
    fixation_idx: int
    line_idx: int
    word_idx: int
    char_idx_in_line: int
    char_idx_in_word: int
    landing_position_in_word: float
    distance_prev_cw: float | None
    distance_next_cw: float | None
    launch_distance_cw: float | None
    blink_before: bool
    blink_after: bool

    KEY_FIELDS = ("fixation_idx",)


@dataclass
class SaccadeFeatureRow:
    saccade_idx: int
    length_cw: float
    euclidean_px: float
    angle_deg: float
    is_line_change: bool
    is_return_sweep: bool
    is_directional_deviation: bool

    KEY_FIELDS = ("saccade_idx",)


@dataclass
class SentenceMeasuresRow:
    sentence_idx: int
    total_fixation_duration_ms: int
    fixation_count: int
    first_pass_duration_ms: int

    KEY_FIELDS = ("sentence_idx",)


def row_to_dict(row, selected: set[str] | None = None) -> dict:
    """Dataclass row -> mapping; unselected measure columns are dropped."""
    keys = type(row).KEY_FIELDS
    out = {}
    for f in fields(row):
        if selected is None or f.name in keys or f.name in selected:
            out[f.name] = getattr(row, f.name)
    return out


def assign_words(fixations: list[Fixation], assignment: LineAssignment,
                 stimulus: Stimulus) -> list[WordHit]:
    """Snap each fixation to the nearest character on its assigned line.

    Distance is horizontal only, to the character center; ties pick the
    earlier character. Space boxes never receive fixations, so landing
    positions always name a letter.
    """
    hits: list[WordHit] = []
    line_chars = {j: stimulus.line_chars(j) for j in range(stimulus.n_lines)}
    for fix, line in zip(fixations, assignment.line_idx):
        chars = line_chars[line]
        letters = [(pos, c) for pos, c in enumerate(chars) if not c.is_space]
        assert letters, f"line {line} has no characters"
        best_pos, best_char = min(
            letters, key=lambda pc: (abs(pc[1].center_x - fix.x), pc[0])
        )
        word_chars = [c for c in stimulus.chars
                      if c.word_idx == best_char.word_idx and not c.is_space]
        char_in_word = next(
            k for k, c in enumerate(word_chars) if c.index == best_char.index
        )
        hits.append(
            WordHit(
                word_idx=best_char.word_idx,
                char_idx_in_line=best_pos,
                char_idx_in_word=char_in_word,
            )
        )
    return hits


def word_measures(fixations: list[Fixation], hits: list[WordHit],
                  stimulus: Stimulus) -> list[WordMeasuresRow]:
    """First-pass, go-past and total measures for every stimulus word.

    A word's first pass exists only when its first fixation precedes any
    fixation on a later word; otherwise the word counts as skipped during
    first pass and the first-pass measures stay unset.
    """
    seq = [(h.word_idx, f.duration_ms) for f, h in zip(fixations, hits)]
    rows: list[WordMeasuresRow] = []
    for word in stimulus.words:
        w = word.word_idx
        on_word = [t for t, (wi, _) in enumerate(seq) if wi == w]
        total_count = len(on_word)
        total_duration = sum(seq[t][1] for t in on_word)

        first = single = gaze = go_past = None
        skipped = True
        if on_word:
            entry = on_word[0]
            exited_before_entry = any(seq[t][0] > w for t in range(entry))
            if not exited_before_entry:
                skipped = False
                run_end = entry
                while run_end + 1 < len(seq) and seq[run_end + 1][0] == w:
                    run_end += 1
                run = list(range(entry, run_end + 1))
                gaze = sum(seq[t][1] for t in run)
                first = seq[entry][1]
                if len(run) == 1:
                    single = first
                exit_t = next(
                    (t for t in range(entry, len(seq)) if seq[t][0] > w), len(seq)
                )
                go_past = sum(seq[t][1] for t in range(entry, exit_t))
        rows.append(
            WordMeasuresRow(
                word_idx=w,
                text=word.text,
                line_idx=word.line_idx,
                sentence_idx=word.sentence_idx,
                first_fixation_duration_ms=first,
                single_fixation_duration_ms=single,
                gaze_duration_ms=gaze,
                go_past_time_ms=go_past,
                total_fixation_count=total_count,
                total_fixation_duration_ms=total_duration,
                skipped_first_pass=skipped,
            )
        )
    return rows


def fixation_features(fixations: list[Fixation], hits: list[WordHit],
                      assignment: LineAssignment, stimulus: Stimulus) -> list[FixationFeatureRow]:
    """Landing positions and inter-fixation distances in letter widths."""
    cw = stimulus.char_width
    words = {w.word_idx: w for w in stimulus.words}
    rows: list[FixationFeatureRow] = []
    for i, (fix, hit) in enumerate(zip(fixations, hits)):
        word = words[hit.word_idx]
        prev_x = fixations[i - 1].x if i > 0 else None
        next_x = fixations[i + 1].x if i + 1 < len(fixations) else None
        rows.append(
            FixationFeatureRow(
                fixation_idx=i,
                line_idx=assignment.line_idx[i],
                word_idx=hit.word_idx,
                char_idx_in_line=hit.char_idx_in_line,
                char_idx_in_word=hit.char_idx_in_word,
                landing_position_in_word=(fix.x - word.x_min) / cw,
                distance_prev_cw=(fix.x - prev_x) / cw if prev_x is not None else None,
                distance_next_cw=(next_x - fix.x) / cw if next_x is not None else None,
                launch_distance_cw=(word.x_min - prev_x) / cw if prev_x is not None else None,
                blink_before=fix.blink_before,
                blink_after=fix.blink_after,
            )
        )
    return rows


def saccade_features(realigned: list[RealignedSaccade], stimulus: Stimulus,
                     deviation_y_frac: float = DEVIATION_Y_FRAC_DEFAULT) -> list[SaccadeFeatureRow]:
    """Length, angle and line-change classification per kept saccade.

    Angles use screen coordinates with y flipped, so positive means
    upward; the range is (-180, 180].
    """
    cw = stimulus.char_width
    spacing = stimulus.line_spacing()
    rows: list[SaccadeFeatureRow] = []
    for i, rs in enumerate(realigned):
        s = rs.saccade
        dx = s.x_end - s.x_start
        dy = s.y_end - s.y_start
        angle = math.degrees(math.atan2(-dy, dx))
        if angle <= -180.0:
            angle += 360.0
        line_change = rs.from_line != rs.to_line
        rows.append(
            SaccadeFeatureRow(
                saccade_idx=i,
                length_cw=dx / cw,
                euclidean_px=math.hypot(dx, dy),
                angle_deg=angle,
                is_line_change=line_change,
                is_return_sweep=(rs.to_line == rs.from_line + 1) and dx < 0,
                is_directional_deviation=(
                    not line_change and dx < 0 and abs(dy) > deviation_y_frac * spacing
                ),
            )
        )
    return rows


def sentence_measures(fixations: list[Fixation], hits: list[WordHit],
                      stimulus: Stimulus) -> list[SentenceMeasuresRow]:
    """Totals and first-pass duration per sentence."""
    words = {w.word_idx: w for w in stimulus.words}
    seq = [(words[h.word_idx].sentence_idx, f.duration_ms)
           for f, h in zip(fixations, hits)]
    n_sentences = max((w.sentence_idx for w in stimulus.words), default=-1) + 1
    rows: list[SentenceMeasuresRow] = []
    for s in range(n_sentences):
        on_sentence = [t for t, (si, _) in enumerate(seq) if si == s]
        boundary = next((t for t, (si, _) in enumerate(seq) if si > s), len(seq))
        rows.append(
            SentenceMeasuresRow(
                sentence_idx=s,
                total_fixation_duration_ms=sum(seq[t][1] for t in on_sentence),
                fixation_count=len(on_sentence),
                first_pass_duration_ms=sum(
                    seq[t][1] for t in on_sentence if t < boundary
                ),
            )
        )
    return rows
