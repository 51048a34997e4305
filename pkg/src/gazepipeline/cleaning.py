"""Four-stage fixation cleaning with a per-fixation disposition report.

Stage order: blink-adjacent discard, over-long discard, outside-stimulus
discard, then the short-fixation policy (merge and/or discard). Every
input fixation gets exactly one disposition keyed by its original index,
so report counts always sum to the input size.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

from .asc_parser import Fixation
from .errors import InvalidConfig
from .stimulus import Stimulus

SHORT_POLICIES = ("Merge", "Discard", "MergeThenDiscard", "Keep")

KEPT = "Kept"
DISCARDED_BLINK = "DiscardedBlink"
DISCARDED_LONG = "DiscardedLong"
DISCARDED_OUTSIDE = "DiscardedOutside"
DISCARDED_SHORT = "DiscardedShort"
MERGED = "MergedInto"

DISPOSITIONS = (KEPT, DISCARDED_BLINK, DISCARDED_LONG, DISCARDED_OUTSIDE, DISCARDED_SHORT, MERGED)


@dataclass
class CleaningConfig:
    discard_blink_adjacent: bool = True
    max_duration_ms: int = 800
    outside_x_threshold_charwidths: float = 2.0
    outside_y_threshold_lineheights: float = 1.0
    short_policy: str = "MergeThenDiscard"
    min_duration_ms: int = 80
    merge_distance_charwidths: float = 1.0

    def validate(self) -> None:
        if self.short_policy not in SHORT_POLICIES:
            raise InvalidConfig("short_policy", f"must be one of {SHORT_POLICIES}")
        if self.max_duration_ms <= 0:
            raise InvalidConfig("max_duration_ms", "must be positive")
        if self.min_duration_ms >= self.max_duration_ms:
            raise InvalidConfig("min_duration_ms", "must be less than max_duration_ms")
        for key in ("outside_x_threshold_charwidths", "outside_y_threshold_lineheights",
                    "merge_distance_charwidths"):
            if getattr(self, key) < 0:
                raise InvalidConfig(key, "must be non-negative")
        if self.min_duration_ms < 0:
            raise InvalidConfig("min_duration_ms", "must be non-negative")


@dataclass
class FixationDisposition:
    index: int
    status: str
    merged_into: int | None = None


@dataclass
class CleaningReport:
    dispositions: list[FixationDisposition] = field(default_factory=list)
    counts: dict[str, int] = field(default_factory=dict)
    merge_pairs: list[tuple[int, int]] = field(default_factory=list)

    def recount(self) -> None:
        counts = {name: 0 for name in DISPOSITIONS}
        for d in self.dispositions:
            counts[d.status] += 1
        self.counts = counts


def is_outside_stimulus(fixation: Fixation, stimulus: Stimulus,
                        x_thr_cw: float, y_thr_lh: float) -> bool:
    """True iff the fixation misses every line's expanded hull.

    Each line hull grows by x_thr character widths horizontally and
    y_thr of its own hull height vertically (median line spacing when a
    hull is degenerate).
    """
    cw = stimulus.char_width
    for (x_min, y_min, x_max, y_max) in stimulus.line_hulls:
        height = y_max - y_min
        if height <= 0:
            height = stimulus.line_spacing()
        if (x_min - x_thr_cw * cw <= fixation.x <= x_max + x_thr_cw * cw
                and y_min - y_thr_lh * height <= fixation.y <= y_max + y_thr_lh * height):
            return False
    return True


@dataclass
class _Work:
    fix: Fixation
    orig: int


def _distance(a: Fixation, b: Fixation) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def _merge(short: Fixation, target: Fixation) -> Fixation:
    merged = copy.copy(target)
    merged.duration_ms = short.duration_ms + target.duration_ms
    merged.x = (short.x + target.x) / 2.0
    merged.y = (short.y + target.y) / 2.0
    merged.start_ms = min(short.start_ms, target.start_ms)
    merged.end_ms = merged.start_ms + merged.duration_ms
    merged.blink_before = short.blink_before or target.blink_before
    merged.blink_after = short.blink_after or target.blink_after
    return merged


def resolve_short_fixations(
    fixations: list[Fixation],
    policy: str,
    min_dur: int,
    merge_dist_cw: float,
    char_width: float,
    stimulus: Stimulus | None = None,
    max_duration_ms: int | None = None,
    x_thr_cw: float = 0.0,
    y_thr_lh: float = 0.0,
):
    """Apply the short-fixation policy; returns (fixations, merge pairs).

    A neighbor is merge-eligible when it carries no blink flag, is itself
    at least min_dur long, and lies within the merge distance. With both
    neighbors eligible the longer one wins. Merging sums durations,
    averages positions unweighted, keeps the earlier start, and repeats
    until a full pass changes nothing.

    When stimulus/max_duration_ms are given, a merge whose result would
    be over-long or outside the stimulus is refused, so cleaning its own
    output changes nothing.
    """
    pairs: list[tuple[int, int]] = []
    work = [_Work(fix=copy.copy(f), orig=f.index) for f in fixations]

    if policy in ("Merge", "MergeThenDiscard"):
        limit = merge_dist_cw * char_width

        def eligible(short: _Work, neighbor: _Work) -> bool:
            n = neighbor.fix
            if n.blink_before or n.blink_after:
                return False
            if n.duration_ms < min_dur:
                return False
            if _distance(short.fix, n) > limit:
                return False
            merged = _merge(short.fix, n)
            if max_duration_ms is not None and merged.duration_ms > max_duration_ms:
                return False
            if stimulus is not None and is_outside_stimulus(merged, stimulus, x_thr_cw, y_thr_lh):
                return False
            return True

        changed = True
        while changed:
            changed = False
            i = 0
            while i < len(work):
                if work[i].fix.duration_ms >= min_dur:
                    i += 1
                    continue
                options = [j for j in (i - 1, i + 1)
                           if 0 <= j < len(work) and eligible(work[i], work[j])]
                if not options:
                    i += 1
                    continue
                if len(options) == 2:
                    left, right = work[options[0]], work[options[1]]
                    # Longer neighbor wins; a tie goes to the earlier one.
                    j = options[1] if right.fix.duration_ms > left.fix.duration_ms else options[0]
                else:
                    j = options[0]
                target = work[j]
                merged = _Work(fix=_merge(work[i].fix, target.fix), orig=target.orig)
                pairs.append((work[i].orig, target.orig))
                lo = min(i, j)
                del work[max(i, j)]
                work[lo] = merged
                changed = True
                i = lo
            # loop again only if this pass merged something

    if policy in ("Discard", "MergeThenDiscard"):
        work = [w for w in work if w.fix.duration_ms >= min_dur]

    return work, pairs


def clean_fixations(
    fixations: list[Fixation],
    blinks,
    stimulus: Stimulus,
    config: CleaningConfig | None = None,
):
    """Run all four cleaning stages; returns (survivors, CleaningReport).

    Survivors are fresh Fixation objects in original temporal order with
    contiguous indices. The report is keyed by original indices.
    """
    config = config or CleaningConfig()
    config.validate()

    status: dict[int, FixationDisposition] = {
        f.index: FixationDisposition(index=f.index, status=KEPT) for f in fixations
    }
    alive: list[Fixation] = list(fixations)

    if config.discard_blink_adjacent:
        for f in alive:
            if f.blink_before or f.blink_after:
                status[f.index].status = DISCARDED_BLINK
        alive = [f for f in alive if not (f.blink_before or f.blink_after)]

    for f in alive:
        if f.duration_ms > config.max_duration_ms:
            status[f.index].status = DISCARDED_LONG
    alive = [f for f in alive if f.duration_ms <= config.max_duration_ms]

    x_thr = config.outside_x_threshold_charwidths
    y_thr = config.outside_y_threshold_lineheights
    for f in alive:
        if is_outside_stimulus(f, stimulus, x_thr, y_thr):
            status[f.index].status = DISCARDED_OUTSIDE
    alive = [f for f in alive if status[f.index].status == KEPT]

    work, pairs = resolve_short_fixations(
        alive,
        config.short_policy,
        config.min_duration_ms,
        config.merge_distance_charwidths,
        stimulus.char_width,
        stimulus=stimulus,
        max_duration_ms=config.max_duration_ms,
        x_thr_cw=x_thr,
        y_thr_lh=y_thr,
    )

    for source, target in pairs:
        status[source].status = MERGED
        status[source].merged_into = target
    surviving = {w.orig for w in work}
    for f in alive:
        if f.index not in surviving and status[f.index].status == KEPT:
            status[f.index].status = DISCARDED_SHORT

    cleaned: list[Fixation] = []
    for new_idx, w in enumerate(work):
        out = copy.copy(w.fix)
        out.index = new_idx
        cleaned.append(out)

    report = CleaningReport(
        dispositions=[status[f.index] for f in fixations],
        merge_pairs=pairs,
    )
    report.recount()
    return cleaned, report
