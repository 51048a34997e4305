"""Drift correction: map each fixation to the text line it belongs to.

Eleven classical assignment algorithms share one calling convention and
one tie-break rule (toward the smaller index), plus a per-fixation
majority vote across any subset of them. Saccade realignment and the
y-correction series derived from an assignment live here too.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from .asc_parser import Fixation, Saccade
from .errors import AlgorithmFailure, LengthMismatch, UnknownMethod
from .stimulus import Stimulus

# Tie-break precedence for the ensemble vote; external labels follow
# alphabetically after these.
WOC_PRECEDENCE = (
    "attach", "slice", "cluster", "regress", "merge", "segment",
    "split", "stretch", "chain", "compare", "warp",
)

GRID_STEPS = 50
GRID_STEPS_S = 20
REFINE_ITERATIONS = 40
KMEANS_MAX_ITER = 100


@dataclass
class AssignmentParams:
    """Tunable knobs for the assignment algorithms.

    slice_run_y_max of None means half the stimulus line spacing.
    """

    chain_x_max: float = 192.0
    chain_y_max: float = 32.0
    compare_sweep_px: float = 512.0
    compare_n_nearest: int = 3
    merge_slope_max: float = 0.1
    regress_k_min: float = -0.1
    regress_k_max: float = 0.1
    regress_o_min: float = -50.0
    regress_o_max: float = 50.0
    regress_s_min: float = 1.0
    regress_s_max: float = 20.0
    stretch_scale_min: float = 0.9
    stretch_scale_max: float = 1.1
    stretch_offset_min: float = -50.0
    stretch_offset_max: float = 50.0
    slice_run_y_max: float | None = None
    slice_x_back_max: float = 192.0
    woc_members: list[str] = field(default_factory=lambda: list(WOC_PRECEDENCE))
    fallback_to_attach: bool = True


@dataclass
class LineAssignment:
    algorithm: str
    line_idx: list[int]
    corrected_y: list[float]


@dataclass
class RealignedSaccade:
    saccade: Saccade
    from_fix: int
    to_fix: int
    from_line: int
    to_line: int
    y_start_snapped: float
    y_end_snapped: float


def _nearest_line(y: float, centers: np.ndarray) -> int:
    # argmin returns the first minimum, i.e. the upper line on a tie.
    return int(np.argmin(np.abs(centers - y)))


def _split_indices(n: int, boundaries: list[int]) -> list[list[int]]:
    """Cut range(n) after each boundary gap index."""
    segments: list[list[int]] = []
    start = 0
    for b in sorted(boundaries):
        segments.append(list(range(start, b + 1)))
        start = b + 1
    segments.append(list(range(start, n)))
    return [s for s in segments if s]


def _dtw_path(cost: np.ndarray):
    """Classic DTW; returns the alignment path (ties prefer the diagonal)."""
    n, m = cost.shape
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        row = acc[i]
        prev = acc[i - 1]
        ci = cost[i - 1]
        for j in range(1, m + 1):
            row[j] = ci[j - 1] + min(prev[j - 1], prev[j], row[j - 1])
    path = []
    i, j = n, m
    while True:
        path.append((i - 1, j - 1))
        if i == 1 and j == 1:
            break
        if i == 1:
            j -= 1
            continue
        if j == 1:
            i -= 1
            continue
        options = ((acc[i - 1, j - 1], i - 1, j - 1), (acc[i - 1, j], i - 1, j),
                   (acc[i, j - 1], i, j - 1))
        _, i, j = min(options, key=lambda t: t[0])
    path.reverse()
    return path


def _fit_line(xs: np.ndarray, ys: np.ndarray) -> tuple[float, float, float]:
    """Least-squares y = a*x + b; returns (a, b, rms error).

    Degenerate x spreads fit a horizontal line.
    """
    if len(xs) < 2 or float(np.ptp(xs)) == 0.0:
        b = float(np.mean(ys))
        resid = ys - b
        return 0.0, b, float(np.sqrt(np.mean(resid * resid)))
    a, b = np.polyfit(xs, ys, 1)
    resid = ys - (a * xs + b)
    return float(a), float(b), float(np.sqrt(np.mean(resid * resid)))


# --- the eleven algorithms -------------------------------------------------
# All take (xs, ys, stimulus, params) and return a list of line indices.


def _attach(xs, ys, stimulus, params):
    centers = np.asarray(stimulus.line_centers_y)
    return [_nearest_line(y, centers) for y in ys]


def _chain(xs, ys, stimulus, params):
    centers = np.asarray(stimulus.line_centers_y)
    boundaries = [
        i for i in range(len(xs) - 1)
        if abs(xs[i + 1] - xs[i]) > params.chain_x_max
        or abs(ys[i + 1] - ys[i]) > params.chain_y_max
    ]
    out = [0] * len(xs)
    for segment in _split_indices(len(xs), boundaries):
        line = _nearest_line(float(np.mean(ys[segment])), centers)
        for i in segment:
            out[i] = line
    return out


def _cluster(xs, ys, stimulus, params):
    centers = np.asarray(stimulus.line_centers_y, dtype=float)
    m = len(centers)
    positions = centers.copy()
    labels = np.zeros(len(ys), dtype=int)
    for _ in range(KMEANS_MAX_ITER):
        new_labels = np.argmin(np.abs(ys[None, :] - positions[:, None]), axis=0)
        new_positions = positions.copy()
        for j in range(m):
            members = ys[new_labels == j]
            # An empty cluster snaps back to the line center it stands for.
            new_positions[j] = members.mean() if len(members) else centers[j]
        done = bool(np.array_equal(new_labels, labels)) and np.allclose(new_positions, positions)
        labels, positions = new_labels, new_positions
        if done:
            break
    rank = np.empty(m, dtype=int)
    rank[np.argsort(positions, kind="stable")] = np.arange(m)
    return [int(rank[label]) for label in labels]


def _compare(xs, ys, stimulus, params):
    centers = np.asarray(stimulus.line_centers_y)
    boundaries = [
        i for i in range(len(xs) - 1)
        if xs[i + 1] - xs[i] <= -params.compare_sweep_px
    ]
    word_x = {
        j: np.asarray([(w.x_min + w.x_max) / 2.0 for w in stimulus.line_words(j)])
        for j in range(len(centers))
    }
    out = [0] * len(xs)
    for segment in _split_indices(len(xs), boundaries):
        seg_x = xs[segment]
        mean_y = float(np.mean(ys[segment]))
        order = sorted(range(len(centers)), key=lambda j: (abs(centers[j] - mean_y), j))
        candidates = order[: max(1, params.compare_n_nearest)]
        scored = []
        for j in candidates:
            wx = word_x[j]
            if len(wx) == 0:
                continue
            cost = np.abs(seg_x[:, None] - wx[None, :])
            path = _dtw_path(cost)
            mean_cost = float(sum(cost[a, b] for a, b in path)) / len(path)
            scored.append((mean_cost, j))
        line = min(scored, key=lambda t: t)[1]
        for i in segment:
            out[i] = line
    return out


def _merge(xs, ys, stimulus, params):
    centers = np.asarray(stimulus.line_centers_y)
    m = len(centers)
    # Runs break at regressions or large vertical moves, the same notion
    # of adjacency the chain algorithm uses.
    boundaries = [
        i for i in range(len(xs) - 1)
        if xs[i + 1] - xs[i] < 0 or abs(ys[i + 1] - ys[i]) > params.chain_y_max
    ]
    sequences = _split_indices(len(xs), boundaries)

    def pick_pair(enforce_slope: bool):
        best = None
        for i in range(len(sequences) - 1):
            for j in range(i + 1, len(sequences)):
                idx = sequences[i] + sequences[j]
                a, _, err = _fit_line(xs[idx], ys[idx])
                if enforce_slope and abs(a) > params.merge_slope_max:
                    continue
                if best is None or err < best[0]:
                    best = (err, i, j)
        return best

    while len(sequences) > m:
        best = pick_pair(enforce_slope=True) or pick_pair(enforce_slope=False)
        if best is None:
            break
        _, i, j = best
        sequences[i] = sorted(sequences[i] + sequences[j])
        del sequences[j]

    order = sorted(range(len(sequences)), key=lambda s: (float(np.mean(ys[sequences[s]])), s))
    out = [0] * len(xs)
    for line, s in enumerate(order):
        # More sequences than lines left means the slope constraint was
        # unsatisfiable; clamp the overflow to the last line.
        for i in sequences[s]:
            out[i] = min(line, m - 1)
    return out


def _regress(xs, ys, stimulus, params):
    centers = np.asarray(stimulus.line_centers_y, dtype=float)
    n = len(xs)
    k_grid = np.linspace(params.regress_k_min, params.regress_k_max, GRID_STEPS)
    o_grid = np.linspace(params.regress_o_min, params.regress_o_max, GRID_STEPS)
    # s is bounded on a half-open interval; the grid starts one step in.
    s_lo, s_hi = params.regress_s_min, params.regress_s_max
    s_grid = s_lo + (s_hi - s_lo) * np.arange(1, GRID_STEPS_S + 1) / GRID_STEPS_S

    def min_sq_dist(k: float, o: np.ndarray) -> np.ndarray:
        # D[q] = sum_i min_j (y_i - k*x_i - o_q - c_j)^2
        base = ys[None, :] - k * xs[None, :] - centers[:, None]  # (m, n)
        r = base[None, :, :] - o[:, None, None]
        return np.sum(np.min(r * r, axis=1), axis=1)

    best = (-np.inf, k_grid[0], o_grid[0], s_grid[-1])
    log_s = np.log(s_grid)
    for k in k_grid:
        d = min_sq_dist(k, o_grid)  # (len(o),)
        ll = -n * log_s[None, :] - d[:, None] / (2.0 * s_grid[None, :] ** 2)
        q, t = np.unravel_index(np.argmax(ll), ll.shape)
        if ll[q, t] > best[0]:
            best = (float(ll[q, t]), float(k), float(o_grid[q]), float(s_grid[t]))

    def loglik(k: float, o: float, s: float) -> float:
        d = float(min_sq_dist(k, np.asarray([o]))[0])
        return -n * math.log(s) - d / (2.0 * s * s)

    steps = [
        (k_grid[1] - k_grid[0]) if GRID_STEPS > 1 else 0.0,
        (o_grid[1] - o_grid[0]) if GRID_STEPS > 1 else 0.0,
        (s_hi - s_lo) / GRID_STEPS_S,
    ]
    value, point = best[0], [best[1], best[2], best[3]]
    lo = [params.regress_k_min, params.regress_o_min, s_lo + 1e-9]
    hi = [params.regress_k_max, params.regress_o_max, s_hi]
    for _ in range(REFINE_ITERATIONS):
        improved = False
        for dim in range(3):
            for sign in (-1.0, 1.0):
                trial = list(point)
                trial[dim] = min(max(trial[dim] + sign * steps[dim], lo[dim]), hi[dim])
                v = loglik(*trial)
                if v > value:
                    value, point = v, trial
                    improved = True
        if not improved:
            steps = [s / 2.0 for s in steps]

    k, o, _ = point
    resid = np.abs(ys[None, :] - k * xs[None, :] - o - centers[:, None])
    return [int(j) for j in np.argmin(resid, axis=0)]


def _segment(xs, ys, stimulus, params):
    m = len(stimulus.line_centers_y)
    n = len(xs)
    dx = np.diff(xs)
    take = min(m - 1, len(dx))
    # Most negative jumps first; equal jumps split at the earlier gap.
    order = sorted(range(len(dx)), key=lambda i: (dx[i], i))
    boundaries = sorted(order[:take])
    out = [0] * n
    for line, segment in enumerate(_split_indices(n, boundaries)):
        for i in segment:
            out[i] = min(line, m - 1)
    return out


def _split(xs, ys, stimulus, params):
    centers = np.asarray(stimulus.line_centers_y)
    n = len(xs)
    dx = np.diff(xs)
    boundaries: list[int] = []
    if len(dx) and float(dx.min()) != float(dx.max()):
        two = np.asarray([dx.min(), dx.max()], dtype=float)
        labels = np.zeros(len(dx), dtype=int)
        for _ in range(KMEANS_MAX_ITER):
            new_labels = np.argmin(np.abs(dx[None, :] - two[:, None]), axis=0)
            new_two = two.copy()
            for j in range(2):
                members = dx[new_labels == j]
                if len(members):
                    new_two[j] = members.mean()
            done = bool(np.array_equal(new_labels, labels)) and np.allclose(new_two, two)
            labels, two = new_labels, new_two
            if done:
                break
        sweep_cluster = int(np.argmin(two))
        boundaries = [i for i in range(len(dx)) if labels[i] == sweep_cluster]
    out = [0] * n
    for segment in _split_indices(n, boundaries):
        line = _nearest_line(float(np.mean(ys[segment])), centers)
        for i in segment:
            out[i] = line
    return out


def _stretch(xs, ys, stimulus, params):
    centers = np.asarray(stimulus.line_centers_y)
    scale_grid = np.linspace(params.stretch_scale_min, params.stretch_scale_max, GRID_STEPS)
    offset_grid = np.linspace(params.stretch_offset_min, params.stretch_offset_max, GRID_STEPS)

    def total_error(scale: float, offset: float) -> float:
        t = scale * ys + offset
        return float(np.sum(np.min(np.abs(t[None, :] - centers[:, None]), axis=0)))

    best = (np.inf, scale_grid[0], offset_grid[0])
    for scale in scale_grid:
        t = scale * ys[None, :] + offset_grid[:, None]  # (q, n)
        err = np.sum(np.min(np.abs(t[None, :, :] - centers[:, None, None]), axis=0), axis=1)
        q = int(np.argmin(err))
        if err[q] < best[0]:
            best = (float(err[q]), float(scale), float(offset_grid[q]))

    value, point = best[0], [best[1], best[2]]
    steps = [
        (scale_grid[1] - scale_grid[0]) if GRID_STEPS > 1 else 0.0,
        (offset_grid[1] - offset_grid[0]) if GRID_STEPS > 1 else 0.0,
    ]
    lo = [params.stretch_scale_min, params.stretch_offset_min]
    hi = [params.stretch_scale_max, params.stretch_offset_max]
    for _ in range(REFINE_ITERATIONS):
        improved = False
        for dim in range(2):
            for sign in (-1.0, 1.0):
                trial = list(point)
                trial[dim] = min(max(trial[dim] + sign * steps[dim], lo[dim]), hi[dim])
                v = total_error(*trial)
                if v < value:
                    value, point = v, trial
                    improved = True
        if not improved:
            steps = [s / 2.0 for s in steps]

    transformed = point[0] * ys + point[1]
    return [_nearest_line(t, centers) for t in transformed]


def _warp(xs, ys, stimulus, params):
    words = stimulus.words
    wx = np.asarray([(w.x_min + w.x_max) / 2.0 for w in words])
    wy = np.asarray([(w.y_min + w.y_max) / 2.0 for w in words])
    cost = np.sqrt((xs[:, None] - wx[None, :]) ** 2 + (ys[:, None] - wy[None, :]) ** 2)
    path = _dtw_path(cost)
    matched: list[list[int]] = [[] for _ in xs]
    for i, j in path:
        matched[i].append(words[j].line_idx)
    out = []
    for lines in matched:
        counts: dict[int, int] = {}
        for line in lines:
            counts[line] = counts.get(line, 0) + 1
        top = max(counts.values())
        out.append(min(line for line, c in counts.items() if c == top))
    return out


def _slice(xs, ys, stimulus, params):
    centers = np.asarray(stimulus.line_centers_y)
    m = len(centers)
    spacing = stimulus.line_spacing() or 1.0
    run_y_max = params.slice_run_y_max if params.slice_run_y_max is not None else 0.5 * spacing
    boundaries = [
        i for i in range(len(xs) - 1)
        if abs(ys[i + 1] - ys[i]) > run_y_max or xs[i + 1] - xs[i] < -params.slice_x_back_max
    ]
    runs = _split_indices(len(xs), boundaries)
    mean_y = [float(np.mean(ys[r])) for r in runs]
    anchor = max(range(len(runs)), key=lambda r: (len(runs[r]), -r))
    lines = [0] * len(runs)
    lines[anchor] = _nearest_line(mean_y[anchor], centers)
    for r in range(anchor + 1, len(runs)):
        shift = math.floor((mean_y[r] - mean_y[r - 1]) / spacing + 0.5)
        lines[r] = min(max(lines[r - 1] + shift, 0), m - 1)
    for r in range(anchor - 1, -1, -1):
        shift = math.floor((mean_y[r] - mean_y[r + 1]) / spacing + 0.5)
        lines[r] = min(max(lines[r + 1] + shift, 0), m - 1)
    out = [0] * len(xs)
    for r, run in enumerate(runs):
        for i in run:
            out[i] = lines[r]
    return out


ALGORITHMS = {
    "attach": _attach,
    "chain": _chain,
    "cluster": _cluster,
    "compare": _compare,
    "merge": _merge,
    "regress": _regress,
    "segment": _segment,
    "split": _split,
    "stretch": _stretch,
    "warp": _warp,
    "slice": _slice,
}


def assign(method: str, fixations: list[Fixation], stimulus: Stimulus,
           params: AssignmentParams | None = None) -> LineAssignment:
    """Run one assignment algorithm; raises UnknownMethod/AlgorithmFailure."""
    if method not in ALGORITHMS:
        raise UnknownMethod(f"unknown assignment method {method!r}")
    params = params or AssignmentParams()
    centers = stimulus.line_centers_y
    if not fixations:
        return LineAssignment(algorithm=method, line_idx=[], corrected_y=[])
    xs = np.asarray([f.x for f in fixations], dtype=float)
    ys = np.asarray([f.y for f in fixations], dtype=float)
    try:
        line_idx = ALGORITHMS[method](xs, ys, stimulus, params)
    except Exception as exc:  # noqa: BLE001 - contract maps any failure
        raise AlgorithmFailure(method, str(exc)) from exc
    if len(line_idx) != len(fixations):
        raise AlgorithmFailure(method, "wrong output length")
    if any(j < 0 or j >= len(centers) for j in line_idx):
        raise AlgorithmFailure(method, "line index out of range")
    return LineAssignment(
        algorithm=method,
        line_idx=[int(j) for j in line_idx],
        corrected_y=[centers[int(j)] for j in line_idx],
    )


def assign_with_fallback(method: str, fixations, stimulus, params, warnings: list[str]) -> LineAssignment:
    """assign() that degrades to attach when allowed by config."""
    try:
        return assign(method, fixations, stimulus, params)
    except AlgorithmFailure as exc:
        if not (params and params.fallback_to_attach) or method == "attach":
            raise
        warnings.append(f"{method} failed ({exc.reason}); fell back to attach")
        fallback = assign("attach", fixations, stimulus, params)
        fallback.algorithm = method
        return fallback


def _member_order(labels: list[str]) -> list[int]:
    def key(pair):
        _, label = pair
        if label in WOC_PRECEDENCE:
            return (0, WOC_PRECEDENCE.index(label), "")
        return (1, 0, label)

    return [i for i, _ in sorted(enumerate(labels), key=key)]


def wisdom_of_crowds(assignments: list[LineAssignment]) -> LineAssignment:
    """Per-fixation modal vote over member assignments.

    Vote ties go to the earliest member in the fixed precedence order
    whose vote belongs to the tied set.
    """
    if not assignments:
        raise LengthMismatch("ensemble vote needs at least one member")
    n = len(assignments[0].line_idx)
    for a in assignments:
        if len(a.line_idx) != n:
            raise LengthMismatch(
                f"member {a.algorithm} has {len(a.line_idx)} votes, expected {n}"
            )
    order = _member_order([a.algorithm for a in assignments])
    line_idx: list[int] = []
    corrected: list[float] = []
    for i in range(n):
        counts: dict[int, int] = {}
        for a in assignments:
            vote = a.line_idx[i]
            counts[vote] = counts.get(vote, 0) + 1
        top = max(counts.values())
        tied = {vote for vote, c in counts.items() if c == top}
        if len(tied) == 1:
            winner = next(iter(tied))
        else:
            winner = next(
                assignments[k].line_idx[i] for k in order if assignments[k].line_idx[i] in tied
            )
        donor = next(a for a in assignments if a.line_idx[i] == winner)
        line_idx.append(winner)
        corrected.append(donor.corrected_y[i])
    return LineAssignment(algorithm="wisdom_of_crowds", line_idx=line_idx, corrected_y=corrected)


def y_correction(assignment: LineAssignment, fixations: list[Fixation]):
    """Signed per-fixation correction (center minus raw y) and its mean."""
    if len(assignment.line_idx) != len(fixations):
        raise LengthMismatch("assignment does not cover the fixation list")
    values = [c - f.y for c, f in zip(assignment.corrected_y, fixations)]
    mean = sum(values) / len(values) if values else 0.0
    return values, mean


def realign_saccades(saccades: list[Saccade], cleaned_fixations: list[Fixation],
                     assignment: LineAssignment) -> list[RealignedSaccade]:
    """Re-attach saccades to the surviving fixation sequence.

    Each consecutive surviving pair keeps at most one saccade: the
    latest-starting one inside [prev.end, next.start], i.e. the movement
    that arrives at the later fixation. Saccades landing on a fixation
    that was cleaned away therefore disappear with it.
    """
    out: list[RealignedSaccade] = []
    for i in range(len(cleaned_fixations) - 1):
        prev, nxt = cleaned_fixations[i], cleaned_fixations[i + 1]
        candidates = [s for s in saccades if prev.end_ms <= s.start_ms <= nxt.start_ms]
        if not candidates:
            continue
        sacc = max(candidates, key=lambda s: s.start_ms)
        out.append(
            RealignedSaccade(
                saccade=copy.copy(sacc),
                from_fix=i,
                to_fix=i + 1,
                from_line=assignment.line_idx[i],
                to_line=assignment.line_idx[i + 1],
                y_start_snapped=assignment.corrected_y[i],
                y_end_snapped=assignment.corrected_y[i + 1],
            )
        )
    return out
