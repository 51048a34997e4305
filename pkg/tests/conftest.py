"""Shared fixtures: a synthetic 3-line reading trial with known truth.

SYN1 is a monospace stimulus (3 lines, 10 words each, char width 10 px,
line centers y = 100/200/300, hulls 40 px tall) read strictly in order
with one fixation per word. Because the layout is generated, the true
line of every fixation is known by construction; drift variants distort
only the recorded y values, never the truth.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np
import pytest

from gazepipeline.asc_parser import Fixation, Saccade
from gazepipeline.stimulus import CharBox, Stimulus, build_stimulus

CHAR_W = 10.0
LINE_X0 = 100.0
LINE_TOPS = (80.0, 180.0, 280.0)
LINE_HEIGHT = 40.0

# Distinct word-length patterns per line keep the lines' word-center
# sequences distinguishable for sequence-matching algorithms.
WORD_LENGTHS = (
    (6, 5, 4, 7, 5, 6, 4, 5, 6, 7),
    (4, 7, 6, 3, 6, 5, 7, 4, 6, 5),
    (5, 4, 7, 6, 4, 7, 5, 6, 3, 6),
)


@dataclass
class Syn1:
    stimulus: Stimulus
    fixations: list[Fixation]
    saccades: list[Saccade]
    truth: list[int]
    word_centers: list[tuple[float, float]]  # reading-order (x, line top y)


def _letters(n: int, seed: int) -> str:
    alphabet = string.ascii_lowercase
    return "".join(alphabet[(seed + i) % 26] for i in range(n))


def make_boxes(lines: list[str], x0=100.0, y0=80.0, cw=10.0, line_h=40.0, gap=60.0):
    """Uniform monospace char boxes, one string per text line."""
    boxes = []
    idx = 0
    for li, text in enumerate(lines):
        top = y0 + li * (line_h + gap)
        for i, ch in enumerate(text):
            boxes.append(CharBox(idx, ch, x0 + i * cw, top, x0 + (i + 1) * cw, top + line_h))
            idx += 1
    return boxes


def syn1_stimulus() -> Stimulus:
    boxes: list[CharBox] = []
    idx = 0
    for line, lengths in enumerate(WORD_LENGTHS):
        x = LINE_X0
        y0 = LINE_TOPS[line]
        for w, n in enumerate(lengths):
            for ch in _letters(n, seed=line * 7 + w):
                boxes.append(CharBox(idx, ch, x, y0, x + CHAR_W, y0 + LINE_HEIGHT))
                idx += 1
                x += CHAR_W
            if w < len(lengths) - 1:
                boxes.append(CharBox(idx, " ", x, y0, x + CHAR_W, y0 + LINE_HEIGHT))
                idx += 1
                x += CHAR_W
    return build_stimulus(boxes)


def build_syn1(offset: float = 0.0, drift_total: float = 0.0, noise_sigma: float = 0.0,
               seed: int = 0, duration_ms: int = 200, gap_ms: int = 50) -> Syn1:
    """One fixation per word in reading order, with optional y distortion.

    offset shifts every y; drift_total is reached linearly at the last
    fixation; noise adds seeded Gaussian jitter.
    """
    stimulus = syn1_stimulus()
    centers_x = []
    truth = []
    for line in range(3):
        words = stimulus.line_words(line)
        for w in words:
            centers_x.append(((w.x_min + w.x_max) / 2.0, LINE_TOPS[line]))
            truth.append(line)

    rng = np.random.default_rng(seed)
    n = len(centers_x)
    fixations: list[Fixation] = []
    saccades: list[Saccade] = []
    t = 1000
    step = duration_ms + gap_ms
    for i, ((cx, top), line) in enumerate(zip(centers_x, truth)):
        y = top + LINE_HEIGHT / 2.0 + offset
        if drift_total:
            y += drift_total * i / (n - 1)
        if noise_sigma:
            y += float(rng.normal(0.0, noise_sigma))
        fixations.append(
            Fixation(index=i, eye="R", start_ms=t, end_ms=t + duration_ms,
                     duration_ms=duration_ms, x=cx, y=y)
        )
        t += step
    for a, b in zip(fixations, fixations[1:]):
        saccades.append(
            Saccade(eye="R", start_ms=a.end_ms, end_ms=b.start_ms,
                    duration_ms=b.start_ms - a.end_ms,
                    x_start=a.x, y_start=a.y, x_end=b.x, y_end=b.y,
                    amplitude_deg=1.0, peak_velocity=100.0)
        )
    return Syn1(stimulus=stimulus, fixations=fixations, saccades=saccades,
                truth=truth, word_centers=centers_x)


def accuracy(line_idx: list[int], truth: list[int]) -> float:
    assert len(line_idx) == len(truth)
    hits = sum(1 for a, b in zip(line_idx, truth) if a == b)
    return hits / len(truth)


@pytest.fixture
def syn1_zero() -> Syn1:
    return build_syn1()


@pytest.fixture
def syn1_offset40() -> Syn1:
    return build_syn1(offset=40.0)


@pytest.fixture
def syn1_drift60() -> Syn1:
    # Upward drift: late fixations land closer to the line above.
    return build_syn1(drift_total=-60.0)


@pytest.fixture
def syn1_noise() -> Syn1:
    return build_syn1(noise_sigma=15.0, seed=7)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one PASS/FAIL line per release-gate test (test_acceptance.py)."""
    rows = []
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            if key != "error" and getattr(rep, "when", "call") != "call":
                continue
            line = rep.location[1] if getattr(rep, "location", None) else 0
            rows.append((line, nodeid.split("::")[-1],
                         "PASS" if key == "passed" else "FAIL"))
    if rows:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, name, verdict in sorted(rows):
            terminalreporter.write_line(f"{verdict}  {name}")
