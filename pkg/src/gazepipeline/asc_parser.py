"""EyeLink ASC reading: event tokenization and trial segmentation.

The parser makes two passes. Pass one finds trial spans from start/end
flag messages and collects per-span metadata (TRIAL_VAR, IAREA FILE,
REGION CHAR, screen geometry). Pass two extracts fixations, saccades and
blinks whose time intervals overlap each span, clipping events that cross
a span boundary. Malformed lines never abort a parse; they are reported
in the returned warning list.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

from .errors import MalformedEventLine, MalformedRegionLine, NoTrialsFound
from .stimulus import CharBox

BUILTIN_START_FLAGS = ("SYNCTIME", "START", "GAZE TARGET ON")
BUILTIN_END_FLAGS = ("ENDBUTTON", "END", "KEYBOARD")

_TRUTHY = {"1", "true", "yes"}


@dataclass
class AscParseConfig:
    start_flags: list[str] = field(default_factory=lambda: ["SYNCTIME"])
    end_flags: list[str] = field(default_factory=lambda: list(BUILTIN_END_FLAGS))
    custom_start: str | None = None
    custom_end: str | None = None
    discard_fixation_at_start: bool = True
    include_spaces_in_words: bool = False
    exclude_practice_and_questions: bool = True

    def resolved_start_flags(self) -> list[str]:
        flags = list(self.start_flags)
        if self.custom_start:
            flags.append(self.custom_start)
        return flags

    def resolved_end_flags(self) -> list[str]:
        flags = list(self.end_flags)
        if self.custom_end:
            flags.append(self.custom_end)
        return flags

    def validate(self) -> None:
        starts, ends = self.resolved_start_flags(), self.resolved_end_flags()
        if not starts or not ends:
            raise ValueError("at least one start flag and one end flag required")
        for flag in starts + ends:
            if not flag or "\n" in flag:
                raise ValueError(f"invalid trial flag {flag!r}")


@dataclass
class Fixation:
    index: int
    eye: str
    start_ms: int
    end_ms: int
    duration_ms: int
    x: float
    y: float
    pupil: float = 0.0
    blink_before: bool = False
    blink_after: bool = False


@dataclass
class Saccade:
    eye: str
    start_ms: int
    end_ms: int
    duration_ms: int
    x_start: float
    y_start: float
    x_end: float
    y_end: float
    amplitude_deg: float
    peak_velocity: float


@dataclass
class Blink:
    eye: str
    start_ms: int
    end_ms: int
    duration_ms: int


@dataclass
class Message:
    time_ms: int
    text: str


@dataclass
class TrialMetadata:
    trial_id: str = ""
    condition: str = ""
    item: str = ""
    question_response: str | None = None
    screen_w: int = 0
    screen_h: int = 0
    start_line_idx: int = -1
    end_line_idx: int = -1
    start_ms: int = 0
    end_ms: int = 0
    trial_vars: dict[str, str] = field(default_factory=dict)
    ias_file: str | None = None


@dataclass
class TrialRecord:
    metadata: TrialMetadata
    fixations: list[Fixation] = field(default_factory=list)
    saccades: list[Saccade] = field(default_factory=list)
    blinks: list[Blink] = field(default_factory=list)
    char_boxes: list[CharBox] = field(default_factory=list)
    is_practice: bool = False
    is_question: bool = False
    messages: list[Message] = field(default_factory=list)


@dataclass
class ParseResult:
    """Trial records plus non-fatal diagnostics gathered along the way."""

    trials: list[TrialRecord]
    warnings: list[str] = field(default_factory=list)


def _time(token: str) -> int:
    # Event timestamps are ms; 2 kHz recordings emit .5 fractions which
    # we truncate.
    return int(float(token))


def _float(token: str) -> float:
    if token == ".":
        return math.nan
    return float(token)


def parse_event_line(line: str):
    """Classify one ASC line.

    Returns (kind, value) with kind in {"fixation", "saccade", "blink",
    "message", "sample", "unknown"}. Start markers (SFIX/SSACC/SBLINK)
    are arity-checked, then reported as unknown since only end events
    carry data.
    """
    parts = line.split()
    if not parts:
        return "unknown", None
    tag = parts[0]
    try:
        if tag == "EFIX":
            if len(parts) != 8:
                raise MalformedEventLine(f"EFIX expects 7 fields: {line!r}")
            start, end = _time(parts[2]), _time(parts[3])
            return "fixation", Fixation(
                index=-1,
                eye=parts[1],
                start_ms=start,
                end_ms=end,
                duration_ms=end - start,
                x=_float(parts[5]),
                y=_float(parts[6]),
                pupil=_float(parts[7]),
            )
        if tag == "ESACC":
            if len(parts) != 11:
                raise MalformedEventLine(f"ESACC expects 10 fields: {line!r}")
            start, end = _time(parts[2]), _time(parts[3])
            return "saccade", Saccade(
                eye=parts[1],
                start_ms=start,
                end_ms=end,
                duration_ms=end - start,
                x_start=_float(parts[5]),
                y_start=_float(parts[6]),
                x_end=_float(parts[7]),
                y_end=_float(parts[8]),
                amplitude_deg=_float(parts[9]),
                peak_velocity=_float(parts[10]),
            )
        if tag == "EBLINK":
            if len(parts) != 5:
                raise MalformedEventLine(f"EBLINK expects 4 fields: {line!r}")
            start, end = _time(parts[2]), _time(parts[3])
            return "blink", Blink(
                eye=parts[1], start_ms=start, end_ms=end, duration_ms=end - start
            )
        if tag == "MSG":
            if len(parts) < 2:
                raise MalformedEventLine(f"MSG without timestamp: {line!r}")
            rest = line.split(None, 2)
            payload = rest[2] if len(rest) > 2 else ""
            return "message", Message(time_ms=_time(parts[1]), text=payload)
        if tag in ("SFIX", "SSACC", "SBLINK"):
            if len(parts) != 3:
                raise MalformedEventLine(f"{tag} expects 2 fields: {line!r}")
            return "unknown", None
    except MalformedEventLine:
        raise
    except ValueError:
        raise MalformedEventLine(f"non-numeric field in {line!r}") from None
    # Raw samples start with the integer timestamp.
    first = tag.rstrip(".")
    if first and (first.isdigit() or (first[0] == "-" and first[1:].isdigit())):
        return "sample", None
    return "unknown", None


def _payload_matches(payload: str, flags: list[str]) -> str | None:
    for flag in flags:
        if payload.startswith(flag):
            return flag
    return None


def segment_trials(lines: list[str], config: AscParseConfig):
    """Find (start_line_idx, end_line_idx, start_ms, end_ms) trial spans.

    Flags are prefix-matched against MSG payloads. A second start before
    an end restarts the span; a trailing start without an end is dropped.
    Returns (spans, warnings).
    """
    starts = config.resolved_start_flags()
    ends = config.resolved_end_flags()
    spans: list[tuple[int, int, int, int]] = []
    warnings: list[str] = []
    open_start: tuple[int, int] | None = None  # (line_idx, time_ms)

    for idx, line in enumerate(lines):
        if not line.startswith("MSG"):
            continue
        try:
            kind, msg = parse_event_line(line)
        except MalformedEventLine:
            continue
        if kind != "message":
            continue
        # Check end first so a flag pair like START/END nested in one
        # payload family cannot re-trigger a start on the closing line.
        if open_start is not None and _payload_matches(msg.text, ends):
            spans.append((open_start[0], idx, open_start[1], msg.time_ms))
            open_start = None
            continue
        if _payload_matches(msg.text, starts):
            if open_start is not None:
                warnings.append(
                    f"line {idx + 1}: start flag before previous trial ended; "
                    "restarting span"
                )
            open_start = (idx, msg.time_ms)
    if open_start is not None:
        warnings.append(
            f"line {open_start[0] + 1}: start flag without matching end flag; span skipped"
        )
    return spans, warnings


def extract_region_chars(trial_lines: list[str]) -> tuple[list[CharBox], list[str]]:
    """Collect REGION CHAR boxes in file order.

    The char field is either a single token, the word "space", or absent
    entirely (a literal blank collapses under whitespace splitting); both
    space encodings map to " ".
    """
    boxes: list[CharBox] = []
    warnings: list[str] = []
    space_note: str | None = None
    for line in trial_lines:
        if "REGION CHAR" not in line or not line.startswith("MSG"):
            continue
        payload = line.split("REGION CHAR", 1)[1].split()
        try:
            if len(payload) == 7:
                char = " " if payload[2].lower() == "space" else payload[2]
                if payload[2].lower() == "space":
                    space_note = "space encoded as token 'space'"
                coords = payload[3:7]
            elif len(payload) == 6:
                char = " "
                coords = payload[2:6]
                space_note = "space encoded as literal blank"
            else:
                raise MalformedRegionLine(f"bad arity: {line!r}")
            x_min, y_min, x_max, y_max = (float(v) for v in coords)
        except (ValueError, MalformedRegionLine) as exc:
            warnings.append(f"skipped REGION CHAR line: {exc}")
            continue
        boxes.append(
            CharBox(
                index=len(boxes),
                char=char,
                x_min=x_min,
                y_min=y_min,
                x_max=x_max,
                y_max=y_max,
            )
        )
    if space_note:
        warnings.append(f"region chars: {space_note}")
    return boxes, warnings


def _strip_dataviewer_prefix(payload: str) -> str:
    return payload[3:].lstrip() if payload.startswith("!V ") else payload


def extract_metadata(trial_lines: list[str]) -> TrialMetadata:
    """Pull TRIAL_VAR, IAREA FILE, TRIALID and screen geometry messages."""
    meta = TrialMetadata()
    for line in trial_lines:
        if not line.startswith("MSG"):
            continue
        try:
            kind, msg = parse_event_line(line)
        except MalformedEventLine:
            continue
        if kind != "message":
            continue
        payload = _strip_dataviewer_prefix(msg.text)
        parts = payload.split()
        if not parts:
            continue
        if parts[0] == "TRIAL_VAR" and len(parts) >= 3:
            meta.trial_vars[parts[1]] = " ".join(parts[2:])
        elif parts[0] == "TRIALID" and len(parts) >= 2:
            meta.trial_id = parts[1]
        elif parts[0] == "IAREA" and len(parts) >= 3 and parts[1] == "FILE":
            meta.ias_file = parts[2]
        elif parts[0] in ("DISPLAY_COORDS", "GAZE_COORDS") and len(parts) >= 5:
            try:
                x1, y1, x2, y2 = (float(v) for v in parts[1:5])
            except ValueError:
                continue
            meta.screen_w = int(x2 - x1 + 1)
            meta.screen_h = int(y2 - y1 + 1)
    meta.condition = meta.trial_vars.get("condition", "")
    meta.item = meta.trial_vars.get("item", "")
    for key in ("question_response", "response", "answer"):
        if key in meta.trial_vars:
            meta.question_response = meta.trial_vars[key]
            break
    return meta


def annotate_blink_adjacency(fixations: list[Fixation], blinks: list[Blink]) -> list[Fixation]:
    """Set blink_before/blink_after from blink onsets between fixations.

    A blink starting in (fix[i].end, fix[i+1].start] flags both
    neighbors. Blinks before the first or after the last fixation flag
    only the single neighbor.
    """
    if not fixations:
        return fixations
    for f in fixations:
        f.blink_before = False
        f.blink_after = False
    onsets = sorted(b.start_ms for b in blinks)

    def any_onset(lo: float, hi: float) -> bool:
        # half-open (lo, hi]
        return any(lo < t <= hi for t in onsets)

    if any_onset(-math.inf, fixations[0].start_ms):
        fixations[0].blink_before = True
    for prev, nxt in zip(fixations, fixations[1:]):
        if any_onset(prev.end_ms, nxt.start_ms):
            prev.blink_after = True
            nxt.blink_before = True
    if any_onset(fixations[-1].end_ms, math.inf):
        fixations[-1].blink_after = True
    return fixations


def _majority_eye(fixations: list[Fixation]) -> str:
    n_left = sum(1 for f in fixations if f.eye == "L")
    n_right = len(fixations) - n_left
    # Tie (including the binocular edge case) keeps the left eye.
    return "R" if n_right > n_left else "L"


def parse_asc(text: str, config: AscParseConfig | None = None) -> ParseResult:
    """Parse ASC text into trial records.

    Raises NoTrialsFound when no complete start/end span exists. All
    other problems (malformed lines, unbalanced flags, restarted spans)
    become warnings.
    """
    config = config or AscParseConfig()
    config.validate()
    lines = text.splitlines()
    spans, warnings = segment_trials(lines, config)
    if not spans:
        raise NoTrialsFound("no complete trial span matched the start/end flags")

    # Tokenize every event line once; spans then select by time overlap.
    events: list[tuple[str, object]] = []
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(("MSG", "REGION")):
            continue
        try:
            kind, value = parse_event_line(stripped)
        except MalformedEventLine as exc:
            warnings.append(f"line {lineno}: {exc}")
            continue
        if kind in ("fixation", "saccade", "blink"):
            events.append((kind, value))

    # Metadata and regions often sit outside the recording span, so each
    # trial owns everything between its neighbors' spans. A TRIALID in the
    # gap marks where the next trial's preamble begins; without one the
    # whole gap belongs to the trial that just ended (post-trial vars).
    def _preamble_start(gap_lo: int, gap_hi: int) -> int:
        for idx in range(gap_lo, gap_hi):
            line = lines[idx]
            if line.startswith("MSG"):
                try:
                    kind, msg = parse_event_line(line)
                except MalformedEventLine:
                    continue
                if kind == "message" and _strip_dataviewer_prefix(msg.text).startswith("TRIALID"):
                    return idx
        return gap_hi

    # boundaries[k] = first window line of trial k; gaps are partitioned.
    boundaries = [0]
    for k in range(1, len(spans)):
        boundaries.append(_preamble_start(spans[k - 1][1] + 1, spans[k][0]))
    boundaries.append(len(lines))

    trials: list[TrialRecord] = []
    for k, (start_idx, end_idx, start_ms, end_ms) in enumerate(spans):
        window = lines[boundaries[k]:boundaries[k + 1]]

        meta = extract_metadata(window)
        meta.start_line_idx = start_idx
        meta.end_line_idx = end_idx
        meta.start_ms = start_ms
        meta.end_ms = end_ms
        if not meta.trial_id:
            meta.trial_id = f"trial_{k}"
        boxes, region_warnings = extract_region_chars(window)
        warnings.extend(f"trial {meta.trial_id}: {w}" for w in region_warnings)

        fixations: list[Fixation] = []
        saccades: list[Saccade] = []
        blinks: list[Blink] = []
        for kind, value in events:
            ev = value
            if not (ev.end_ms > start_ms and ev.start_ms < end_ms):
                continue
            if kind == "fixation" and ev.start_ms < start_ms and config.discard_fixation_at_start:
                continue
            clipped_start = max(ev.start_ms, start_ms)
            clipped_end = min(ev.end_ms, end_ms)
            if clipped_end <= clipped_start:
                continue
            ev = copy.copy(ev)
            ev.start_ms = clipped_start
            ev.end_ms = clipped_end
            ev.duration_ms = clipped_end - clipped_start
            {"fixation": fixations, "saccade": saccades, "blink": blinks}[kind].append(ev)

        eye = _majority_eye(fixations)
        fixations = [f for f in fixations if f.eye == eye]
        saccades = [s for s in saccades if s.eye == eye]
        blinks = [b for b in blinks if b.eye == eye]

        fixations.sort(key=lambda f: f.start_ms)
        deduped: list[Fixation] = []
        for f in fixations:
            if deduped and f.start_ms <= deduped[-1].start_ms:
                warnings.append(
                    f"trial {meta.trial_id}: dropped fixation at {f.start_ms} "
                    "overlapping the previous one"
                )
                continue
            deduped.append(f)
        for i, f in enumerate(deduped):
            f.index = i
        annotate_blink_adjacency(deduped, blinks)
        saccades.sort(key=lambda s: s.start_ms)
        blinks.sort(key=lambda b: b.start_ms)

        vars_lower = {key.lower(): v.strip().lower() for key, v in meta.trial_vars.items()}
        is_practice = vars_lower.get("practice") in _TRUTHY
        is_question = vars_lower.get("question") in _TRUTHY

        messages = []
        for line in window:
            if line.startswith("MSG"):
                try:
                    kind, msg = parse_event_line(line)
                except MalformedEventLine:
                    continue
                if kind == "message":
                    messages.append(msg)

        trials.append(
            TrialRecord(
                metadata=meta,
                fixations=deduped,
                saccades=saccades,
                blinks=blinks,
                char_boxes=boxes,
                is_practice=is_practice,
                is_question=is_question,
                messages=messages,
            )
        )

    if config.exclude_practice_and_questions:
        trials = [t for t in trials if not (t.is_practice or t.is_question)]

    return ParseResult(trials=trials, warnings=warnings)
