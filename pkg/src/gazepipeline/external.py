"""Boundary for plugging in out-of-process line assigners.

Learned assigners ship as separate programs or services; we exchange one
JSON document each way. The locator scheme picks the transport: http(s)
URLs get a POST, anything else runs as a subprocess reading stdin and
writing stdout.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import urllib.error
import urllib.request
from dataclasses import dataclass

from .errors import ExternalTimeout, InvalidExternalOutput
from .line_assign import LineAssignment
from .stimulus import Stimulus


@dataclass
class ExternalAssignerHandle:
    locator: str
    timeout_ms: int = 10_000
    label: str = "external"

    def is_http(self) -> bool:
        return self.locator.startswith(("http://", "https://"))


def build_request(fixations, stimulus: Stimulus) -> dict:
    return {
        "fixations": [
            {"x": f.x, "y": f.y, "start_ms": f.start_ms, "duration_ms": f.duration_ms}
            for f in fixations
        ],
        "lines": [
            {"center_y": stimulus.line_centers_y[j], "x_min": hull[0], "x_max": hull[2]}
            for j, hull in enumerate(stimulus.line_hulls)
        ],
        "chars": [
            {"char": c.char, "x_min": c.x_min, "y_min": c.y_min,
             "x_max": c.x_max, "y_max": c.y_max}
            for c in stimulus.chars
        ],
    }


def _transport(handle: ExternalAssignerHandle, payload: bytes) -> bytes:
    timeout_s = handle.timeout_ms / 1000.0
    if handle.is_http():
        req = urllib.request.Request(
            handle.locator, data=payload, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=timeout_s) as resp:
                return resp.read()
        except TimeoutError as exc:
            raise ExternalTimeout(f"no response within {handle.timeout_ms} ms") from exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, TimeoutError):
                raise ExternalTimeout(f"no response within {handle.timeout_ms} ms") from exc
            raise ExternalTimeout(f"endpoint unreachable: {exc.reason}") from exc
    try:
        proc = subprocess.run(
            shlex.split(handle.locator),
            input=payload,
            capture_output=True,
            timeout=timeout_s,
        )
    except subprocess.TimeoutExpired as exc:
        raise ExternalTimeout(f"assigner exceeded {handle.timeout_ms} ms") from exc
    except OSError as exc:
        raise ExternalTimeout(f"assigner could not start: {exc}") from exc
    if proc.returncode != 0:
        raise InvalidExternalOutput(
            f"assigner exited with {proc.returncode}: {proc.stderr.decode(errors='replace')[:200]}"
        )
    return proc.stdout


def apply_external_assigner(handle: ExternalAssignerHandle, fixations,
                            stimulus: Stimulus) -> LineAssignment:
    """Call the external assigner and validate its per-fixation indices."""
    payload = json.dumps(build_request(fixations, stimulus)).encode()
    raw = _transport(handle, payload)
    try:
        doc = json.loads(raw.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InvalidExternalOutput(f"response is not JSON: {exc}") from exc
    if not isinstance(doc, dict) or "line_idx" not in doc:
        raise InvalidExternalOutput("response lacks a line_idx field")
    line_idx = doc["line_idx"]
    if not isinstance(line_idx, list) or len(line_idx) != len(fixations):
        raise InvalidExternalOutput(
            f"expected {len(fixations)} indices, got "
            f"{len(line_idx) if isinstance(line_idx, list) else type(line_idx).__name__}"
        )
    m = stimulus.n_lines
    cleaned: list[int] = []
    for v in line_idx:
        if not isinstance(v, int) or isinstance(v, bool) or not (0 <= v < m):
            raise InvalidExternalOutput(f"line index {v!r} outside [0, {m})")
        cleaned.append(v)
    return LineAssignment(
        algorithm=handle.label,
        line_idx=cleaned,
        corrected_y=[stimulus.line_centers_y[v] for v in cleaned],
    )
