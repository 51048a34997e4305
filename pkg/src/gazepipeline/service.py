"""Session-oriented HTTP API over the pipeline.

Mirrors the interactive workflow: create a session, upload recordings,
inspect parsed trials, run clean/assign/measures per trial with config
patches, then launch whole-corpus batch jobs and download the archive.
Sessions live in memory with idle expiry; per-trial stage results are
cached under chained config hashes so an unchanged config returns the
cached bytes and a changed one invalidates exactly the downstream
stages.
"""

from __future__ import annotations

import io
import os
import secrets
import threading
import time
import zipfile
from dataclasses import asdict, dataclass, field

from fastapi import FastAPI, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from .asc_parser import TrialRecord, parse_asc
from .batch import run_batch
from .cleaning import clean_fixations
from .config import WOC_LABEL, PipelineConfig, config_to_dict, hash_config, load_config
from .errors import (
    AlgorithmFailure,
    GazePipelineError,
    InvalidConfig,
    MissingIasFile,
    NoTrialsFound,
)
from .line_assign import (
    assign_with_fallback,
    realign_saccades,
    wisdom_of_crowds,
    y_correction,
)
from .measures import (
    assign_words,
    fixation_features,
    row_to_dict,
    saccade_features,
    sentence_measures,
    word_measures,
)
from .scenes import build_scene, saccade_segments
from .stimulus import attach_ias_to_trials, build_stimulus

DEFAULT_MAX_UPLOAD_BYTES = 1 << 30
DEFAULT_SESSION_TTL_S = 2 * 60 * 60

STAGES = ("clean", "assign", "measures")


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, detail=None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail


@dataclass
class Session:
    session_id: str
    config: PipelineConfig = field(default_factory=PipelineConfig)
    files: dict = field(default_factory=dict)  # name -> bytes
    ias: dict = field(default_factory=dict)  # name -> text
    trials: dict = field(default_factory=dict)  # tid -> (file name, TrialRecord)
    parse_warnings: dict = field(default_factory=dict)  # file name -> [str]
    parsed_with: str = ""
    cache: dict = field(default_factory=dict)  # (tid, stage, hash) -> (response, artifacts)
    last_used: float = field(default_factory=time.monotonic)
    lock: threading.RLock = field(default_factory=threading.RLock)


@dataclass
class Job:
    job_id: str
    session_id: str
    state: str = "queued"  # queued | running | done | error
    done_files: int = 0
    total_files: int = 0
    archive: bytes = b""
    warnings: list = field(default_factory=list)
    error: str = ""


def _safe_tid_part(name: str) -> str:
    import re

    return re.sub(r"[^A-Za-z0-9._-]+", "_", name) or "file"


def _fixation_dicts(fixations) -> list[dict]:
    return [
        {
            "i": f.index,
            "x": f.x,
            "y": f.y,
            "start_ms": f.start_ms,
            "end_ms": f.end_ms,
            "duration_ms": f.duration_ms,
            "blink_before": f.blink_before,
            "blink_after": f.blink_after,
        }
        for f in fixations
    ]


def create_app(
    data_dir: str | None = None,
    max_upload_bytes: int | None = None,
    session_ttl_s: float | None = None,
) -> FastAPI:
    data_dir = data_dir if data_dir is not None else os.environ.get("DATA_DIR")
    max_upload = max_upload_bytes if max_upload_bytes is not None else int(
        os.environ.get("MAX_UPLOAD_BYTES", DEFAULT_MAX_UPLOAD_BYTES)
    )
    ttl = session_ttl_s if session_ttl_s is not None else float(
        os.environ.get("SESSION_TTL_S", DEFAULT_SESSION_TTL_S)
    )

    app = FastAPI(title="gazepipeline service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    sessions: dict[str, Session] = {}
    jobs: dict[str, Job] = {}
    registry_lock = threading.RLock()

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.code, "message": exc.message, "detail": exc.detail},
        )

    @app.exception_handler(GazePipelineError)
    async def _pipeline_error(_req: Request, exc: GazePipelineError):
        status = 400
        if isinstance(exc, InvalidConfig):
            return JSONResponse(
                status_code=status,
                content={"code": "invalid_config", "message": str(exc),
                         "detail": {"key": exc.key, "reason": exc.reason}},
            )
        return JSONResponse(
            status_code=status,
            content={"code": type(exc).__name__, "message": str(exc), "detail": None},
        )

    def get_session(session_id: str) -> Session:
        with registry_lock:
            now = time.monotonic()
            for sid in [s for s, sess in sessions.items() if now - sess.last_used > ttl]:
                del sessions[sid]
            session = sessions.get(session_id)
            if session is None:
                raise ApiError(404, "unknown_session", f"no session {session_id!r}")
            session.last_used = now
            return session

    def ensure_parsed(session: Session) -> None:
        """(Re)parse uploads whenever the parse config changed."""
        parse_hash = hash_config(asdict(session.config.parse))
        if session.parsed_with == parse_hash:
            return
        session.trials.clear()
        session.cache.clear()
        session.parse_warnings.clear()
        for name in sorted(session.files):
            warnings: list[str] = []
            try:
                parsed = parse_asc(
                    session.files[name].decode("utf-8", errors="replace"),
                    session.config.parse,
                )
                warnings.extend(parsed.warnings)
                warnings.extend(attach_ias_to_trials(parsed.trials, session.ias))
                for k, trial in enumerate(parsed.trials):
                    session.trials[f"{_safe_tid_part(name)}:{k}"] = (name, trial)
            except NoTrialsFound as exc:
                warnings.append(str(exc))
            session.parse_warnings[name] = warnings
        session.parsed_with = parse_hash

    def trial_entry(tid: str, name: str, trial: TrialRecord) -> dict:
        return {
            "tid": tid,
            "file": name,
            "trial_id": trial.metadata.trial_id,
            "n_fixations": len(trial.fixations),
            "n_saccades": len(trial.saccades),
            "n_blinks": len(trial.blinks),
            "has_stimulus": bool(trial.char_boxes),
            "is_practice": trial.is_practice,
            "is_question": trial.is_question,
            "metadata": asdict(trial.metadata),
        }

    # --- sessions ---------------------------------------------------------

    @app.post("/sessions", status_code=201)
    def create_session():
        session_id = secrets.token_urlsafe(16)
        with registry_lock:
            sessions[session_id] = Session(session_id=session_id)
        return {"session_id": session_id}

    @app.post("/sessions/{session_id}/files")
    async def upload_files(session_id: str, files: list[UploadFile] | None = None):
        session = get_session(session_id)
        if not files:
            raise ApiError(400, "empty_upload", "no files in request")
        payloads = []
        total = 0
        for f in files:
            data = await f.read()
            total += len(data)
            if f.filename and (f.filename.lower().endswith(".zip") or data[:4] == b"PK\x03\x04"):
                try:
                    with zipfile.ZipFile(io.BytesIO(data)) as zf:
                        total += sum(i.file_size for i in zf.infolist())
                except zipfile.BadZipFile:
                    pass
            payloads.append((f.filename or "upload", data))
        if total > max_upload:
            raise ApiError(413, "upload_too_large",
                           f"upload of {total} bytes exceeds the {max_upload} byte cap")

        with session.lock:
            warnings: list[str] = []
            for name, data in payloads:
                low = name.lower()
                if low.endswith(".ias"):
                    if name in session.ias:
                        warnings.append(f"replaced previously uploaded {name}")
                    session.ias[name] = data.decode("utf-8", errors="replace")
                    continue
                if low.endswith(".zip") or data[:4] == b"PK\x03\x04":
                    try:
                        with zipfile.ZipFile(io.BytesIO(data)) as zf:
                            for info in sorted(zf.infolist(), key=lambda i: i.filename):
                                if info.is_dir():
                                    continue
                                inner_low = info.filename.lower()
                                if inner_low.endswith(".asc"):
                                    if info.filename in session.files:
                                        warnings.append(f"replaced previously uploaded {info.filename}")
                                    session.files[info.filename] = zf.read(info)
                                elif inner_low.endswith(".ias"):
                                    short = info.filename.rsplit("/", 1)[-1]
                                    session.ias[short] = zf.read(info).decode("utf-8", errors="replace")
                                else:
                                    warnings.append(f"{name}: ignored zip entry {info.filename}")
                    except zipfile.BadZipFile:
                        warnings.append(f"{name}: not a readable zip archive")
                    continue
                if name in session.files:
                    warnings.append(f"replaced previously uploaded {name}")
                session.files[name] = data
            if data_dir:
                spill = os.path.join(data_dir, session.session_id)
                os.makedirs(spill, exist_ok=True)
                for name, data in payloads:
                    with open(os.path.join(spill, _safe_tid_part(name)), "wb") as fh:
                        fh.write(data)
            session.parsed_with = ""  # force re-parse
            ensure_parsed(session)
            return {
                "files": sorted(session.files),
                "trials": [
                    trial_entry(tid, name, trial)
                    for tid, (name, trial) in sorted(session.trials.items())
                ],
                "warnings": warnings
                + [w for name in sorted(session.parse_warnings)
                   for w in session.parse_warnings[name]],
            }

    @app.get("/sessions/{session_id}/trials")
    def list_trials(session_id: str):
        session = get_session(session_id)
        with session.lock:
            ensure_parsed(session)
            return {
                "trials": [
                    trial_entry(tid, name, trial)
                    for tid, (name, trial) in sorted(session.trials.items())
                ]
            }

    @app.get("/sessions/{session_id}/config")
    def get_config(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return config_to_dict(session.config)

    @app.put("/sessions/{session_id}/config")
    def put_config(session_id: str, body: dict):
        session = get_session(session_id)
        with session.lock:
            session.config = load_config(body)
            return config_to_dict(session.config)

    # --- per-trial stages --------------------------------------------------

    def stage_hashes(config: PipelineConfig) -> dict[str, str]:
        clean_h = hash_config(
            {"parse": asdict(config.parse), "cleaning": asdict(config.cleaning)}
        )
        assign_h = hash_config(
            {"clean": clean_h, "assignment": asdict(config.assignment),
             "methods": config.methods}
        )
        measures_h = hash_config(
            {"assign": assign_h, "measures": asdict(config.measures)}
        )
        return {"clean": clean_h, "assign": assign_h, "measures": measures_h}

    def run_clean_stage(session: Session, tid: str, trial: TrialRecord, h: str):
        key = (tid, "clean", h)
        if key in session.cache:
            return session.cache[key]
        if not trial.char_boxes:
            raise MissingIasFile(trial.metadata.trial_id, trial.metadata.ias_file)
        stimulus = build_stimulus(trial.char_boxes, session.config.parse.include_spaces_in_words)
        cleaned, report = clean_fixations(
            trial.fixations, trial.blinks, stimulus, session.config.cleaning
        )
        response = {
            "stage": "clean",
            "hash": h,
            "n_before": len(trial.fixations),
            "n_after": len(cleaned),
            "report": {
                "counts": report.counts,
                "dispositions": [
                    {"index": d.index, "status": d.status, "merged_into": d.merged_into}
                    for d in report.dispositions
                ],
                "merge_pairs": [list(p) for p in report.merge_pairs],
            },
            "fixations": _fixation_dicts(cleaned),
            "scene": build_scene(
                stimulus,
                raw_fixations=trial.fixations,
                cleaned_fixations=cleaned,
                report=report,
            ),
        }
        session.cache[key] = (response, (stimulus, cleaned, report))
        return session.cache[key]

    def run_assign_stage(session: Session, tid: str, trial: TrialRecord,
                         hashes: dict[str, str]):
        key = (tid, "assign", hashes["assign"])
        if key in session.cache:
            return session.cache[key]
        clean_key = (tid, "clean", hashes["clean"])
        if clean_key not in session.cache:
            raise ApiError(409, "ordering_violation",
                           "run the clean stage before assign for this trial/config")
        stimulus, cleaned, _ = session.cache[clean_key][1]
        config = session.config
        warnings: list[str] = []
        computed: dict[str, object] = {}

        def compute(label: str):
            if label not in computed:
                if label == WOC_LABEL:
                    members = [compute(m) for m in config.assignment.woc_members]
                    computed[label] = wisdom_of_crowds(members)
                else:
                    try:
                        computed[label] = assign_with_fallback(
                            label, cleaned, stimulus, config.assignment, warnings
                        )
                    except AlgorithmFailure as exc:
                        raise ApiError(400, "algorithm_failure", str(exc),
                                       {"method": exc.method}) from exc
            return computed[label]

        assignments = {m: compute(m) for m in config.methods}
        analysis = assignments[config.analysis_method()]
        realigned = realign_saccades(trial.saccades, cleaned, analysis)
        corrections = {}
        for label, a in assignments.items():
            values, mean = y_correction(a, cleaned)
            mean_abs = sum(abs(v) for v in values) / len(values) if values else 0.0
            corrections[label] = {"values": values, "mean": mean, "mean_abs": mean_abs}
        response = {
            "stage": "assign",
            "hash": hashes["assign"],
            "methods": list(config.methods),
            "analysis_method": config.analysis_method(),
            "assignments": {
                label: {"line_idx": a.line_idx, "corrected_y": a.corrected_y}
                for label, a in assignments.items()
            },
            "y_corrections": corrections,
            "saccades": saccade_segments(realigned),
            "warnings": warnings,
            "scene": build_scene(
                stimulus,
                cleaned_fixations=cleaned,
                assignments=[assignments[m] for m in config.methods],
                realigned=realigned,
            ),
        }
        session.cache[key] = (response, (assignments, realigned, analysis))
        return session.cache[key]

    def run_measures_stage(session: Session, tid: str, trial: TrialRecord,
                           hashes: dict[str, str]):
        key = (tid, "measures", hashes["measures"])
        if key in session.cache:
            return session.cache[key]
        clean_key = (tid, "clean", hashes["clean"])
        assign_key = (tid, "assign", hashes["assign"])
        if clean_key not in session.cache or assign_key not in session.cache:
            raise ApiError(409, "ordering_violation",
                           "run clean and assign before measures for this trial/config")
        stimulus, cleaned, _ = session.cache[clean_key][1]
        _, realigned, analysis = session.cache[assign_key][1]
        config = session.config
        hits = assign_words(cleaned, analysis, stimulus)
        words = word_measures(cleaned, hits, stimulus)
        fix_rows = fixation_features(cleaned, hits, analysis, stimulus)
        sac_rows = saccade_features(realigned, stimulus, config.measures.deviation_y_frac)
        sent_rows = sentence_measures(cleaned, hits, stimulus)

        def table(rows, selected):
            chosen = None if selected is None else set(selected)
            return [row_to_dict(r, chosen) for r in rows]

        m = config.measures
        response = {
            "stage": "measures",
            "hash": hashes["measures"],
            "tables": {
                "words": table(words, m.word_measures),
                "fixations": table(fix_rows, m.fixation_measures),
                "saccades": table(sac_rows, m.saccade_measures),
                "sentences": table(sent_rows, m.sentence_measures),
            },
            "scene": build_scene(
                stimulus,
                cleaned_fixations=cleaned,
                assignments=[analysis],
                realigned=realigned,
                word_rows=words,
            ),
        }
        session.cache[key] = (response, None)
        return session.cache[key]

    @app.post("/sessions/{session_id}/trials/{tid}/{stage}")
    def process_trial(session_id: str, tid: str, stage: str, body: dict | None = None):
        if stage not in STAGES:
            raise ApiError(404, "unknown_stage", f"stage must be one of {STAGES}")
        session = get_session(session_id)
        with session.lock:
            ensure_parsed(session)
            if tid not in session.trials:
                raise ApiError(404, "unknown_trial", f"no trial {tid!r}")
            patch = (body or {}).get("config_patch")
            if patch:
                merged = _deep_merge(config_to_dict(session.config), patch)
                session.config = load_config(merged)
            _, trial = session.trials[tid]
            hashes = stage_hashes(session.config)
            if stage == "clean":
                response, _ = run_clean_stage(session, tid, trial, hashes["clean"])
            elif stage == "assign":
                response, _ = run_assign_stage(session, tid, trial, hashes)
            else:
                response, _ = run_measures_stage(session, tid, trial, hashes)
            return response

    # --- batch jobs ---------------------------------------------------------

    def job_worker(job: Job, files: list, ias: dict, config: PipelineConfig) -> None:
        def progress(done: int, total: int) -> None:
            job.done_files = done
            job.total_files = total

        try:
            job.state = "running"
            result = run_batch(files, ias, config, progress=progress)
            job.archive = result.archive
            job.warnings = result.warnings
            job.state = "done"
        except GazePipelineError as exc:
            job.error = str(exc)
            job.state = "error"

    @app.post("/sessions/{session_id}/batch", status_code=202)
    def start_batch(session_id: str, body: dict | None = None):
        session = get_session(session_id)
        with session.lock:
            if not session.files:
                raise ApiError(400, "empty_session", "upload files before starting a batch")
            config = load_config(body["config"]) if body and body.get("config") \
                else session.config
            files = sorted(session.files.items())
            ias = dict(session.ias)
        job = Job(job_id=secrets.token_urlsafe(12), session_id=session_id,
                  total_files=len(files))
        with registry_lock:
            jobs[job.job_id] = job
        thread = threading.Thread(
            target=job_worker, args=(job, files, ias, config), daemon=True
        )
        thread.start()
        return {"job_id": job.job_id}

    def get_job(job_id: str) -> Job:
        with registry_lock:
            job = jobs.get(job_id)
        if job is None:
            raise ApiError(404, "unknown_job", f"no job {job_id!r}")
        return job

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        job = get_job(job_id)
        out = {
            "job_id": job.job_id,
            "state": job.state,
            "progress": {"done": job.done_files, "total": job.total_files},
        }
        if job.state == "done":
            out["warnings"] = job.warnings
        if job.state == "error":
            out["error"] = job.error
        return out

    @app.get("/jobs/{job_id}/results.zip")
    def job_results(job_id: str):
        job = get_job(job_id)
        if job.state != "done":
            raise ApiError(409, "job_not_done", f"job is {job.state}")
        return Response(
            content=job.archive,
            media_type="application/zip",
            headers={"Content-Disposition": "attachment; filename=results.zip"},
        )

    return app


def _deep_merge(base: dict, patch: dict) -> dict:
    out = dict(base)
    for key, value in patch.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


app = create_app()
