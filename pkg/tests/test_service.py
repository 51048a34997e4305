import io
import threading
import time
import zipfile

import pytest
from fastapi.testclient import TestClient

from conftest import build_syn1
from gazepipeline.batch import run_batch
from gazepipeline.config import PipelineConfig, load_config
from gazepipeline.service import create_app
from test_batch import asc_text, corpus


@pytest.fixture()
def client():
    with TestClient(create_app()) as c:
        yield c


def new_session(client) -> str:
    response = client.post("/sessions")
    assert response.status_code == 201
    return response.json()["session_id"]


def upload(client, sid, named_payloads):
    files = [("files", (name, data, "application/octet-stream"))
             for name, data in named_payloads]
    return client.post(f"/sessions/{sid}/files", files=files)


def one_trial_payload():
    return [("rec.asc", asc_text([("t1", build_syn1(), 0)]).encode())]


def wait_job(client, job_id, timeout=30.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        body = client.get(f"/jobs/{job_id}").json()
        if body["state"] in ("done", "error"):
            return body
        time.sleep(0.02)
    raise AssertionError("batch job never settled")


class TestSessions:
    def test_create_and_list_empty(self, client):
        sid = new_session(client)
        response = client.get(f"/sessions/{sid}/trials")
        assert response.status_code == 200
        assert response.json() == {"trials": []}

    def test_unknown_session_shape(self, client):
        response = client.get("/sessions/nope/trials")
        assert response.status_code == 404
        body = response.json()
        assert body["code"] == "unknown_session"
        assert set(body) == {"code", "message", "detail"}

    def test_idle_sessions_expire(self):
        with TestClient(create_app(session_ttl_s=0.0)) as client:
            sid = new_session(client)
            time.sleep(0.01)
            assert client.get(f"/sessions/{sid}/trials").status_code == 404


class TestUploads:
    def test_empty_upload_rejected(self, client):
        sid = new_session(client)
        response = client.post(f"/sessions/{sid}/files")
        assert response.status_code == 400
        assert response.json()["code"] == "empty_upload"

    def test_upload_parses_trials(self, client):
        sid = new_session(client)
        body = upload(client, sid, one_trial_payload()).json()
        assert body["files"] == ["rec.asc"]
        (trial,) = body["trials"]
        assert trial["tid"] == "rec.asc:0"
        assert trial["trial_id"] == "t1"
        assert trial["n_fixations"] == 30
        assert trial["n_saccades"] == 29
        assert trial["has_stimulus"] is True

    def test_zip_upload_expands(self, client):
        buf = io.BytesIO()
        with zipfile.ZipFile(buf, "w") as zf:
            zf.writestr("inner/rec.asc", asc_text([("t1", build_syn1(), 0)]))
            zf.writestr("inner/readme.md", "hello")
        sid = new_session(client)
        body = upload(client, sid, [("bundle.zip", buf.getvalue())]).json()
        assert body["files"] == ["inner/rec.asc"]
        assert any("readme.md" in w for w in body["warnings"])

    def test_upload_cap(self):
        with TestClient(create_app(max_upload_bytes=16)) as client:
            sid = new_session(client)
            response = upload(client, sid, [("big.asc", b"x" * 64)])
            assert response.status_code == 413
            assert response.json()["code"] == "upload_too_large"


class TestConfig:
    def test_get_default(self, client):
        sid = new_session(client)
        doc = client.get(f"/sessions/{sid}/config").json()
        assert load_config(doc) == PipelineConfig()
        assert doc["assignment"]["methods"] == ["attach"]

    def test_put_replaces_whole_document(self, client):
        sid = new_session(client)
        response = client.put(f"/sessions/{sid}/config", json={"workers": 4})
        assert response.status_code == 200
        doc = response.json()
        assert doc["workers"] == 4
        assert doc["cleaning"]["min_duration_ms"] == 80

    def test_put_invalid_names_key(self, client):
        sid = new_session(client)
        response = client.put(f"/sessions/{sid}/config",
                              json={"cleaning": {"min_duration_ms": -5}})
        assert response.status_code == 400
        body = response.json()
        assert body["code"] == "invalid_config"
        assert "min_duration_ms" in body["detail"]["key"]


class TestStages:
    def _ready(self, client):
        sid = new_session(client)
        upload(client, sid, one_trial_payload())
        return sid, "rec.asc:0"

    def test_clean_then_assign_then_measures(self, client):
        sid, tid = self._ready(client)
        clean = client.post(f"/sessions/{sid}/trials/{tid}/clean").json()
        assert clean["stage"] == "clean"
        assert clean["n_before"] == 30 and clean["n_after"] == 30
        assert len(clean["fixations"]) == 30
        assert clean["report"]["counts"]["Kept"] == 30

        assign = client.post(f"/sessions/{sid}/trials/{tid}/assign").json()
        assert assign["methods"] == ["attach"]
        assert assign["analysis_method"] == "attach"
        assert assign["assignments"]["attach"]["line_idx"] == \
            [i // 10 for i in range(30)]
        assert len(assign["saccades"]) == 29
        assert assign["hash"] != clean["hash"]

        measures = client.post(f"/sessions/{sid}/trials/{tid}/measures").json()
        assert set(measures["tables"]) == {"words", "fixations", "saccades",
                                           "sentences"}
        assert len(measures["tables"]["fixations"]) == 30
        assert measures["hash"] not in (clean["hash"], assign["hash"])

    def test_out_of_order_is_409(self, client):
        sid, tid = self._ready(client)
        response = client.post(f"/sessions/{sid}/trials/{tid}/assign")
        assert response.status_code == 409
        assert response.json()["code"] == "ordering_violation"
        client.post(f"/sessions/{sid}/trials/{tid}/clean")
        response = client.post(f"/sessions/{sid}/trials/{tid}/measures")
        assert response.status_code == 409

    def test_config_patch_invalidates_downstream(self, client):
        sid, tid = self._ready(client)
        first = client.post(f"/sessions/{sid}/trials/{tid}/clean").json()
        client.post(f"/sessions/{sid}/trials/{tid}/assign")
        # Patching a cleaning knob moves the clean hash, so assign against
        # the new config must report the missing upstream stage.
        patch = {"config_patch": {"cleaning": {"min_duration_ms": 120}}}
        response = client.post(f"/sessions/{sid}/trials/{tid}/assign", json=patch)
        assert response.status_code == 409
        second = client.post(f"/sessions/{sid}/trials/{tid}/clean").json()
        assert second["hash"] != first["hash"]
        assert client.post(
            f"/sessions/{sid}/trials/{tid}/assign").status_code == 200

    def test_same_config_returns_identical_payload(self, client):
        sid, tid = self._ready(client)
        a = client.post(f"/sessions/{sid}/trials/{tid}/clean").json()
        b = client.post(f"/sessions/{sid}/trials/{tid}/clean").json()
        assert a == b

    def test_unknown_stage_and_trial(self, client):
        sid, tid = self._ready(client)
        assert client.post(
            f"/sessions/{sid}/trials/{tid}/render").status_code == 404
        response = client.post(f"/sessions/{sid}/trials/ghost:0/clean")
        assert response.status_code == 404
        assert response.json()["code"] == "unknown_trial"

    def test_missing_stimulus_reported(self, client):
        text = asc_text([("t1", build_syn1(), 0)])
        stripped = "\n".join(line for line in text.splitlines()
                             if "REGION CHAR" not in line) + "\n"
        sid = new_session(client)
        upload(client, sid, [("bare.asc", stripped.encode())])
        response = client.post(f"/sessions/{sid}/trials/bare.asc:0/clean")
        assert response.status_code == 400
        assert response.json()["code"] == "MissingIasFile"


class TestBatchJobs:
    def test_batch_requires_files(self, client):
        sid = new_session(client)
        response = client.post(f"/sessions/{sid}/batch")
        assert response.status_code == 400
        assert response.json()["code"] == "empty_session"

    def test_job_runs_to_done_with_progress(self, client):
        sid = new_session(client)
        upload(client, sid, corpus())
        job_id = client.post(f"/sessions/{sid}/batch").json()["job_id"]
        body = wait_job(client, job_id)
        assert body["state"] == "done"
        assert body["progress"] == {"done": 2, "total": 2}
        archive = client.get(f"/jobs/{job_id}/results.zip")
        assert archive.status_code == 200
        assert archive.headers["content-type"] == "application/zip"
        with zipfile.ZipFile(io.BytesIO(archive.content)) as zf:
            assert "summary.json" in zf.namelist()

    def test_archive_matches_direct_run(self, client):
        files = corpus()
        sid = new_session(client)
        upload(client, sid, files)
        job_id = client.post(f"/sessions/{sid}/batch").json()["job_id"]
        assert wait_job(client, job_id)["state"] == "done"
        served = client.get(f"/jobs/{job_id}/results.zip").content
        direct = run_batch(sorted(files), {}, PipelineConfig()).archive
        assert served == direct

    def test_results_before_done_is_409(self, client, monkeypatch):
        release = threading.Event()
        real = run_batch

        def slow(files, ias, config, progress=None):
            release.wait(10.0)
            return real(files, ias, config, progress=progress)

        monkeypatch.setattr("gazepipeline.service.run_batch", slow)
        sid = new_session(client)
        upload(client, sid, one_trial_payload())
        job_id = client.post(f"/sessions/{sid}/batch").json()["job_id"]
        response = client.get(f"/jobs/{job_id}/results.zip")
        assert response.status_code == 409
        assert response.json()["code"] == "job_not_done"
        release.set()
        assert wait_job(client, job_id)["state"] == "done"

    def test_failing_batch_reports_error(self, client):
        sid = new_session(client)
        upload(client, sid, [("junk.asc", b"no trials here\n")])
        job_id = client.post(f"/sessions/{sid}/batch").json()["job_id"]
        body = wait_job(client, job_id)
        assert body["state"] == "error"
        assert body["error"]

    def test_unknown_job(self, client):
        assert client.get("/jobs/nope").status_code == 404
        assert client.get("/jobs/nope/results.zip").status_code == 404

    def test_batch_config_override(self, client):
        sid = new_session(client)
        upload(client, sid, one_trial_payload())
        body = {"config": {"assignment": {"methods": ["warp"]}}}
        job_id = client.post(f"/sessions/{sid}/batch", json=body).json()["job_id"]
        assert wait_job(client, job_id)["state"] == "done"
        served = client.get(f"/jobs/{job_id}/results.zip").content
        with zipfile.ZipFile(io.BytesIO(served)) as zf:
            doc = load_config(zf.read("config.json"))
        assert doc.methods == ["warp"]
