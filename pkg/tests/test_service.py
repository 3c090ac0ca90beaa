"""HTTP wire-protocol tests against a live server on an ephemeral port."""

import json
import urllib.error
import urllib.request

import pytest

from richquery.harness import ExperimentConfig
from richquery.service import make_server, serve_forever
from richquery.session import SessionManager


@pytest.fixture()
def server(tmp_path):
    cfg = ExperimentConfig(
        synthetic_n=40,
        synthetic_dim=3,
        synthetic_seed=1,
        policy="fixed",
        kind="select_high",
        set_size=3,
        w=-0.5,
        a=2.0,
        sigma=2.0,
        committee_size=8,
        max_interactions=20,
        seed=5,
        annotator_seed=6,
    )
    (tmp_path / "config.json").write_text(cfg.to_json(), encoding="utf-8")
    static = tmp_path / "static"
    static.mkdir()
    (static / "index.html").write_text("<html>annotate</html>", encoding="utf-8")
    srv = make_server(SessionManager(), port=0, static_dir=str(static), config_root=str(tmp_path))
    serve_forever(srv)
    yield srv
    srv.shutdown()


def post(server, path, body):
    host, port = server.server_address[:2]
    req = urllib.request.Request(
        f"http://{host}:{port}{path}",
        data=json.dumps(body).encode(),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def test_full_interaction_flow(server):
    code, created = post(server, "/create", {"config_ref": "config.json"})
    assert code == 200
    sid = created["session_id"]

    code, view = post(server, "/next", {"session_id": sid})
    assert code == 200
    assert view["kind"] == "select_high"
    assert view["set_size"] == 3
    assert all({"id", "display"} <= set(item) for item in view["items"])

    code, summary = post(
        server,
        "/answer",
        {
            "session_id": sid,
            "query_id": view["query_id"],
            "payload": {"index": 1, "y": 1},
            "elapsed_ms": 1200,
        },
    )
    assert code == 200
    assert summary["status"] == "active"
    assert summary["interactions"] == 1
    assert "log_det_sigma" in summary

    # answering again with the same query id is a deduplicated retry
    code, again = post(
        server,
        "/answer",
        {
            "session_id": sid,
            "query_id": view["query_id"],
            "payload": {"index": 1, "y": 1},
            "elapsed_ms": 1200,
        },
    )
    assert code == 200 and again == summary


def test_protocol_violations_map_to_conflict(server):
    _, created = post(server, "/create", {"config_ref": "config.json"})
    sid = created["session_id"]
    post(server, "/next", {"session_id": sid})
    code, body = post(server, "/next", {"session_id": sid})
    assert code == 409
    assert "outstanding" in body["error"]


def test_bad_payload_is_rejected_without_state_change(server):
    _, created = post(server, "/create", {"config_ref": "config.json"})
    sid = created["session_id"]
    _, view = post(server, "/next", {"session_id": sid})
    code, body = post(
        server,
        "/answer",
        {"session_id": sid, "query_id": view["query_id"], "payload": {"index": 99, "y": 1},
         "elapsed_ms": 5},
    )
    assert code == 400
    # the pending query survives; a correct retry succeeds
    code, summary = post(
        server,
        "/answer",
        {"session_id": sid, "query_id": view["query_id"], "payload": {"index": 0, "y": -1},
         "elapsed_ms": 5},
    )
    assert code == 200 and summary["interactions"] == 1


def test_unknown_session_404(server):
    code, body = post(server, "/next", {"session_id": "missing"})
    assert code == 404


def test_unknown_endpoint_404(server):
    code, _ = post(server, "/bogus", {})
    assert code == 404


def test_static_files_served(server):
    host, port = server.server_address[:2]
    with urllib.request.urlopen(f"http://{host}:{port}/index.html") as resp:
        assert resp.status == 200
        assert b"annotate" in resp.read()
    with urllib.request.urlopen(f"http://{host}:{port}/") as resp:
        assert resp.status == 200


def test_missing_config_ref_rejected(server):
    code, body = post(server, "/create", {})
    assert code == 400
