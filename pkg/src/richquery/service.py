"""HTTP wire protocol for live annotation sessions.

JSON over POST, one endpoint per session verb:

* ``POST /create``  {"config_ref": <path>}                      -> {"session_id"}
* ``POST /next``    {"session_id"}                              -> {"query_id", "kind", "items": [{"id","display"}], "set_size"}
* ``POST /answer``  {"session_id", "query_id", "payload", "elapsed_ms"} -> {"status", "interactions", "log_det_sigma"}

Payload shapes by kind: label {"y": -1|1}; selection {"index": int, "y": -1|1};
rank {"order": [int...], "threshold": int}.  ``elapsed_ms`` is a nonnegative
integer.  GET serves files from the configured static directory so the
browser frontend can be hosted by the same process.
"""

from __future__ import annotations

import json
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .errors import (
    ConfigError,
    KindMismatchError,
    ProtocolError,
    RichQueryError,
    SessionNotFoundError,
)
from .harness import ExperimentConfig
from .session import SessionManager


def _status_for(exc: Exception) -> int:
    if isinstance(exc, SessionNotFoundError):
        return 404
    if isinstance(exc, ProtocolError):
        return 409
    if isinstance(exc, (KindMismatchError, ConfigError)):
        return 400
    return 500


class AnnotationHandler(BaseHTTPRequestHandler):
    manager: SessionManager
    static_dir: Path | None = None
    config_root: Path = Path(".")

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send_json(self, code: int, body: dict) -> None:
        data = json.dumps(body).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b"{}"
        try:
            body = json.loads(raw.decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise KindMismatchError(f"invalid JSON body: {exc}") from exc
        if not isinstance(body, dict):
            raise KindMismatchError("body must be a JSON object")
        return body

    def do_POST(self):
        try:
            body = self._read_json()
            if self.path == "/create":
                ref = body.get("config_ref")
                if not ref:
                    raise ConfigError("create needs config_ref")
                path = (self.config_root / ref).resolve()
                config = ExperimentConfig.from_json(path.read_text(encoding="utf-8"))
                session_id = self.manager.create_session(config)
                self._send_json(200, {"session_id": session_id})
            elif self.path == "/next":
                sid = body.get("session_id")
                if not sid:
                    raise ConfigError("next needs session_id")
                self._send_json(200, self.manager.next_query(sid))
            elif self.path == "/answer":
                sid = body.get("session_id")
                qid = body.get("query_id")
                if not sid or not qid:
                    raise ConfigError("answer needs session_id and query_id")
                summary = self.manager.submit_response(
                    sid, qid, body.get("payload") or {}, body.get("elapsed_ms")
                )
                self._send_json(200, summary)
            else:
                self._send_json(404, {"error": f"unknown endpoint {self.path}"})
        except RichQueryError as exc:
            self._send_json(_status_for(exc), {"error": str(exc)})
        except FileNotFoundError as exc:
            self._send_json(400, {"error": str(exc)})
        except Exception as exc:  # keep the server alive on surprises
            self._send_json(500, {"error": f"{type(exc).__name__}: {exc}"})

    def do_GET(self):
        if self.static_dir is None:
            self._send_json(404, {"error": "no static files configured"})
            return
        rel = self.path.lstrip("/") or "index.html"
        target = (self.static_dir / rel).resolve()
        if not str(target).startswith(str(self.static_dir.resolve())) or not target.is_file():
            self._send_json(404, {"error": f"not found: {self.path}"})
            return
        data = target.read_bytes()
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


def make_server(
    manager: SessionManager,
    host: str = "127.0.0.1",
    port: int = 0,
    static_dir: str | None = None,
    config_root: str = ".",
) -> ThreadingHTTPServer:
    handler = type(
        "BoundHandler",
        (AnnotationHandler,),
        {
            "manager": manager,
            "static_dir": Path(static_dir) if static_dir else None,
            "config_root": Path(config_root),
        },
    )
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(server: ThreadingHTTPServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
