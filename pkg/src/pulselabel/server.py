"""HTTP front end for the gateway (stdlib http.server, JSON bodies).

Routes:
    POST /v1/samples                         ingest one sample payload
    GET  /v1/subjects/{id}/ema/pending       open queries for a subject
    POST /v1/ema/{ema_id}/response           submit questionnaire answers
    GET  /v1/analytics/{report}?subject=...  coverage | temporal | quality | response
    GET  /v1/health
"""
from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from . import analytics
from .errors import ConfigError, PulseLabelError, ValidationError
from .gateway import Gateway

MAX_BODY_BYTES = 64 * 1024 * 1024

_PENDING = re.compile(r"^/v1/subjects/([^/]+)/ema/pending$")
_RESPONSE = re.compile(r"^/v1/ema/([^/]+)/response$")
_ANALYTICS = re.compile(r"^/v1/analytics/(coverage|temporal|quality|response)$")


def analytics_report(gateway: Gateway, report: str, params: dict) -> dict:
    subject = params.get("subject")
    if report == "coverage":
        if not subject:
            raise ValidationError("coverage report needs ?subject=", field="subject")
        data = gateway.subject_data(subject)
        d = float(params.get("d", gateway.config.coverage_d))
        curve = analytics.coverage_curve(data, D=d)
        return {"report": "coverage", "subject": subject, "d": d,
                "curve": [{"label_index": i, "coverage": f} for i, f in curve]}
    if report == "temporal":
        if not subject:
            raise ValidationError("temporal report needs ?subject=", field="subject")
        data = gateway.subject_data(subject)
        group_by = params.get("group_by", "none")
        profiles = analytics.temporal_profile(data, group_by=group_by)
        return {"report": "temporal", "subject": subject, "group_by": group_by,
                "profiles": [{
                    "group_kind": p.group_kind, "group_key": p.group_key,
                    "gap_min": p.gap_min, "mean_distance": p.mean_distance,
                    "pair_count": p.pair_count,
                    "low_confidence": p.low_confidence(),
                } for p in profiles]}
    subjects = [gateway.subject_data(s) for s in gateway.subjects()]
    if report == "quality":
        return {"report": "quality", "rows": analytics.quality_by_activity(subjects)}
    stats = analytics.response_stats(subjects)
    return {
        "report": "response",
        "cdfs": [{"kind": kind, "context": ctx,
                  "points": [{"t_s": t, "p": p} for t, p in points]}
                 for (kind, ctx), points in stats.cdfs.items()],
        "medians": [{"kind": kind, "context": ctx, "median_s": m}
                    for (kind, ctx), m in stats.medians.items()],
        "rate_by_hour": stats.rate_by_hour,
    }


class ApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    @property
    def gateway(self) -> Gateway:
        return self.server.gateway

    def log_message(self, fmt, *args):
        if getattr(self.server, "verbose", False):
            super().log_message(fmt, *args)

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        if length > MAX_BODY_BYTES:
            raise ValidationError(f"body too large ({length} bytes)")
        raw = self.rfile.read(length)
        try:
            return json.loads(raw) if raw else {}
        except json.JSONDecodeError as exc:
            raise ValidationError(f"body is not valid JSON: {exc}") from exc

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        try:
            url = urlparse(self.path)
            match = _PENDING.match(url.path)
            if match:
                queries = self.gateway.pending_queries(match.group(1))
                self._send(200, {"queries": queries})
                return
            match = _ANALYTICS.match(url.path)
            if match:
                params = {k: v[0] for k, v in parse_qs(url.query).items()}
                self._send(200, analytics_report(self.gateway,
                                                 match.group(1), params))
                return
            if url.path == "/v1/health":
                self._send(200, {
                    "status": "ok",
                    "subjects": len(self.gateway.by_subject),
                    "samples": len(self.gateway.samples),
                    "open_queries": len(self.gateway.open_query),
                })
                return
            self._send(404, {"error": f"no route for GET {url.path}"})
        except ValidationError as exc:
            self._send(400, {"error": str(exc), "field": exc.field})
        except (ConfigError, PulseLabelError) as exc:
            self._send(400, {"error": str(exc)})
        except Exception as exc:  # pragma: no cover - defensive
            self._send(500, {"error": f"internal error: {exc}"})

    def do_POST(self):
        try:
            url = urlparse(self.path)
            if url.path == "/v1/samples":
                body = self._read_body()
                record = self.gateway.ingest(body)
                self._send(200, {
                    "sample_id": record["sample_id"],
                    "usable": record["usable"],
                    "quality_usable": record["quality"]["usable"],
                    "activity": record["activity"],
                    "decision": record["decision"],
                    "suppressed": record["suppressed"],
                })
                return
            match = _RESPONSE.match(url.path)
            if match:
                body = self._read_body()
                ack = self.gateway.submit_response(match.group(1), body)
                self._send(200, ack)
                return
            self._send(404, {"error": f"no route for POST {url.path}"})
        except ValidationError as exc:
            status = 404 if exc.field == "ema_id" else 400
            self._send(status, {"error": str(exc), "field": exc.field})
        except (ConfigError, PulseLabelError) as exc:
            self._send(400, {"error": str(exc)})
        except Exception as exc:  # pragma: no cover - defensive
            self._send(500, {"error": f"internal error: {exc}"})


def make_server(gateway: Gateway, host: str = "127.0.0.1",
                port: int = 8080, verbose: bool = False) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), ApiHandler)
    server.gateway = gateway
    server.verbose = verbose
    return server


def serve_forever(gateway: Gateway, host: str = "127.0.0.1", port: int = 8080,
                  verbose: bool = True) -> None:
    server = make_server(gateway, host, port, verbose)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        gateway.checkpoint_all()
        server.server_close()


class BackgroundServer:
    """Run the API in a thread; used by tests and the UI acceptance check."""

    def __init__(self, gateway: Gateway, host: str = "127.0.0.1", port: int = 0):
        self.server = make_server(gateway, host, port)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def port(self) -> int:
        return self.server.server_address[1]

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
