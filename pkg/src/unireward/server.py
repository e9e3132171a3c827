"""Standalone asynchronous reward service.

Decoupling reward computation from the training loop lets the scorer
scale independently of the trainer. The server is stateless with respect
to training: progress travels inside each request, so any replica can
score any batch. Items within a batch are scored concurrently by a
bounded worker pool, and a bad item never fails its batch; RL training
must not stall on one malformed sample.

Endpoints: POST /v1/verify, GET /healthz, GET /metrics.
"""

from __future__ import annotations

import os
import socket
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import yaml
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from starlette.concurrency import run_in_threadpool

from .verifiers import DetectionVerifier, MathVerifier
from .verifiers.base import RewardBreakdown, Verifier, VerifyItem
from .wire import ItemResult, MalformedRequest, RewardRequest, RewardResponse

ENV_ADDR = "REWARD_SERVER_ADDR"
ENV_WORKERS = "REWARD_SERVER_WORKERS"


class DuplicateName(ValueError):
    pass


class VerifierRegistry:
    """Routing table from verifier name to implementation. Registration
    happens at startup (or behind the lock); routing reads are plain dict
    lookups."""

    def __init__(self):
        self._verifiers: dict[str, Verifier] = {}
        self._lock = threading.Lock()

    def register(self, name: str, verifier: Verifier) -> None:
        with self._lock:
            if name in self._verifiers:
                raise DuplicateName(f"verifier {name!r} already registered")
            self._verifiers[name] = verifier

    def get(self, name: str) -> Verifier | None:
        return self._verifiers.get(name)

    def names(self) -> list[str]:
        return sorted(self._verifiers)

    @classmethod
    def with_defaults(cls) -> "VerifierRegistry":
        registry = cls()
        registry.register(MathVerifier.name, MathVerifier())
        registry.register(DetectionVerifier.name, DetectionVerifier())
        return registry


class ServerCounters:
    """Monotone counters exposed at GET /metrics (text exposition)."""

    def __init__(self):
        self._lock = threading.Lock()
        self.batches_total = 0
        self.items_total = 0
        self.errors_total = 0
        self.latency_sum: dict[str, float] = {}
        self.latency_count: dict[str, int] = {}

    def record_batch(self, n_items: int, n_errors: int) -> None:
        with self._lock:
            self.batches_total += 1
            self.items_total += n_items
            self.errors_total += n_errors

    def record_latency(self, verifier: str, seconds: float) -> None:
        with self._lock:
            self.latency_sum[verifier] = self.latency_sum.get(verifier, 0.0) + seconds
            self.latency_count[verifier] = self.latency_count.get(verifier, 0) + 1

    def exposition(self) -> str:
        with self._lock:
            lines = [
                f"reward_server_batches_total {self.batches_total}",
                f"reward_server_items_total {self.items_total}",
                f"reward_server_errors_total {self.errors_total}",
            ]
            for name in sorted(self.latency_sum):
                lines.append(
                    f'reward_server_verifier_latency_seconds_sum{{verifier="{name}"}} {self.latency_sum[name]:.6f}'
                )
                lines.append(
                    f'reward_server_verifier_latency_seconds_count{{verifier="{name}"}} {self.latency_count[name]}'
                )
        return "\n".join(lines) + "\n"


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8192
    workers: int = 8
    max_batch_size: int = 1024
    spurious_tokens: list[str] = field(default_factory=list)

    @classmethod
    def load(cls, path=None) -> "ServerConfig":
        """Config file values, then environment overrides
        (REWARD_SERVER_ADDR as host:port, REWARD_SERVER_WORKERS)."""
        cfg = cls()
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                raw = yaml.safe_load(fh) or {}
            server = raw.get("server", {})
            cfg.host = str(server.get("host", cfg.host))
            cfg.port = int(server.get("port", cfg.port))
            cfg.workers = int(server.get("workers", cfg.workers))
            cfg.max_batch_size = int(server.get("max_batch_size", cfg.max_batch_size))
            parsing = raw.get("parsing", {})
            cfg.spurious_tokens = list(parsing.get("spurious_tokens", []))
        addr = os.environ.get(ENV_ADDR)
        if addr:
            host, _, port = addr.rpartition(":")
            if host:
                cfg.host = host
            cfg.port = int(port)
        workers = os.environ.get(ENV_WORKERS)
        if workers:
            cfg.workers = int(workers)
        return cfg


class RewardEngine:
    """Routes every item of a batch to its verifier and scores them on a
    shared bounded pool. Unknown verifiers and verifier exceptions become
    per-item errors."""

    def __init__(
        self,
        registry: VerifierRegistry | None = None,
        workers: int = 8,
        max_batch_size: int = 1024,
        counters: ServerCounters | None = None,
    ):
        self.registry = registry or VerifierRegistry.with_defaults()
        self.counters = counters or ServerCounters()
        self.max_batch_size = max_batch_size
        self._pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="verify")

    def _score_item(self, item: VerifyItem, progress: float) -> ItemResult:
        verifier = self.registry.get(item.verifier)
        if verifier is None:
            return ItemResult(
                id=item.id,
                combined=0.0,
                accuracy=0.0,
                format=0.0,
                error=f"unknown verifier: {item.verifier}",
            )
        started = time.perf_counter()
        try:
            breakdown: RewardBreakdown = verifier.score(item, progress)
        except Exception as err:  # one bad sample must not sink the batch
            return ItemResult(id=item.id, combined=0.0, accuracy=0.0, format=0.0, error=str(err))
        finally:
            self.counters.record_latency(item.verifier, time.perf_counter() - started)
        return ItemResult.from_breakdown(item.id, breakdown)

    def handle_batch(self, request: RewardRequest) -> RewardResponse:
        if len(request.items) > self.max_batch_size:
            raise MalformedRequest(
                f"batch of {len(request.items)} exceeds max_batch_size {self.max_batch_size}"
            )
        futures = [
            self._pool.submit(self._score_item, item, request.training_progress)
            for item in request.items
        ]
        results = [f.result() for f in futures]
        self.counters.record_batch(len(results), sum(1 for r in results if r.error))
        return RewardResponse(batch_id=request.batch_id, results=results)

    def shutdown(self) -> None:
        self._pool.shutdown(wait=False, cancel_futures=True)


def build_app(engine: RewardEngine) -> FastAPI:
    app = FastAPI(title="reward-server", docs_url=None, redoc_url=None)

    @app.post("/v1/verify")
    async def verify(request: Request):
        try:
            payload = await request.json()
        except Exception:
            return JSONResponse({"error": "body is not valid JSON"}, status_code=400)
        try:
            reward_request = RewardRequest.from_dict(payload)
            response = await run_in_threadpool(engine.handle_batch, reward_request)
        except MalformedRequest as err:
            return JSONResponse({"error": str(err)}, status_code=400)
        return JSONResponse(response.to_dict())

    @app.get("/healthz")
    async def healthz():
        return PlainTextResponse("ok")

    @app.get("/metrics")
    async def metrics():
        return PlainTextResponse(engine.counters.exposition())

    return app


class InProcessServer:
    """A real HTTP server on an ephemeral localhost port, run on a daemon
    thread. Used by tests and the simulation harness so the network hop is
    exercised without external processes."""

    def __init__(self, engine: RewardEngine | None = None, host: str = "127.0.0.1"):
        import uvicorn

        self.engine = engine or RewardEngine()
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.bind((host, 0))
        self.host, self.port = sock.getsockname()
        config = uvicorn.Config(
            build_app(self.engine), log_level="warning", access_log=False
        )
        self._server = uvicorn.Server(config)
        self._sock = sock
        self._thread = threading.Thread(
            target=self._server.run, kwargs={"sockets": [sock]}, daemon=True
        )

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self, timeout: float = 10.0) -> "InProcessServer":
        self._thread.start()
        deadline = time.monotonic() + timeout
        while not self._server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server failed to start")
            time.sleep(0.01)
        return self

    def stop(self) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=10.0)
        self.engine.shutdown()

    def __enter__(self) -> "InProcessServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def serve(config: ServerConfig) -> None:
    """Run the reward server until interrupted."""
    import uvicorn

    engine = RewardEngine(workers=config.workers, max_batch_size=config.max_batch_size)
    uvicorn.run(build_app(engine), host=config.host, port=config.port, log_level="info")
