"""Native client for the reward service.

Proxy workers fan batches out across endpoints, always sending to the
endpoint with the fewest outstanding requests, with per-batch retries and
exponential backoff. Responses stream back as they complete, tagged by
batch_id.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import httpx

from .schema import Sample
from .verifiers.base import VerifyItem
from .wire import ItemResult, RewardRequest, RewardResponse, canonical_json

VERIFY_PATH = "/v1/verify"


class EndpointExhausted(RuntimeError):
    """All attempts for one batch failed across the configured retries."""

    def __init__(self, batch_id: str, detail: str):
        self.batch_id = batch_id
        super().__init__(f"batch {batch_id!r} exhausted its retries: {detail}")


class ClientError(RuntimeError):
    """Non-retryable rejection (4xx) from the server."""


class _AttemptFailed(Exception):
    """Internal: one transport attempt failed; remembers where."""

    def __init__(self, endpoint: str, detail: str | None = None):
        self.endpoint = endpoint
        self.detail = detail or "transport error"
        super().__init__(self.detail)


@dataclass
class ClientConfig:
    endpoints: list[str]
    max_retries: int = 3
    timeout: float = 30.0
    workers: int = 4
    backoff: float = 0.1

    def __post_init__(self):
        if not self.endpoints:
            raise ValueError("need at least one endpoint")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


class _Balancer:
    """Tracks outstanding requests per endpoint; picks the least loaded."""

    def __init__(self, endpoints: Sequence[str]):
        self._outstanding = {ep: 0 for ep in endpoints}
        self._order = list(endpoints)
        self._lock = threading.Lock()

    def acquire(self, avoid: str | None = None) -> str:
        with self._lock:
            candidates = [ep for ep in self._order if ep != avoid] or self._order
            # min() keeps the earliest endpoint on ties
            endpoint = min(candidates, key=lambda ep: self._outstanding[ep])
            self._outstanding[endpoint] += 1
            return endpoint

    def release(self, endpoint: str) -> None:
        with self._lock:
            self._outstanding[endpoint] -= 1


class RewardClient:
    def __init__(self, config: ClientConfig):
        self.config = config
        self._balancer = _Balancer(config.endpoints)
        self._http = httpx.Client(timeout=config.timeout)
        self._pool = ThreadPoolExecutor(max_workers=config.workers, thread_name_prefix="proxy")

    def close(self) -> None:
        self._pool.shutdown(wait=False, cancel_futures=True)
        self._http.close()

    def __enter__(self) -> "RewardClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- transport ----------------------------------------------------------

    def _send_once(self, body: str, avoid: str | None = None) -> RewardResponse:
        endpoint = self._balancer.acquire(avoid)
        try:
            response = self._http.post(
                endpoint.rstrip("/") + VERIFY_PATH,
                content=body.encode("utf-8"),
                headers={"Content-Type": "application/json"},
            )
        except httpx.HTTPError as err:
            raise _AttemptFailed(endpoint, f"{type(err).__name__}: {err}") from None
        finally:
            self._balancer.release(endpoint)
        if response.status_code >= 500:
            raise _AttemptFailed(endpoint, f"server error {response.status_code}")
        if response.status_code >= 400:
            raise ClientError(f"{response.status_code}: {response.text}")
        try:
            return RewardResponse.from_dict(response.json())
        except ValueError as err:
            raise _AttemptFailed(endpoint, f"bad response body: {err}") from None

    def send_request(self, request: RewardRequest) -> RewardResponse:
        body = canonical_json(request.to_dict())
        last = "no attempt made"
        failed_endpoint: str | None = None
        for attempt in range(self.config.max_retries):
            if attempt:
                time.sleep(self.config.backoff * (2 ** (attempt - 1)))
            try:
                # retries steer away from the endpoint that just failed
                return self._send_once(body, avoid=failed_endpoint)
            except _AttemptFailed as err:
                failed_endpoint = err.endpoint
                last = err.detail
        raise EndpointExhausted(request.batch_id, last)

    # -- public API ---------------------------------------------------------

    def submit_batches(self, requests: Iterable[RewardRequest]) -> Iterator[RewardResponse]:
        """Send batches via the proxy pool; yield responses as completed."""
        futures = [self._pool.submit(self.send_request, r) for r in requests]
        for future in as_completed(futures):
            yield future.result()

    def submit(
        self,
        samples: list[Sample],
        responses: list[str],
        training_progress: float,
        batch_id: str = "batch-0",
    ) -> list[ItemResult]:
        """Score parallel (samples, responses) lists; results follow input
        order (matched by id)."""
        if len(samples) != len(responses):
            raise ValueError("samples and responses must be parallel lists")
        if not samples:
            raise ValueError("nothing to score")
        request = build_request(batch_id, training_progress, samples, responses)
        reward_response = self.send_request(request)
        by_id = reward_response.by_id()
        return [by_id[item.id] for item in request.items]


def build_request(
    batch_id: str, training_progress: float, samples: list[Sample], responses: list[str]
) -> RewardRequest:
    items = [VerifyItem.from_sample(s, r) for s, r in zip(samples, responses)]
    return RewardRequest(batch_id=batch_id, training_progress=training_progress, items=items)


def client_submit(
    batches: Iterable[RewardRequest],
    endpoints: list[str],
    **config_overrides,
) -> Iterator[RewardResponse]:
    """One-shot helper: stream responses for a set of prepared batches."""
    config = ClientConfig(endpoints=endpoints, **config_overrides)
    with RewardClient(config) as client:
        yield from client.submit_batches(batches)
