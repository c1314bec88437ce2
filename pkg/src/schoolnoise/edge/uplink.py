"""At-least-once delivery of window aggregates with a bounded retry buffer.

Time is passed in explicitly (``now`` in seconds) so the same code runs
against the wall clock or the emulator's simulated clock.
"""

from __future__ import annotations

import json
import logging
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Protocol

import httpx

from ..readings import NoiseReading

log = logging.getLogger(__name__)


class TransportError(Exception):
    """Delivery attempt failed; the batch stays buffered."""


class Transport(Protocol):
    def __call__(self, payload: bytes) -> dict: ...


class HttpTransport:
    """POSTs encoded batches to ``{endpoint}/v1/readings``."""

    def __init__(self, endpoint: str, timeout: float = 10.0, client: httpx.Client | None = None):
        self.url = endpoint.rstrip("/") + "/v1/readings"
        self._client = client or httpx.Client(timeout=timeout)

    def __call__(self, payload: bytes) -> dict:
        try:
            resp = self._client.post(self.url, content=payload, headers={"content-type": "application/json"})
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code != 200:
            raise TransportError(f"HTTP {resp.status_code}")
        return resp.json()

    def close(self):
        self._client.close()


@dataclass
class DeliveryReport:
    sent: int = 0
    accepted: int = 0
    duplicates: int = 0
    rejected: int = 0
    dropped: int = 0
    attempts: int = 0
    failures: int = 0
    pending: int = 0


class Uplink:
    """Buffered sender owned by a single node.

    The buffer holds ``capacity_seconds`` worth of windows; on overflow the
    oldest readings are discarded and counted in ``report.dropped``. Failed
    sends back off exponentially from ``base_delay`` up to ``max_delay``.
    """

    def __init__(
        self,
        transport: Transport,
        window_seconds: int = 300,
        capacity_seconds: int = 86400,
        base_delay: float = 1.0,
        max_delay: float = 60.0,
        batch_size: int = 500,
    ):
        self.transport = transport
        self.capacity = max(1, capacity_seconds // window_seconds)
        self.base_delay = base_delay
        self.max_delay = max_delay
        self.batch_size = batch_size
        self.buffer: deque[NoiseReading] = deque()
        self.report = DeliveryReport()
        self._consecutive_failures = 0
        self._next_attempt = float("-inf")

    def submit(self, readings: Iterable[NoiseReading], now: float) -> None:
        for r in readings:
            if not isinstance(r, NoiseReading):
                raise TypeError("only NoiseReading aggregates may leave the node")
            self.buffer.append(r)
            if len(self.buffer) > self.capacity:
                self.buffer.popleft()
                self.report.dropped += 1
        self.pump(now)

    def pump(self, now: float) -> bool:
        """Send as much as possible at time ``now``; True when the buffer is empty."""
        while self.buffer and now >= self._next_attempt:
            batch = [self.buffer[i] for i in range(min(self.batch_size, len(self.buffer)))]
            payload = json.dumps([r.to_wire() for r in batch], separators=(",", ":")).encode()
            self.report.attempts += 1
            try:
                resp = self.transport(payload)
            except TransportError as exc:
                self._consecutive_failures += 1
                self.report.failures += 1
                delay = min(self.max_delay, self.base_delay * 2.0 ** min(self._consecutive_failures - 1, 64))
                self._next_attempt = now + delay
                log.debug("uplink failed (%s); retry in %.0f s", exc, delay)
                break
            self._consecutive_failures = 0
            self._next_attempt = float("-inf")
            for _ in batch:
                self.buffer.popleft()
            self.report.sent += len(batch)
            self.report.accepted += int(resp.get("accepted", 0))
            self.report.duplicates += int(resp.get("duplicates", 0))
            self.report.rejected += len(resp.get("rejected", ()))
        self.report.pending = len(self.buffer)
        return not self.buffer

    def flush(
        self,
        budget: float = 30.0,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ) -> bool:
        """Drain the buffer in real time, giving up after ``budget`` seconds."""
        deadline = clock() + budget
        self._next_attempt = float("-inf")
        while True:
            now = clock()
            if self.pump(now):
                return True
            if self._next_attempt > deadline:
                return False
            sleep(max(0.0, self._next_attempt - now))
