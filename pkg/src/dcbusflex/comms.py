"""Simulated field-bus link between the controller and the converter ports.

Messages are delivered after a fixed latency in (deliver_at, sequence) order.
Loss is optional and reproducible: whether a message is dropped depends only
on the channel seed and the message's sequence number.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class Telemetry:
    node: str
    u: float
    p: float
    mode: str
    soc_pct: float | None
    locked: bool


@dataclass(frozen=True)
class ShiftCommand:
    node: str
    delta_p: float


@dataclass(frozen=True)
class LockNotice:
    node: str


@dataclass(frozen=True)
class Alarm:
    text: str


Message = Union[Telemetry, ShiftCommand, LockNotice, Alarm]


@dataclass(frozen=True)
class ChannelConfig:
    latency: float = 0.01
    drop_probability: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.latency < 0:
            raise ValueError("latency must be >= 0")
        if not 0.0 <= self.drop_probability < 1.0:
            raise ValueError("drop_probability must lie in [0, 1)")


@dataclass(frozen=True, order=True)
class Envelope:
    deliver_at: float
    sequence: int
    sent_at: float
    payload: Message


def is_dropped(seed: int, sequence: int, drop_probability: float) -> bool:
    """Loss decision for message ``sequence`` on a channel seeded with ``seed``."""
    if drop_probability <= 0.0:
        return False
    u = np.random.default_rng([seed, sequence]).random()
    return u < drop_probability


class Channel:
    """One-directional message queue."""

    def __init__(self, config: ChannelConfig | None = None):
        self.config = config or ChannelConfig()
        self._queue: list[Envelope] = []
        self._sequence = 0
        self.dropped: list[Envelope] = []

    def __len__(self) -> int:
        return len(self._queue)

    def post(self, now: float, msg: Message) -> None:
        cfg = self.config
        env = Envelope(now + cfg.latency, self._sequence, now, msg)
        self._sequence += 1
        if is_dropped(cfg.seed, env.sequence, cfg.drop_probability):
            self.dropped.append(env)
            return
        heapq.heappush(self._queue, env)

    def poll_due(self, now: float) -> list[Message]:
        out = []
        q = self._queue
        while q and q[0].deliver_at <= now:
            out.append(heapq.heappop(q).payload)
        return out
