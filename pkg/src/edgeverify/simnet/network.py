"""Seeded discrete-event delivery with latency, loss and tampering."""
from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field, replace

from ..engine.actors import Deliver


@dataclass(frozen=True)
class TamperRule:
    """Flip one byte of the ``nth`` message crossing a matching link.

    ``links`` holds ``(sender, receiver)`` pairs; empty means every link.
    """

    nth: int = 0
    links: frozenset = frozenset()
    xor_mask: int = 0x01

    def matches(self, src: str, dst: str) -> bool:
        return not self.links or (src, dst) in self.links


@dataclass(frozen=True)
class NetworkModel:
    latency: tuple[int, int] = (1, 3)
    drop_rate: float = 0.0
    tamper: TamperRule | None = None
    link_latency: tuple = ()   # ((src, dst), (lo, hi)) overrides
    link_drop: tuple = ()      # ((src, dst), rate) overrides

    def __post_init__(self):
        lo, hi = self.latency
        if lo < 0 or hi < lo:
            raise ValueError("latency range must satisfy 0 <= lo <= hi")
        if not 0 <= self.drop_rate <= 1:
            raise ValueError("drop_rate must be in [0, 1]")

    def latency_for(self, src: str, dst: str) -> tuple[int, int]:
        for link, rng in self.link_latency:
            if link == (src, dst):
                return rng
        return self.latency

    def drop_for(self, src: str, dst: str) -> float:
        for link, rate in self.link_drop:
            if link == (src, dst):
                return rate
        return self.drop_rate


def inject_tamper(network: NetworkModel, rule: TamperRule) -> NetworkModel:
    return replace(network, tamper=rule)


def inject_latency(network: NetworkModel, distribution: tuple[int, int],
                   link: tuple[str, str] | None = None) -> NetworkModel:
    if link is None:
        return replace(network, latency=tuple(distribution))
    return replace(network, link_latency=network.link_latency + ((link, tuple(distribution)),))


def inject_drop(network: NetworkModel, rate: float,
                link: tuple[str, str] | None = None) -> NetworkModel:
    if link is None:
        return replace(network, drop_rate=rate)
    return replace(network, link_drop=network.link_drop + ((link, rate),))


@dataclass(order=True)
class SimEvent:
    time: int
    seq: int
    target: str = field(compare=False)
    payload: object = field(compare=False)
    tampered: bool = field(default=False, compare=False)


class Scheduler:
    """Min-heap of events ordered by ``(time, insertion order)``.

    Per-link delivery stays FIFO even when latency is random.
    """

    def __init__(self, network: NetworkModel, rng: random.Random):
        self.network = network
        self.rng = rng
        self._heap: list[tuple[int, int, SimEvent]] = []
        self._seq = 0
        self._link_clock: dict[tuple[str, str], int] = {}
        self._link_sent: dict[tuple[str, str], int] = {}
        self.dropped = 0
        self.tampered = 0

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, time: int, target: str, payload, tampered: bool = False) -> None:
        # tuple keys keep heap comparisons in C
        ev = SimEvent(time, self._seq, target, payload, tampered)
        heapq.heappush(self._heap, (time, self._seq, ev))
        self._seq += 1

    def pop(self) -> SimEvent:
        return heapq.heappop(self._heap)[2]

    def transmit(self, now: int, src: str, dst: str, data: bytes, extra_delay: int = 0):
        """Queue ``data`` for delivery; returns the possibly mutated bytes or None if dropped."""
        net = self.network
        link = (src, dst)
        count = self._link_sent.get(link, 0)
        self._link_sent[link] = count + 1
        drop = net.drop_for(src, dst)
        if drop and self.rng.random() < drop:
            self.dropped += 1
            return None
        tampered = False
        rule = net.tamper
        if rule is not None and rule.matches(src, dst) and self._tamper_due(rule, link):
            pos = self.rng.randrange(len(data))
            data = data[:pos] + bytes([data[pos] ^ rule.xor_mask]) + data[pos + 1:]
            tampered = True
            self.tampered += 1
        lo, hi = net.latency_for(src, dst)
        at = now + (lo if lo == hi else self.rng.randint(lo, hi)) + extra_delay
        at = max(at, self._link_clock.get(link, 0))
        self._link_clock[link] = at
        self.push(at, dst, Deliver(src, data), tampered)
        return data

    def _tamper_due(self, rule: TamperRule, link) -> bool:
        if rule.links:
            seen = sum(self._link_sent.get(l, 0) for l in rule.links)
        else:
            seen = sum(self._link_sent.values())
        return seen - 1 == rule.nth
