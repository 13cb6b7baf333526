"""Local quality-of-service bookkeeping per peer."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ..contract import QosThresholds


class QosViolation(str, enum.Enum):
    TIMEOUT = "timeout"
    LOW_RESPONSE_RATE = "low_response_rate"
    HIGH_RESPONSE_TIME = "high_response_time"
    BAD_MESSAGE = "bad_message"


@dataclass
class PeerStats:
    sent_at: dict[int, int] = field(default_factory=dict)
    answered: set[int] = field(default_factory=set)
    response_times: list[int] = field(default_factory=list)
    last_heard: int | None = None
    blacklisted: bool = False
    violations: list[tuple[int, QosViolation]] = field(default_factory=list)

    def expect(self, index: int, now: int) -> None:
        self.sent_at.setdefault(index, now)

    def heard(self, now: int) -> None:
        self.last_heard = now

    def answered_at(self, index: int, now: int) -> None:
        if index in self.sent_at and index not in self.answered:
            self.answered.add(index)
            self.response_times.append(now - self.sent_at[index])
        self.last_heard = now

    def outstanding(self) -> list[int]:
        return [i for i in self.sent_at if i not in self.answered]

    def blacklist(self, now: int, kind: QosViolation) -> None:
        self.violations.append((now, kind))
        self.blacklisted = True


@dataclass
class QosLedgerLocal:
    peers: dict[str, PeerStats] = field(default_factory=dict)

    def __getitem__(self, peer: str) -> PeerStats:
        return self.peers.setdefault(peer, PeerStats())


def qos_check(stats: PeerStats, thresholds: QosThresholds, now: int,
              min_samples: int = 10) -> QosViolation | None:
    """``None`` when the peer is within thresholds, else the breached kind."""
    if any(t > thresholds.max_response_time for t in stats.response_times):
        return QosViolation.HIGH_RESPONSE_TIME
    pending = stats.outstanding()
    if pending:
        oldest = min(stats.sent_at[i] for i in pending)
        quiet_since = oldest if stats.last_heard is None else max(oldest, stats.last_heard)
        if now - quiet_since > thresholds.timeout:
            return QosViolation.TIMEOUT
    due = [i for i, t in stats.sent_at.items() if now - t >= thresholds.timeout]
    if len(due) >= min_samples:
        rate = sum(1 for i in due if i in stats.answered) / len(due)
        if rate < thresholds.min_response_rate:
            return QosViolation.LOW_RESPONSE_RATE
    return None
