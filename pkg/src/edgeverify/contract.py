"""Contract records, payoff matrix and sampling-detection math."""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field

from .crypto import KEY_SIZE, digest


class ContractError(ValueError):
    """A contract or cost model violates its invariants."""


class Role(enum.IntEnum):
    CONTRACTOR = 0
    VERIFIER = 1


@dataclass(frozen=True)
class QosThresholds:
    max_response_time: int = 10
    min_response_rate: float = 0.9
    timeout: int = 20

    def __post_init__(self):
        if self.max_response_time <= 0 or self.timeout <= 0:
            raise ContractError("QoS time thresholds must be positive")
        if not 0 < self.min_response_rate <= 1:
            raise ContractError("min_response_rate must be in (0, 1]")


@dataclass(frozen=True)
class Contract:
    """Agreement between the Outsourcer and one worker.

    Currency fields are integer micro-units.
    """

    contract_id: bytes
    outsourcer_pk: bytes
    worker_pk: bytes
    role: Role
    reward_per_input: int
    fee: int
    bounty: int
    deposit: int
    function_id: str
    qos: QosThresholds = field(default_factory=QosThresholds)
    deadline: int = 100

    def __post_init__(self):
        if len(self.contract_id) != 32:
            raise ContractError("contract_id must be 32 bytes")
        if len(self.outsourcer_pk) != KEY_SIZE or len(self.worker_pk) != KEY_SIZE:
            raise ContractError("public keys must be 32 bytes")
        if self.reward_per_input <= 0:
            raise ContractError("reward_per_input must be positive")
        if min(self.fee, self.bounty, self.deposit) < 0:
            raise ContractError("fee, bounty and deposit must be non-negative")
        if self.deposit < self.fee:
            raise ContractError(
                f"deposit {self.deposit} cannot cover the fee {self.fee}")
        if self.deadline <= 0:
            raise ContractError("deadline must be positive")


def encode_contract(c: Contract) -> bytes:
    """Canonical byte encoding (layout in PROTOCOL.md)."""
    fid = c.function_id.encode("utf-8")
    return b"".join([
        c.contract_id,
        c.outsourcer_pk,
        c.worker_pk,
        struct.pack("<B", int(c.role)),
        struct.pack("<QQQQ", c.reward_per_input, c.fee, c.bounty, c.deposit),
        struct.pack("<Q", len(fid)), fid,
        struct.pack("<QdQ", c.qos.max_response_time, c.qos.min_response_rate,
                    c.qos.timeout),
        struct.pack("<Q", c.deadline),
    ])


def contract_hash(c: Contract) -> bytes:
    return digest(encode_contract(c))


# -- incentives ------------------------------------------------------------

@dataclass(frozen=True)
class CostModel:
    c_h: object
    c_d: object
    q: object

    def __post_init__(self):
        if not 0 <= self.c_d <= self.c_h:
            raise ContractError("need 0 <= c_d <= c_h")
        if not 0 <= self.q <= 1:
            raise ContractError("q must be a probability")


@dataclass(frozen=True)
class PayoffMatrix:
    # row = this participant, column = counterparty; d = diligent, D = dishonest
    dd: object
    dD: object
    Dd: object
    DD: object

    def as_tuple(self):
        return (self.dd, self.dD, self.Dd, self.DD)


def payoff_matrix(r, cost: CostModel, f, b) -> PayoffMatrix:
    """Payoffs of one worker against its counterparty.

    Works on any numeric type; pass ``Fraction`` for exact results.
    """
    q = cost.q
    return PayoffMatrix(
        dd=r - cost.c_h,
        dD=r - cost.c_h + b,
        Dd=r * q - (f + b) * (1 - q) - cost.c_d,
        DD=r - cost.c_d,
    )


def is_honesty_dominant(m: PayoffMatrix) -> bool:
    # strict: a tie leaves the dishonest equilibrium alive
    return m.dd > m.Dd and m.dD > m.DD


# -- sampling --------------------------------------------------------------

def detection_probability(c: float, i: int) -> float:
    """Chance that one sample per interval over ``i`` intervals hits a cheat."""
    if not 0 <= c <= 1:
        raise ValueError(f"cheat rate must be in [0, 1], got {c}")
    if i < 0:
        raise ValueError(f"interval count must be >= 0, got {i}")
    return 1.0 - (1.0 - c) ** i


def required_intervals(c: float, confidence: float) -> int:
    if not 0 < confidence < 1:
        raise ValueError("confidence must be in (0, 1)")
    if c == 0:
        raise ValueError("a cheat rate of 0 can never be detected")
    if not 0 < c <= 1:
        raise ValueError(f"cheat rate must be in (0, 1], got {c}")
    if c == 1:
        return 1
    # closed form as a starting point, then walk to the exact minimum
    i = max(1, math.ceil(math.log1p(-confidence) / math.log1p(-c)))
    while i > 1 and detection_probability(c, i - 1) >= confidence:
        i -= 1
    while detection_probability(c, i) < confidence:
        i += 1
    return i
