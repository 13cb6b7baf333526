"""Participant behaviours, honest and adversarial."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Honest:
    pass


@dataclass(frozen=True)
class CheatRate:
    """Return a forged answer for each input independently with probability ``rate``."""

    rate: float

    def __post_init__(self):
        if not 0 <= self.rate <= 1:
            raise ValueError("cheat rate must be in [0, 1]")


@dataclass(frozen=True)
class QAlgorithm:
    """Always return the function's cheap answer (right with probability ``q``)."""

    q: float = 0.5


@dataclass(frozen=True)
class Colluder:
    """Return the agreed false answer whenever ``partner`` can be identified.

    ``partner`` is a role label resolved to a key by the scenario.
    """

    partner: str
    rule: str = "forge"


@dataclass(frozen=True)
class SplitInput:
    """Outsourcer sends a different input to the Verifier at a sampled index."""


@dataclass(frozen=True)
class PaymentRefuser:
    """Outsourcer withholds its Termination and files a baseless accusation."""


@dataclass(frozen=True)
class SlowResponder:
    delay: int


Strategy = Honest | CheatRate | QAlgorithm | Colluder | SplitInput | PaymentRefuser | SlowResponder

_NAMED = {"honest": Honest, "split_input": SplitInput, "payment_refuser": PaymentRefuser}


def parse_strategy(spec) -> Strategy:
    """Config form: ``"honest"``, ``{"cheat_rate": 0.1}``, ``{"slow": 30}``,
    ``{"q_algorithm": 0.5}`` or ``{"colluder": "verifier"}``."""
    if isinstance(spec, (Honest, CheatRate, QAlgorithm, Colluder, SplitInput,
                         PaymentRefuser, SlowResponder)):
        return spec
    if spec is None:
        return Honest()
    if isinstance(spec, str):
        if spec not in _NAMED:
            raise ValueError(f"unknown strategy {spec!r}")
        return _NAMED[spec]()
    if isinstance(spec, dict) and len(spec) == 1:
        (key, value), = spec.items()
        if key == "cheat_rate":
            return CheatRate(float(value))
        if key == "q_algorithm":
            return QAlgorithm(float(value))
        if key == "slow":
            return SlowResponder(int(value))
        if key == "colluder":
            if isinstance(value, dict):
                return Colluder(**value)
            return Colluder(str(value))
    raise ValueError(f"cannot parse strategy {spec!r}")


def is_honest(s: Strategy) -> bool:
    # a slow responder computes honestly; it only breaches QoS
    return isinstance(s, (Honest, SlowResponder))
