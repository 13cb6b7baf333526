from __future__ import annotations

import random
from dataclasses import dataclass

from ..settlement import Accusation, BatchedEvidence
from ..contract import Contract
from ..randomization import SelectionProof
from ..wire import SignedInput, SignedResponse


@dataclass(frozen=True)
class SamplingSchedule:
    interval_size: int
    total_inputs: int
    offsets: tuple[int, ...]

    @property
    def intervals(self) -> int:
        return len(self.offsets)

    def sampled_index(self, interval: int) -> int:
        return interval * self.interval_size + self.offsets[interval]

    def sampled_indices(self) -> list[int]:
        return [self.sampled_index(k) for k in range(self.intervals)]

    def interval_of(self, index: int) -> int:
        return index // self.interval_size

    def is_sampled(self, index: int) -> bool:
        k = self.interval_of(index)
        return k < self.intervals and self.sampled_index(k) == index

    def interval_bounds(self, interval: int) -> tuple[int, int]:
        first = interval * self.interval_size
        return first, min(self.total_inputs, first + self.interval_size)


def sample_schedule(rng_seed, total_inputs: int, interval_size: int) -> SamplingSchedule:
    """One secret sampled offset per interval.

    A trailing partial interval draws its offset from its own length so
    every interval really does get a sample.
    """
    if interval_size < 1:
        raise ValueError("interval_size must be >= 1")
    if total_inputs < 0:
        raise ValueError("total_inputs must be >= 0")
    rng = rng_seed if isinstance(rng_seed, random.Random) else random.Random(rng_seed)
    n = -(-total_inputs // interval_size)
    offsets = []
    for k in range(n):
        width = min(interval_size, total_inputs - k * interval_size)
        offsets.append(rng.randrange(width))
    return SamplingSchedule(interval_size, total_inputs, tuple(offsets))


@dataclass
class PendingPair:
    input_index: int
    contractor_input: SignedInput | None = None
    verifier_input: SignedInput | None = None
    contractor_response: SignedResponse | BatchedEvidence | None = None
    verifier_response: SignedResponse | None = None
    contractor_contract: Contract | None = None
    verifier_contract: Contract | None = None
    selection_proof: SelectionProof | None = None

    @property
    def complete(self) -> bool:
        return self.contractor_response is not None and self.verifier_response is not None


class PairIndexError(ValueError):
    """The two responses being compared belong to different inputs."""


def evidence_index(e) -> int:
    return e.proof.challenged_index if isinstance(e, BatchedEvidence) else e.input_index


def evidence_payload(e) -> bytes:
    return e.proof.payload if isinstance(e, BatchedEvidence) else e.payload


def compare_pair(pair: PendingPair) -> Accusation | None:
    """``None`` when both workers agree, else the accusation bundle."""
    if not pair.complete:
        raise ValueError("both responses are required")
    ci = evidence_index(pair.contractor_response)
    vi = evidence_index(pair.verifier_response)
    if ci != vi or ci != pair.input_index:
        raise PairIndexError(f"responses for inputs {ci} and {vi} under pair {pair.input_index}")
    if evidence_payload(pair.contractor_response) == evidence_payload(pair.verifier_response):
        return None
    return Accusation(pair.contractor_contract, pair.verifier_contract,
                      pair.contractor_input, pair.verifier_input,
                      pair.contractor_response, pair.verifier_response,
                      pair.selection_proof)
