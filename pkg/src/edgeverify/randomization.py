"""Commit-reveal selection of the Verifier.

The Outsourcer commits to ``h(x)``; the Contractor answers with ``y`` and
its sorted Verifier list, signing over ``h(x)`` before ``x`` is known.
The Verifier at ``(x + y) mod n`` is then fixed for both sides.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .crypto import digest
from .wire import ContractorCommit, OutsourcerCommit


class RejectReason(enum.Enum):
    HASH_MISMATCH = "hash_mismatch"
    BAD_OUTSOURCER_SIG = "bad_outsourcer_signature"
    BAD_CONTRACTOR_SIG = "bad_contractor_signature"
    CONTRACT_MISMATCH = "contract_mismatch"
    UNSORTED_LIST = "unsorted_list"
    EMPTY_LIST = "empty_list"
    LIST_DIVERGENCE = "list_divergence"
    WRONG_VERIFIER = "wrong_verifier"


class SelectionRejected(Exception):
    def __init__(self, reason: RejectReason, detail: str = ""):
        super().__init__(f"{reason.value}{': ' + detail if detail else ''}")
        self.reason = reason


def _check_list(verifier_list) -> None:
    if not verifier_list:
        raise SelectionRejected(RejectReason.EMPTY_LIST)
    for a, b in zip(verifier_list, verifier_list[1:]):
        if not a < b:
            raise SelectionRejected(RejectReason.UNSORTED_LIST,
                                    "keys must be strictly ascending")


def outsourcer_commit(x: bytes, ch: bytes, sk_o: bytes) -> OutsourcerCommit:
    if len(x) != 32:
        raise ValueError("x must be 32 bytes")
    return OutsourcerCommit(ch, digest(x)).signed(sk_o)


def contractor_commit(oc: OutsourcerCommit, y: bytes, verifier_list, sk_c: bytes,
                      outsourcer_pk: bytes) -> ContractorCommit:
    if len(y) != 32:
        raise ValueError("y must be 32 bytes")
    verifier_list = tuple(verifier_list)
    _check_list(verifier_list)
    if not oc.verify(outsourcer_pk):
        raise SelectionRejected(RejectReason.BAD_OUTSOURCER_SIG)
    return ContractorCommit(oc.contract_ref, oc.x_hash, y, verifier_list).signed(sk_c)


def select_verifier(x: bytes, y: bytes, verifier_list) -> tuple[int, bytes]:
    n = len(verifier_list)
    if n == 0:
        raise SelectionRejected(RejectReason.EMPTY_LIST)
    index = (int.from_bytes(x, "big") + int.from_bytes(y, "big")) % n
    return index, verifier_list[index]


def jaccard(a, b) -> float:
    a, b = set(a), set(b)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def verify_selection(oc: OutsourcerCommit, cc: ContractorCommit, revealed_x: bytes,
                     local_list, similarity_threshold: float, *,
                     outsourcer_pk: bytes, contractor_pk: bytes) -> int:
    """Check a completed exchange and return the selected Verifier index.

    Raises :class:`SelectionRejected` naming the first failed check.
    """
    if digest(revealed_x) != oc.x_hash:
        raise SelectionRejected(RejectReason.HASH_MISMATCH)
    if cc.x_hash != oc.x_hash or cc.contract_ref != oc.contract_ref:
        raise SelectionRejected(RejectReason.CONTRACT_MISMATCH)
    if not oc.verify(outsourcer_pk):
        raise SelectionRejected(RejectReason.BAD_OUTSOURCER_SIG)
    _check_list(cc.verifier_list)
    if not cc.verify(contractor_pk):
        raise SelectionRejected(RejectReason.BAD_CONTRACTOR_SIG)
    sim = jaccard(cc.verifier_list, local_list)
    if sim < similarity_threshold:
        raise SelectionRejected(RejectReason.LIST_DIVERGENCE,
                                f"similarity {sim:.3f} < {similarity_threshold}")
    index, _ = select_verifier(revealed_x, cc.y, cc.verifier_list)
    return index


@dataclass(frozen=True)
class SelectionProof:
    """Transcript the Outsourcer shows the settlement entity before contestation."""

    outsourcer_commit: OutsourcerCommit
    contractor_commit: ContractorCommit | None
    x: bytes


def check_selection_proof(proof: SelectionProof | None, verifier_pk: bytes, *,
                          ch: bytes, outsourcer_pk: bytes, contractor_pk: bytes) -> None:
    """Raise unless ``proof`` shows ``verifier_pk`` was the committed choice."""
    if proof is None or proof.contractor_commit is None:
        raise SelectionRejected(RejectReason.BAD_CONTRACTOR_SIG,
                                "no Contractor commitment presented")
    if proof.outsourcer_commit.contract_ref != ch:
        raise SelectionRejected(RejectReason.CONTRACT_MISMATCH)
    cc = proof.contractor_commit
    index = verify_selection(proof.outsourcer_commit, cc, proof.x, cc.verifier_list, 0.0,
                             outsourcer_pk=outsourcer_pk, contractor_pk=contractor_pk)
    if cc.verifier_list[index] != verifier_pk:
        raise SelectionRejected(RejectReason.WRONG_VERIFIER,
                                "contacted Verifier is not the committed selection")
