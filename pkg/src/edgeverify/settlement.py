"""Payment settlement entity: deposits, redemption, accusation, contestation.

The ledger checks signatures and compares bytes; it never evaluates the
outsourced function.  Operations are applied serially in simulated-time
order, and every transfer moves currency between two accounts, so the sum
of balances and deposits only changes through :meth:`Ledger.fund`.
"""
from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field

from .contract import Contract, Role, contract_hash
from .crypto import digest, merkle_verify, response_leaf
from .randomization import SelectionProof, SelectionRejected, check_selection_proof
from .wire import (ContestResponse, MembershipChallenge, MembershipProof, RootCommitment,
                   SignedInput, SignedResponse, Termination)


class Party(str, enum.Enum):
    OUTSOURCER = "outsourcer"
    CONTRACTOR = "contractor"
    VERIFIER = "verifier"

    def counterparty(self) -> "Party":
        if self is Party.CONTRACTOR:
            return Party.VERIFIER
        if self is Party.VERIFIER:
            return Party.CONTRACTOR
        raise ValueError("the Outsourcer has no counterparty in a contest")


class SettlementError(Exception):
    pass


class RegistrationRejected(SettlementError):
    pass


class RedemptionRejected(SettlementError):
    pass


class AccusationRejected(SettlementError):
    pass


class ContestRejected(SettlementError):
    pass


class ReviewRejected(SettlementError):
    pass


@dataclass(frozen=True)
class BatchedEvidence:
    """Signed root plus challenged opening, standing in for a SignedResponse."""

    root: RootCommitment
    proof: MembershipProof


@dataclass(frozen=True)
class Accusation:
    contractor_contract: Contract
    verifier_contract: Contract
    contractor_input: SignedInput
    verifier_input: SignedInput
    contractor_evidence: SignedResponse | BatchedEvidence
    verifier_response: SignedResponse | BatchedEvidence
    selection_proof: SelectionProof | None = None


@dataclass(frozen=True)
class ContestSubmission:
    submitter: Party
    record: SignedInput
    # (verifier public key, its signed fresh response)
    responses: tuple[tuple[bytes, ContestResponse], ...]


@dataclass(frozen=True)
class Transfer:
    payer: bytes
    payee: bytes
    amount: int
    reason: str
    contract_id: bytes


# -- contest decision logic -----------------------------------------------

@dataclass
class ContestTally:
    """Who is accused and how many consulted Verifiers sided with whom."""

    accused: Party
    pool: tuple[bytes, ...]
    consulted: list[bytes] = field(default_factory=list)
    support: dict = field(default_factory=lambda: {Party.CONTRACTOR: 0, Party.VERIFIER: 0})
    rounds: int = 0

    def remaining(self) -> list[bytes]:
        used = set(self.consulted)
        return [pk for pk in self.pool if pk not in used]

    def assign(self, choose) -> tuple[bytes, ...]:
        """Pick two unconsulted Verifiers, or all that are left if fewer.

        ``choose(candidates, k)`` makes the actual pick.
        """
        left = self.remaining()
        k = min(2, len(left))
        picked = tuple(choose(left, k)) if k else ()
        self.consulted.extend(picked)
        self.rounds += 1
        return picked

    def record(self, matches) -> bool:
        """Tally one round; returns True when the accusation flips."""
        for side in matches:
            if side is not None:
                self.support[side] += 1
        if len(matches) == 2 and all(m is self.accused for m in matches):
            self.accused = self.accused.counterparty()
            return True
        return False

    def majority_loser(self) -> Party:
        c, v = self.support[Party.CONTRACTOR], self.support[Party.VERIFIER]
        if c == v:
            return self.accused
        return Party.CONTRACTOR if c < v else Party.VERIFIER


class CasePhase(str, enum.Enum):
    ACCUSED = "accused"
    CONTESTED = "contested"
    CLOSED = "closed"


@dataclass
class CaseState:
    case_id: bytes
    accusation: Accusation
    phase: CasePhase
    accused: Party
    deadline: int
    tally: ContestTally | None = None
    c_payload: bytes = b""
    v_payload: bytes = b""
    assigned: tuple[bytes, ...] = ()
    awaiting_submission: bool = False
    entry_checked: bool = False
    convicted: Party | None = None
    mechanism: str = ""
    opened_at: int = 0
    closed_at: int | None = None
    transfers: list = field(default_factory=list)


@dataclass
class _ContractRecord:
    contract: Contract
    ch: bytes
    opened_at: int
    end_time: int | None = None
    closed: bool = False
    case_id: bytes | None = None


@dataclass
class _Claim:
    amount: int
    due: int
    void: bool = False
    paid: bool = False


class Ledger:
    def __init__(self, seed: int = 0, contest_reward: int | None = None,
                 outsourcer_deposit: bool = True):
        self.rng = random.Random(seed)
        self.contest_reward = contest_reward
        self.outsourcer_deposit = outsourcer_deposit
        self.balances: dict[bytes, int] = {}
        self.deposits: dict[tuple[bytes, bytes], int] = {}
        self.registered_verifiers: set[bytes] = set()
        self.reviews: dict[bytes, list[tuple[bytes, float, bytes]]] = {}
        self._review_keys: set[tuple[bytes, bytes]] = set()
        self.cases: dict[bytes, CaseState] = {}
        self.contracts: dict[bytes, _ContractRecord] = {}
        self._by_hash: dict[bytes, bytes] = {}
        self.claims: dict[bytes, _Claim] = {}
        self.funded = 0
        self.transfers: list[Transfer] = []
        self.shortfalls: list[Transfer] = []

    # -- accounts ---------------------------------------------------------

    def fund(self, pk: bytes, amount: int) -> None:
        if amount < 0:
            raise SettlementError("funding must be non-negative")
        self.balances[pk] = self.balances.get(pk, 0) + amount
        self.funded += amount

    def total(self) -> int:
        return sum(self.balances.values()) + sum(self.deposits.values())

    def holdings(self, pk: bytes) -> int:
        dep = sum(v for (_, owner), v in self.deposits.items() if owner == pk)
        return self.balances.get(pk, 0) + dep

    def _move(self, payer, payee, amount, reason, contract_id, sources) -> int:
        """Pay ``amount`` from the payer's ``sources`` in order; returns amount paid."""
        left = amount
        for src in sources:
            if left == 0:
                break
            if src == "balance":
                avail = self.balances.get(payer, 0)
                take = min(avail, left)
                self.balances[payer] = avail - take
            else:
                key = (src, payer)
                avail = self.deposits.get(key, 0)
                take = min(avail, left)
                if take:
                    self.deposits[key] = avail - take
            left -= take
        paid = amount - left
        if paid:
            self.balances[payee] = self.balances.get(payee, 0) + paid
        t = Transfer(payer, payee, paid, reason, contract_id)
        self.transfers.append(t)
        if left:
            self.shortfalls.append(Transfer(payer, payee, left, reason, contract_id))
        return paid

    # -- registration and contracts ---------------------------------------

    def register_verifier(self, pk: bytes, identity_attestation: bool) -> None:
        if pk in self.registered_verifiers:
            raise RegistrationRejected("Verifier already registered")
        if not identity_attestation:
            raise RegistrationRejected("identity attestation failed")
        self.registered_verifiers.add(pk)

    def open_contract(self, contract: Contract, now: int) -> bytes:
        """Register ``contract`` and lock ``deposit`` from the worker (and the Outsourcer)."""
        cid = contract.contract_id
        if cid in self.contracts:
            raise SettlementError("contract id already in use")
        payers = (contract.outsourcer_pk, contract.worker_pk)
        if not self.outsourcer_deposit:
            payers = (contract.worker_pk,)
        for pk in payers:
            if self.balances.get(pk, 0) < contract.deposit:
                raise SettlementError("insufficient balance for the deposit")
        for pk in payers:
            self.balances[pk] -= contract.deposit
            self.deposits[(cid, pk)] = self.deposits.get((cid, pk), 0) + contract.deposit
        ch = contract_hash(contract)
        self.contracts[cid] = _ContractRecord(contract, ch, now)
        self._by_hash[ch] = cid
        return ch

    def end_contract(self, contract_id: bytes, now: int) -> None:
        rec = self.contracts[contract_id]
        if rec.end_time is None:
            rec.end_time = now

    def contract_by_hash(self, ch: bytes) -> Contract | None:
        cid = self._by_hash.get(ch)
        return self.contracts[cid].contract if cid else None

    # -- redemption -------------------------------------------------------

    def redeem(self, final_msg: SignedInput | Termination, contract: Contract, now: int) -> int:
        """Schedule payment of ``reward * ack`` for the worker of ``contract``.

        ``final_msg`` is the Outsourcer-signed message with the highest
        acknowledged-output count the worker holds.
        """
        rec = self.contracts.get(contract.contract_id)
        if rec is None or rec.contract != contract:
            raise RedemptionRejected("unknown contract")
        if final_msg.contract_ref != rec.ch:
            raise RedemptionRejected("message belongs to a different contract")
        if not final_msg.verify(contract.outsourcer_pk):
            raise RedemptionRejected("Outsourcer signature does not verify")
        prior = self.claims.get(contract.contract_id)
        if prior is not None:
            raise RedemptionRejected("payment forfeited by conviction" if prior.void
                                     else "contract already redeemed")
        ack = final_msg.ack_count if isinstance(final_msg, SignedInput) else final_msg.final_ack
        if rec.end_time is None:
            rec.end_time = now
        payout = contract.reward_per_input * ack
        self.claims[contract.contract_id] = _Claim(payout, rec.end_time + contract.deadline)
        return payout

    # -- accusation -------------------------------------------------------

    def _record(self, contract: Contract) -> _ContractRecord:
        rec = self.contracts.get(contract.contract_id)
        if rec is None or rec.contract != contract:
            raise AccusationRejected("contract not registered with the settlement entity")
        return rec

    def _response_payload(self, evidence, contract, ch, signed_input) -> bytes:
        idx = signed_input.input_index
        if isinstance(evidence, SignedResponse):
            if (evidence.contract_ref != ch or evidence.input_index != idx
                    or evidence.input_sig != signed_input.sig):
                raise AccusationRejected("response does not countersign the input")
            if not evidence.verify(contract.worker_pk):
                raise AccusationRejected("response signature does not verify")
            return evidence.payload
        root, proof = evidence.root, evidence.proof
        if root.contract_ref != ch or proof.contract_ref != ch:
            raise AccusationRejected("batched evidence belongs to another contract")
        if proof.challenged_index != idx or proof.input_sig != signed_input.sig:
            raise AccusationRejected("proof does not countersign the input")
        if proof.batch_id != root.batch_id:
            raise AccusationRejected("proof and root are from different batches")
        if not (root.verify(contract.worker_pk) and proof.verify(contract.worker_pk)):
            raise AccusationRejected("batched evidence signature does not verify")
        challenge = MembershipChallenge(ch, proof.batch_id, idx, proof.challenge_sig)
        if not challenge.verify(contract.outsourcer_pk):
            raise AccusationRejected("challenge signature does not verify")
        if not root.first_index <= idx < root.first_index + root.leaf_count:
            raise AccusationRejected("challenged index outside the committed batch")
        if not merkle_verify(root.root, response_leaf(idx, proof.payload),
                             idx - root.first_index, proof.path, root.leaf_count):
            raise AccusationRejected("membership proof does not match the root")
        return proof.payload

    def accuse(self, a: Accusation, now: int) -> CaseState:
        cc, vc = a.contractor_contract, a.verifier_contract
        if cc.role is not Role.CONTRACTOR or vc.role is not Role.VERIFIER:
            raise AccusationRejected("contract roles are wrong")
        if cc.outsourcer_pk != vc.outsourcer_pk:
            raise AccusationRejected("contracts have different Outsourcers")
        crec, vrec = self._record(cc), self._record(vc)
        case_id = cc.contract_id
        if case_id in self.cases:
            raise AccusationRejected("a case is already open for this contract")
        for rec in (crec, vrec):
            if rec.closed or (rec.end_time is not None
                              and now > rec.end_time + rec.contract.deadline):
                raise AccusationRejected("redemption deadline has passed")
        o_pk = cc.outsourcer_pk
        for si, rec in ((a.contractor_input, crec), (a.verifier_input, vrec)):
            if si.contract_ref != rec.ch or not si.verify(o_pk):
                raise AccusationRejected("input signature does not verify")
        c_payload = self._response_payload(a.contractor_evidence, cc, crec.ch, a.contractor_input)
        v_payload = self._response_payload(a.verifier_response, vc, vrec.ch, a.verifier_input)

        case = CaseState(case_id, a, CasePhase.ACCUSED, Party.CONTRACTOR,
                         now + cc.deadline, c_payload=c_payload, v_payload=v_payload,
                         opened_at=now)
        crec.case_id = vrec.case_id = case_id

        same_input = (a.contractor_input.input_index == a.verifier_input.input_index
                      and a.contractor_input.payload == a.verifier_input.payload)
        if not same_input:
            # both workers countersigned Outsourcer-signed inputs that differ
            self.cases[case_id] = case
            self.close_case(case_id, Party.OUTSOURCER, "signature_chain", now)
            return case
        if c_payload == v_payload:
            crec.case_id = vrec.case_id = None
            raise AccusationRejected("responses are equal")
        excluded = {o_pk, cc.worker_pk, vc.worker_pk}
        pool = tuple(sorted(pk for pk in self.registered_verifiers if pk not in excluded))
        case.tally = ContestTally(Party.CONTRACTOR, pool)
        self.cases[case_id] = case
        return case

    # -- contestation -----------------------------------------------------

    def _party_pk(self, case: CaseState, party: Party) -> bytes:
        a = case.accusation
        return {Party.OUTSOURCER: a.contractor_contract.outsourcer_pk,
                Party.CONTRACTOR: a.contractor_contract.worker_pk,
                Party.VERIFIER: a.verifier_contract.worker_pk}[party]

    def _open_case(self, case_id: bytes, now: int) -> CaseState:
        case = self.cases.get(case_id)
        if case is None:
            raise ContestRejected("no such case")
        self._expire(case, now)
        if case.phase is CasePhase.CLOSED:
            raise ContestRejected("case is closed")
        return case

    def open_contestation(self, case_id: bytes, requester: Party, now: int,
                          entry_proof: SelectionProof | None = None) -> tuple[bytes, ...]:
        """Assign fresh Verifiers to the accused party.

        Returns the assigned keys; an empty tuple means the case was
        resolved instead (bad entry proof or exhausted pool).
        """
        case = self._open_case(case_id, now)
        if requester is not case.accused:
            raise ContestRejected("only the accused party may contest")
        if case.awaiting_submission:
            raise ContestRejected("previous round has not been submitted")
        a = case.accusation
        if not case.entry_checked:
            proof = entry_proof if entry_proof is not None else a.selection_proof
            try:
                check_selection_proof(
                    proof, a.verifier_contract.worker_pk,
                    ch=contract_hash(a.contractor_contract),
                    outsourcer_pk=a.contractor_contract.outsourcer_pk,
                    contractor_pk=a.contractor_contract.worker_pk)
            except SelectionRejected:
                self.close_case(case_id, Party.OUTSOURCER, "randomization", now)
                return ()
            case.entry_checked = True
        if not case.tally.remaining():
            self.close_case(case_id, case.tally.majority_loser(), "contestation", now)
            return ()
        case.assigned = case.tally.assign(self.rng.sample)
        case.phase = CasePhase.CONTESTED
        case.awaiting_submission = True
        case.deadline = now + a.contractor_contract.deadline
        return case.assigned

    def submit_contest(self, case_id: bytes, sub: ContestSubmission, now: int) -> CaseState:
        case = self._open_case(case_id, now)
        if not case.awaiting_submission or sub.submitter is not case.accused:
            raise ContestRejected("no contest round is awaiting this party")
        a = case.accusation
        original = a.contractor_input if sub.submitter is Party.CONTRACTOR else a.verifier_input
        o_pk = a.contractor_contract.outsourcer_pk
        if sub.record != original or not sub.record.verify(o_pk):
            raise ContestRejected("records do not match the Outsourcer's signature")
        if sorted(pk for pk, _ in sub.responses) != sorted(case.assigned):
            raise ContestRejected("responses must come from exactly the assigned Verifiers")
        ref = a.contractor_input
        ch = contract_hash(a.contractor_contract)
        in_hash = digest(ref.payload)
        matches = []
        for pk, resp in sub.responses:
            if (resp.contract_ref != ch or resp.input_index != ref.input_index
                    or resp.input_sig != ref.sig or resp.input_hash != in_hash):
                raise ContestRejected("Verifier response formed over a different input")
            if not resp.verify(pk):
                raise ContestRejected("Verifier signature does not verify")
            if resp.payload == case.c_payload:
                matches.append(Party.CONTRACTOR)
            elif resp.payload == case.v_payload:
                matches.append(Party.VERIFIER)
            else:
                matches.append(None)
        case.awaiting_submission = False
        if case.tally.record(matches):
            case.accused = case.tally.accused
        case.deadline = now + a.contractor_contract.deadline
        if not case.tally.remaining():
            self.close_case(case_id, case.tally.majority_loser(), "contestation", now)
        return case

    def _expire(self, case: CaseState, now: int) -> None:
        if case.phase is not CasePhase.CLOSED and now > case.deadline:
            mech = "sampling" if case.tally and case.tally.rounds == 0 else "contestation"
            self.close_case(case.case_id, case.accused, mech, case.deadline)

    def close_case(self, case_id: bytes, convicted: Party, mechanism: str,
                   now: int) -> list[Transfer]:
        """Fine the convicted party and pay everyone it owes."""
        case = self.cases[case_id]
        if case.phase is CasePhase.CLOSED:
            return case.transfers
        a = case.accusation
        cc, vc = a.contractor_contract, a.verifier_contract
        payer = self._party_pk(case, convicted)
        if convicted is Party.CONTRACTOR:
            own, fee_to, bounty_to = cc, cc.outsourcer_pk, vc.worker_pk
        elif convicted is Party.VERIFIER:
            own, fee_to, bounty_to = vc, vc.outsourcer_pk, cc.worker_pk
        else:
            own, fee_to, bounty_to = cc, cc.worker_pk, None
        sources = [own.contract_id, "balance"]
        if convicted is Party.OUTSOURCER:
            sources = [cc.contract_id, vc.contract_id, "balance"]
        before = len(self.transfers)
        if own.fee:
            self._move(payer, fee_to, own.fee, "fee", own.contract_id, sources)
        if bounty_to is not None and own.bounty:
            self._move(payer, bounty_to, own.bounty, "bounty", own.contract_id, sources)
        reward = self.contest_reward if self.contest_reward is not None else cc.reward_per_input
        if case.tally is not None:
            for pk in case.tally.consulted:
                self._move(payer, pk, reward, "contest_reward", own.contract_id, sources)
        if convicted is not Party.OUTSOURCER:
            claim = self.claims.get(own.contract_id)
            if claim is None:
                self.claims[own.contract_id] = _Claim(0, 0, void=True)
            else:
                claim.void = True
        case.transfers = self.transfers[before:]
        case.phase = CasePhase.CLOSED
        case.convicted = convicted
        case.mechanism = mechanism
        case.closed_at = now
        case.awaiting_submission = False
        return case.transfers

    # -- time -------------------------------------------------------------

    def advance(self, now: int) -> None:
        """Apply every deadline that has passed by ``now``."""
        for case in self.cases.values():
            self._expire(case, now)
        for cid, rec in self.contracts.items():
            if rec.closed or rec.end_time is None:
                continue
            if now < rec.end_time + rec.contract.deadline:
                continue
            if rec.case_id is not None and self.cases[rec.case_id].phase is not CasePhase.CLOSED:
                continue
            c = rec.contract
            claim = self.claims.get(cid)
            if claim and not claim.void and not claim.paid:
                self._move(c.outsourcer_pk, c.worker_pk, claim.amount, "reward", cid,
                           ["balance", cid])
                claim.paid = True
            for pk in (c.outsourcer_pk, c.worker_pk):
                left = self.deposits.pop((cid, pk), 0)
                self.balances[pk] = self.balances.get(pk, 0) + left
            rec.closed = True

    def open_items(self) -> bool:
        return (any(c.phase is not CasePhase.CLOSED for c in self.cases.values())
                or any(not r.closed for r in self.contracts.values()))

    # -- reputation -------------------------------------------------------

    def submit_review(self, reviewer: bytes, about: bytes, score: float, contract_ref: bytes) -> None:
        contract = self.contract_by_hash(contract_ref)
        if contract is None:
            raise ReviewRejected("unknown contract")
        parties = {contract.outsourcer_pk, contract.worker_pk}
        if reviewer not in parties or about not in parties or reviewer == about:
            raise ReviewRejected("reviewer and subject must be the two contract parties")
        if (reviewer, contract_ref) in self._review_keys:
            raise ReviewRejected("one review per party and contract")
        if not 0 <= score <= 1:
            raise ReviewRejected("score must be in [0, 1]")
        self._review_keys.add((reviewer, contract_ref))
        self.reviews.setdefault(about, []).append((reviewer, float(score), contract_ref))

    def reputation(self, pk: bytes) -> float | None:
        scores = [s for _, s, _ in self.reviews.get(pk, ())]
        return sum(scores) / len(scores) if scores else None

    # -- export -----------------------------------------------------------

    def snapshot_lines(self) -> list[str]:
        lines = []
        for pk in sorted(self.balances):
            lines.append(json.dumps({"kind": "balance", "pk": pk.hex(),
                                     "amount": self.balances[pk]}, sort_keys=True))
        for (cid, pk) in sorted(self.deposits):
            lines.append(json.dumps({"kind": "deposit", "contract": cid.hex(), "pk": pk.hex(),
                                     "amount": self.deposits[(cid, pk)]}, sort_keys=True))
        for cid in sorted(self.cases):
            c = self.cases[cid]
            lines.append(json.dumps({
                "kind": "case", "contract": cid.hex(), "phase": c.phase.value,
                "accused": c.accused.value,
                "convicted": c.convicted.value if c.convicted else None,
                "mechanism": c.mechanism,
                "consulted": len(c.tally.consulted) if c.tally else 0,
            }, sort_keys=True))
        return lines
