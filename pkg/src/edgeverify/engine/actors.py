"""Outsourcer and worker state machines for the execution phase.

Actors never touch the network directly: ``handle(event, now)`` consumes
one delivered event and returns the messages to send.  The simulator
owns ordering and delivery.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..contract import Contract, contract_hash
from ..crypto import KeyPair, digest, merkle_build, merkle_prove, merkle_verify, response_leaf
from ..randomization import SelectionProof
from ..settlement import Accusation, BatchedEvidence
from ..wire import (ContestResponse, MalformedMessage, MembershipChallenge, MembershipProof,
                    ResponseData, RootCommitment, SignedInput, SignedResponse, Termination,
                    decode, encode)
from .functions import ComputeFunction
from .qos import QosLedgerLocal, QosViolation, qos_check
from .sampling import PendingPair, SamplingSchedule, compare_pair, evidence_payload
from .strategies import (CheatRate, Colluder, Honest, PaymentRefuser, QAlgorithm,
                         SlowResponder, SplitInput)

FLAG_BATCH_END = 0x1

CONTRACTOR = "contractor"
VERIFIER = "verifier"
OUTSOURCER = "outsourcer"


@dataclass(frozen=True)
class Send:
    to: str
    data: bytes
    delay: int = 0


@dataclass(frozen=True)
class Tick:
    """Time for the Outsourcer to emit its next input."""


@dataclass(frozen=True)
class Check:
    """Periodic QoS / completion check."""


@dataclass(frozen=True)
class Deliver:
    sender: str
    data: bytes


@dataclass
class _Link:
    name: str
    contract: Contract
    ch: bytes
    acked: int = 0
    inputs: dict = field(default_factory=dict)
    responses: dict = field(default_factory=dict)
    unsigned: dict = field(default_factory=dict)
    first_seen: dict = field(default_factory=dict)
    roots: dict = field(default_factory=dict)
    challenges: dict = field(default_factory=dict)
    proven: set = field(default_factory=set)
    closed: bool = False

    @property
    def pk(self) -> bytes:
        return self.contract.worker_pk


class Outsourcer:
    def __init__(self, keys: KeyPair, contractor_contract: Contract,
                 verifier_contract: Contract | None, inputs: list[bytes],
                 schedule: SamplingSchedule, *, strategy=None, batching: bool = False,
                 selection_proof: SelectionProof | None = None, min_qos_samples: int = 10):
        self.keys = keys
        self.strategy = strategy or Honest()
        self.inputs = inputs
        self.schedule = schedule
        self.batching = batching
        self.selection_proof = selection_proof
        self.min_qos_samples = min_qos_samples
        self.links = {CONTRACTOR: _Link(CONTRACTOR, contractor_contract,
                                        contract_hash(contractor_contract))}
        if verifier_contract is not None:
            self.links[VERIFIER] = _Link(VERIFIER, verifier_contract,
                                         contract_hash(verifier_contract))
        self.next_index = 0
        self.pairs: dict[int, PendingPair] = {}
        self.qos = QosLedgerLocal()
        self.accusations: list[Accusation] = []
        self.detections: list[tuple[int, int, int]] = []  # (index, first response, detected)
        self.rejected: list[tuple[int, str, str]] = []  # (time, peer, reason)
        self.split_indices: list[int] = []
        self.terminated = False
        self.termination_time: int | None = None
        self.abort_reason: str | None = None
        self.sent_terminations: dict[str, Termination] = {}

    # -- helpers ----------------------------------------------------------

    @property
    def finished(self) -> bool:
        return self.terminated

    def _send(self, link: _Link, msg) -> Send:
        return Send(link.name, encode(msg))

    def _pair(self, index: int) -> PendingPair:
        pair = self.pairs.get(index)
        if pair is None:
            c, v = self.links[CONTRACTOR], self.links.get(VERIFIER)
            pair = PendingPair(index, contractor_contract=c.contract,
                               verifier_contract=v.contract if v else None,
                               selection_proof=self.selection_proof)
            self.pairs[index] = pair
        return pair

    def _terminate(self, now: int, reason: str | None) -> list[Send]:
        if self.terminated:
            return []
        self.terminated = True
        self.termination_time = now
        self.abort_reason = reason
        if isinstance(self.strategy, PaymentRefuser):
            return self._refuse(now)
        out = []
        for link in self.links.values():
            if link.closed:
                continue
            term = Termination(link.ch, link.acked).signed(self.keys.secret)
            self.sent_terminations[link.name] = term
            out.append(self._send(link, term))
            link.closed = True
        return out

    def _refuse(self, now: int) -> list[Send]:
        # no Termination; try to void payment with an accusation over agreeing responses
        for pair in self.pairs.values():
            if pair.complete:
                self.accusations.append(Accusation(
                    pair.contractor_contract, pair.verifier_contract, pair.contractor_input,
                    pair.verifier_input, pair.contractor_response, pair.verifier_response,
                    pair.selection_proof))
                break
        for link in self.links.values():
            link.closed = True
        return []

    def _reject(self, link: _Link, now: int, reason: str) -> list[Send]:
        self.rejected.append((now, link.name, reason))
        self.qos[link.name].blacklist(now, QosViolation.BAD_MESSAGE)
        return self._terminate(now, f"bad_message:{link.name}")

    # -- events -----------------------------------------------------------

    def handle(self, event, now: int) -> list[Send]:
        if isinstance(event, Tick):
            return self._on_tick(now)
        if isinstance(event, Deliver):
            return self._on_message(event.sender, event.data, now)
        if isinstance(event, Check):
            return self._on_check(now)
        raise TypeError(f"unexpected event {event!r}")

    def _on_tick(self, now: int) -> list[Send]:
        if self.terminated or self.next_index >= len(self.inputs):
            return []
        i = self.next_index
        self.next_index += 1
        payload = self.inputs[i]
        interval = self.schedule.interval_of(i)
        out = []
        c = self.links[CONTRACTOR]
        flags = 0
        if self.batching:
            _, end = self.schedule.interval_bounds(interval)
            if i == end - 1:
                flags |= FLAG_BATCH_END
        si = SignedInput(c.ch, i, c.acked, interval, flags, payload).signed(self.keys.secret)
        c.inputs[i] = si
        self.qos[CONTRACTOR].expect(i, now)
        out.append(self._send(c, si))
        v = self.links.get(VERIFIER)
        if v is not None and not v.closed and self.schedule.is_sampled(i):
            v_payload = payload
            if isinstance(self.strategy, SplitInput) and not self.split_indices:
                v_payload = bytes([payload[0] ^ 0x01]) + payload[1:] if payload else b"\x01"
                self.split_indices.append(i)
            vi = SignedInput(v.ch, i, v.acked, interval, 0, v_payload).signed(self.keys.secret)
            v.inputs[i] = vi
            self.qos[VERIFIER].expect(i, now)
            pair = self._pair(i)
            pair.contractor_input, pair.verifier_input = si, vi
            out.append(self._send(v, vi))
        return out

    def _on_message(self, sender: str, data: bytes, now: int) -> list[Send]:
        link = self.links.get(sender)
        if link is None or self.terminated:
            return []
        try:
            msg = decode(data)
        except MalformedMessage as exc:
            return self._reject(link, now, f"malformed: {exc.reason}")
        if msg.contract_ref != link.ch:
            return self._reject(link, now, "wrong contract")
        if isinstance(msg, SignedResponse):
            return self._on_response(link, msg, now)
        if isinstance(msg, ResponseData) and self.batching and sender == CONTRACTOR:
            return self._on_response_data(link, msg, now)
        if isinstance(msg, RootCommitment) and self.batching and sender == CONTRACTOR:
            return self._on_root(link, msg, now)
        if isinstance(msg, MembershipProof) and self.batching and sender == CONTRACTOR:
            return self._on_proof(link, msg, now)
        if isinstance(msg, Termination):
            if not msg.verify(link.pk):
                return self._reject(link, now, "bad signature")
            link.closed = True
            return self._terminate(now, f"peer_terminated:{link.name}")
        return self._reject(link, now, f"unexpected {type(msg).__name__}")

    def _on_response(self, link: _Link, msg: SignedResponse, now: int) -> list[Send]:
        i = msg.input_index
        si = link.inputs.get(i)
        if si is None or msg.input_sig != si.sig or i in link.responses:
            return self._reject(link, now, "response does not match a sent input")
        if self.batching and link.name == CONTRACTOR:
            return self._reject(link, now, "signed response while batching")
        if not msg.verify(link.pk):
            return self._reject(link, now, "bad signature")
        link.acked += 1
        link.responses[i] = msg
        link.first_seen.setdefault(i, now)
        self.qos[link.name].answered_at(i, now)
        out = []
        if i in self.pairs:
            pair = self.pairs[i]
            if link.name == CONTRACTOR:
                pair.contractor_response = msg
            else:
                pair.verifier_response = msg
            out += self._compare(pair, now)
        return out + self._maybe_finish(now)

    def _on_response_data(self, link: _Link, msg: ResponseData, now: int) -> list[Send]:
        i = msg.input_index
        if i not in link.inputs or i in link.unsigned:
            return self._reject(link, now, "response does not match a sent input")
        link.unsigned[i] = msg.payload
        link.first_seen.setdefault(i, now)
        self.qos[link.name].answered_at(i, now)
        return []

    def _on_root(self, link: _Link, msg: RootCommitment, now: int) -> list[Send]:
        batch = msg.batch_id
        if batch >= self.schedule.intervals or batch in link.roots:
            return self._reject(link, now, "unexpected batch")
        first, end = self.schedule.interval_bounds(batch)
        if msg.first_index != first or msg.leaf_count != end - first:
            return self._reject(link, now, "batch bounds do not match")
        if not msg.verify(link.pk):
            return self._reject(link, now, "bad signature")
        try:
            leaves = [response_leaf(i, link.unsigned[i]) for i in range(first, end)]
        except KeyError:
            return self._reject(link, now, "root commits to responses never received")
        if merkle_build(leaves).root != msg.root:
            return self._reject(link, now, "root does not match received responses")
        link.roots[batch] = msg
        link.acked += end - first
        target = self.schedule.sampled_index(batch)
        challenge = MembershipChallenge(link.ch, batch, target).signed(self.keys.secret)
        link.challenges[batch] = challenge
        return [self._send(link, challenge)]

    def _on_proof(self, link: _Link, msg: MembershipProof, now: int) -> list[Send]:
        batch = msg.batch_id
        challenge = link.challenges.get(batch)
        root = link.roots.get(batch)
        if challenge is None or root is None or batch in link.proven:
            return self._reject(link, now, "unsolicited proof")
        i = msg.challenged_index
        if (i != challenge.challenged_index or msg.challenge_sig != challenge.sig
                or msg.input_sig != link.inputs[i].sig):
            return self._reject(link, now, "proof does not answer the challenge")
        if not msg.verify(link.pk):
            return self._reject(link, now, "bad signature")
        if not merkle_verify(root.root, response_leaf(i, msg.payload), i - root.first_index,
                             msg.path, root.leaf_count):
            return self._reject(link, now, "membership proof fails")
        link.proven.add(batch)
        out = []
        if i in self.pairs:
            pair = self.pairs[i]
            pair.contractor_response = BatchedEvidence(root, msg)
            out += self._compare(pair, now)
        return out + self._maybe_finish(now)

    def _compare(self, pair: PendingPair, now: int) -> list[Send]:
        if not pair.complete:
            return []
        accusation = compare_pair(pair)
        if accusation is None:
            return []
        c = self.links[CONTRACTOR]
        self.detections.append((pair.input_index, c.first_seen.get(pair.input_index, now), now))
        if isinstance(self.strategy, PaymentRefuser):
            # a refuser would never pass on a genuine detection; record it anyway
            pass
        self.accusations.append(accusation)
        return self._terminate(now, "mismatch")

    def _outstanding(self, link: _Link) -> bool:
        if link.closed:
            return False
        if self.batching and link.name == CONTRACTOR:
            return len(link.proven) < self.schedule.intervals
        return len(link.responses) < len(link.inputs)

    def _maybe_finish(self, now: int) -> list[Send]:
        if self.terminated or self.next_index < len(self.inputs):
            return []
        if any(self._outstanding(link) for link in self.links.values()):
            return []
        return self._terminate(now, None)

    def _on_check(self, now: int) -> list[Send]:
        if self.terminated:
            return []
        for link in self.links.values():
            if link.closed:
                continue
            kind = qos_check(self.qos[link.name], link.contract.qos, now, self.min_qos_samples)
            if kind is not None:
                self.qos[link.name].blacklist(now, kind)
                return self._terminate(now, f"qos:{kind.value}:{link.name}")
        return self._maybe_finish(now)


class Worker:
    """Contractor or Verifier."""

    def __init__(self, name: str, keys: KeyPair, contract: Contract, function: ComputeFunction,
                 strategy=None, rng: random.Random | None = None, *, batching: bool = False,
                 partner_pk: bytes | None = None, peer: str = OUTSOURCER):
        self.name = name
        self.keys = keys
        self.contract = contract
        self.ch = contract_hash(contract)
        self.function = function
        self.strategy = strategy or Honest()
        self.rng = rng or random.Random(0)
        self.batching = batching
        self.partner_pk = partner_pk
        self.peer = peer
        self.promise: SignedInput | Termination | None = None
        self.last_ack = 0
        self.records: dict[int, SignedInput] = {}
        self.answers: dict[int, bytes] = {}
        self.false_indices: list[int] = []
        self.pending_leaves: list[int] = []
        self.trees: dict[int, tuple[int, object]] = {}
        self.terminated = False
        self.abort_reason: str | None = None
        self.received: list[bytes] = []
        self.qos = QosLedgerLocal()
        self.rejected: list[tuple[int, str]] = []

    @property
    def finished(self) -> bool:
        return self.terminated

    def partner_identified(self) -> bool:
        if self.partner_pk is None:
            return False
        if self.partner_pk == self.contract.outsourcer_pk:
            return True
        return any(self.partner_pk in blob for blob in self.received)

    def answer(self, payload: bytes) -> tuple[bytes, bool]:
        """Output to send and whether it differs from the true result."""
        s = self.strategy
        truth = self.function.evaluate(payload)
        out = truth
        if isinstance(s, CheatRate):
            if self.rng.random() < s.rate:
                out = self.function.forge(payload)
        elif isinstance(s, QAlgorithm):
            out = self.function.cheap_answer(payload)
        elif isinstance(s, Colluder):
            if self.partner_identified():
                out = self.function.forge(payload)
        return out, out != truth

    def _keep_promise(self, msg) -> None:
        ack = msg.ack_count if isinstance(msg, SignedInput) else msg.final_ack
        cur = -1
        if self.promise is not None:
            cur = (self.promise.ack_count if isinstance(self.promise, SignedInput)
                   else self.promise.final_ack)
        if ack >= cur:
            self.promise = msg

    def _abort(self, now: int, reason: str) -> list[Send]:
        self.rejected.append((now, reason))
        self.qos[self.peer].blacklist(now, QosViolation.BAD_MESSAGE)
        if self.terminated:
            return []
        self.terminated = True
        self.abort_reason = reason
        term = Termination(self.ch, self.last_ack).signed(self.keys.secret)
        return [Send(self.peer, encode(term))]

    def handle(self, event, now: int) -> list[Send]:
        if not isinstance(event, Deliver):
            return []
        if self.terminated:
            return []
        self.received.append(event.data)
        try:
            msg = decode(event.data)
        except MalformedMessage as exc:
            return self._abort(now, f"malformed: {exc.reason}")
        if msg.contract_ref != self.ch:
            return self._abort(now, "wrong contract")
        o_pk = self.contract.outsourcer_pk
        if isinstance(msg, SignedInput):
            if not msg.verify(o_pk):
                return self._abort(now, "bad signature")
            return self._on_input(msg, now)
        if isinstance(msg, MembershipChallenge) and self.batching:
            if not msg.verify(o_pk):
                return self._abort(now, "bad signature")
            return self._on_challenge(msg, now)
        if isinstance(msg, Termination):
            if not msg.verify(o_pk):
                return self._abort(now, "bad signature")
            self._keep_promise(msg)
            self.terminated = True
            return []
        return self._abort(now, f"unexpected {type(msg).__name__}")

    def _on_input(self, msg: SignedInput, now: int) -> list[Send]:
        i = msg.input_index
        if msg.ack_count < self.last_ack:
            return self._abort(now, "acknowledged count decreased")
        if i in self.records:
            return self._abort(now, "input index reused")
        self.last_ack = msg.ack_count
        self._keep_promise(msg)
        self.records[i] = msg
        self.qos[self.peer].heard(now)
        out_payload, wrong = self.answer(msg.payload)
        self.answers[i] = out_payload
        if wrong:
            self.false_indices.append(i)
        delay = self.strategy.delay if isinstance(self.strategy, SlowResponder) else 0
        if not self.batching:
            resp = SignedResponse(self.ch, i, msg.sig, out_payload).signed(self.keys.secret)
            return [Send(self.peer, encode(resp), delay)]
        out = [Send(self.peer, encode(ResponseData(self.ch, i, out_payload)), delay)]
        self.pending_leaves.append(i)
        if msg.flags & FLAG_BATCH_END:
            indices = self.pending_leaves
            self.pending_leaves = []
            tree = merkle_build([response_leaf(j, self.answers[j]) for j in indices])
            self.trees[msg.interval_id] = (indices[0], tree)
            root = RootCommitment(self.ch, msg.interval_id, indices[0], len(indices),
                                  tree.root).signed(self.keys.secret)
            out.append(Send(self.peer, encode(root), delay))
        return out

    def _on_challenge(self, msg: MembershipChallenge, now: int) -> list[Send]:
        entry = self.trees.get(msg.batch_id)
        i = msg.challenged_index
        if entry is None:
            return self._abort(now, "challenge for unknown batch")
        first, tree = entry
        if not first <= i < first + len(tree):
            return self._abort(now, "challenge outside batch")
        proof = MembershipProof(self.ch, msg.batch_id, i, msg.sig, self.records[i].sig,
                                merkle_prove(tree, i - first), self.answers[i])
        return [Send(self.peer, encode(proof.signed(self.keys.secret)))]


class PoolVerifier:
    """A registered Verifier consulted off-edge during contestation."""

    def __init__(self, keys: KeyPair, function: ComputeFunction, strategy=None):
        self.keys = keys
        self.function = function
        self.strategy = strategy or Honest()
        self.consulted = 0

    def contest_answer(self, record: SignedInput) -> ContestResponse:
        self.consulted += 1
        if isinstance(self.strategy, (CheatRate, Colluder)):
            out = self.function.forge(record.payload)
        elif isinstance(self.strategy, QAlgorithm):
            out = self.function.cheap_answer(record.payload)
        else:
            out = self.function.evaluate(record.payload)
        resp = ContestResponse(record.contract_ref, record.input_index, record.sig,
                               digest(record.payload), out)
        return resp.signed(self.keys.secret)


def outsourcer_step(state: Outsourcer, event, now: int):
    return state, state.handle(event, now)


def contractor_step(state: Worker, event, now: int):
    return state, state.handle(event, now)


verifier_step = contractor_step


__all__ = [
    "Outsourcer", "Worker", "PoolVerifier", "Send", "Tick", "Check", "Deliver",
    "FLAG_BATCH_END", "outsourcer_step", "contractor_step", "verifier_step",
    "evidence_payload",
]
