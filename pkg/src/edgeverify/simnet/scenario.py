"""Scenario harness: wires actors, network and settlement into one run."""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import asdict, dataclass, field, fields, replace

from ..contract import (Contract, ContractError, CostModel, QosThresholds, Role, contract_hash,
                        is_honesty_dominant, payoff_matrix)
from ..crypto import KeyPair, digest, keypair_from_seed, sign
from ..engine.actors import (CONTRACTOR, OUTSOURCER, VERIFIER, Check, Outsourcer, PoolVerifier,
                             Tick, Worker)
from ..engine.functions import make_function
from ..engine.sampling import sample_schedule
from ..engine.strategies import (CheatRate, Colluder, Honest, PaymentRefuser, QAlgorithm,
                                 SlowResponder, SplitInput, is_honest, parse_strategy)
from ..randomization import (SelectionProof, contractor_commit, outsourcer_commit,
                             select_verifier, verify_selection)
from ..settlement import (AccusationRejected, CasePhase, ContestRejected, ContestSubmission,
                          Ledger, Party, RedemptionRejected)
from ..wire import (ContestResponse, SignedInput, decode, message_type, overhead_bytes,
                    type_overhead)
from .network import NetworkModel, Scheduler, TamperRule, inject_drop


class ScenarioError(ValueError):
    """A scenario violates a contract or harness invariant."""


class ConfigError(ValueError):
    """A scenario mapping is malformed or has unknown keys."""


@dataclass(frozen=True)
class Scenario:
    threat: str = "honest"
    seed: int = 0
    n_inputs: int = 20
    interval_size: int = 5
    function: dict = field(default_factory=lambda: {"kind": "iterated_hash", "iterations": 2})
    outsourcer: object = "honest"
    contractor: object = "honest"
    verifier: object = "honest"
    registered_verifiers: int = 6
    dishonest_pool: int = 0
    batching: bool = False
    reward: int = 10
    fee: int = 10
    bounty: int = 4
    deposit: int = 80
    contest_reward: int | None = None
    outsourcer_deposit: bool = True
    cost_honest: float = 4
    cost_dishonest: float = 1
    q: float = 0.5
    qos: QosThresholds = field(default_factory=QosThresholds)
    deadline: int = 100
    network: NetworkModel = field(default_factory=NetworkModel)
    input_period: int = 1
    check_every: int = 5
    selection: str = "committed"   # committed | bypass | wrong_verifier
    evade_penalty: bool = False
    outsourcer_spare: int | None = None
    similarity_threshold: float = 0.9
    max_time: int = 1_000_000

    def __post_init__(self):
        if self.n_inputs < 1:
            raise ScenarioError("n_inputs must be >= 1")
        if self.interval_size < 1:
            raise ScenarioError("interval_size must be >= 1")
        if self.registered_verifiers < 1:
            raise ScenarioError("at least one Verifier must be registered")
        pool = self.registered_verifiers - 1
        if self.dishonest_pool < 0 or self.dishonest_pool > pool:
            raise ScenarioError("dishonest_pool exceeds the contest pool")
        if self.selection not in ("committed", "bypass", "wrong_verifier"):
            raise ScenarioError(f"unknown selection mode {self.selection!r}")
        if self.deposit < self.fee:
            raise ScenarioError(f"deposit {self.deposit} is below the fee {self.fee}")
        if self.reward <= 0:
            raise ScenarioError("reward must be positive")


@dataclass
class ScenarioReport:
    threat: str
    seed: int
    outcome: str                   # detected | prevented | undetected | none | failed
    violation: bool
    mechanism: str | None
    convicted: str | None
    accusations: int
    accusations_rejected: list
    rejected_messages: list
    qos_events: list
    abort_reason: str | None
    messages: dict
    signed_input_overheads: list
    ledger_delta: dict
    claims_paid: dict
    false_outputs: dict
    detection_latency: list
    evasion_attempts: int
    evasions_blocked: int
    tampered: int
    tampered_rejected: int
    reviews: dict
    honesty_dominant: bool
    conserved: bool
    honest_fined: bool
    trace_digest: str
    end_time: int
    shortfalls: int = 0
    notes: list = field(default_factory=list)

    @property
    def detected(self) -> bool:
        return self.outcome in ("detected", "prevented")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = "scenario"
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


# -- helpers ----------------------------------------------------------------

def _keys(seed: int, label: str) -> KeyPair:
    return keypair_from_seed(digest(f"edgeverify:{seed}:{label}".encode()))


def _cid(seed: int, label: str) -> bytes:
    return digest(f"edgeverify:{seed}:contract:{label}".encode())


def _ledger_seed(seed: int) -> int:
    return int.from_bytes(digest(f"edgeverify:{seed}:ledger".encode())[:8], "big")


_FINES = ("fee", "bounty", "contest_reward")


class _Run:
    """Mutable state of one scenario execution."""

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.rng = random.Random(f"edgeverify:{sc.seed}:sim")
        self.fn = make_function(sc.function)
        self.o_strategy = parse_strategy(sc.outsourcer)
        self.c_strategy = parse_strategy(sc.contractor)
        self.v_strategy = parse_strategy(sc.verifier)
        self.notes: list[str] = []
        self.evasion_attempts = 0
        self.evasions_blocked = 0
        self.accusations_rejected: list[str] = []
        self.redemptions: dict[str, object] = {}

    # -- setup ----------------------------------------------------------

    def setup(self) -> None:
        sc = self.sc
        self.O = _keys(sc.seed, OUTSOURCER)
        self.C = _keys(sc.seed, CONTRACTOR)
        registered = [_keys(sc.seed, f"registered:{k}") for k in range(sc.registered_verifiers)]
        by_pk = {kp.public: kp for kp in registered}
        self.vlist = tuple(sorted(by_pk))
        self.ledger = Ledger(seed=_ledger_seed(sc.seed), contest_reward=sc.contest_reward,
                             outsourcer_deposit=sc.outsourcer_deposit)
        for pk in self.vlist:
            self.ledger.register_verifier(pk, True)

        self.c_contract = Contract(_cid(sc.seed, CONTRACTOR), self.O.public, self.C.public,
                                   Role.CONTRACTOR, sc.reward, sc.fee, sc.bounty, sc.deposit,
                                   self.fn.function_id, sc.qos, sc.deadline)
        self.proof, v_pk = self._select_verifier()
        self.V = by_pk[v_pk]
        self.v_contract = Contract(_cid(sc.seed, VERIFIER), self.O.public, self.V.public,
                                   Role.VERIFIER, sc.reward, sc.fee, sc.bounty, sc.deposit,
                                   self.fn.function_id, sc.qos, sc.deadline)

        pool = [pk for pk in self.vlist if pk != v_pk]
        dishonest = set(pool[:sc.dishonest_pool])
        self.pool = {pk: PoolVerifier(by_pk[pk], self.fn,
                                      CheatRate(1.0) if pk in dishonest else Honest())
                     for pk in pool}

        self.schedule = sample_schedule(random.Random(f"edgeverify:{sc.seed}:schedule"),
                                        sc.n_inputs, sc.interval_size)
        in_rng = random.Random(f"edgeverify:{sc.seed}:inputs")
        self.inputs = [self.fn.make_input(in_rng) for _ in range(sc.n_inputs)]

        sampled = self.schedule.intervals
        spare = sc.outsourcer_spare
        if spare is None:
            spare = sc.reward * (sc.n_inputs + sampled) + 1000
        self.funding = {
            self.O.public: 2 * sc.deposit + spare,
            self.C.public: sc.deposit + 100,
            self.V.public: sc.deposit + 100,
        }
        for pk, amount in self.funding.items():
            self.ledger.fund(pk, amount)
        for c in (self.c_contract, self.v_contract):
            self.ledger.open_contract(c, 0)

        labels = {OUTSOURCER: self.O.public, CONTRACTOR: self.C.public, VERIFIER: self.V.public}

        def partner(strategy):
            if isinstance(strategy, Colluder):
                if strategy.partner not in labels:
                    raise ScenarioError(f"unknown colluding partner {strategy.partner!r}")
                return labels[strategy.partner]
            return None

        self.outsourcer = Outsourcer(self.O, self.c_contract, self.v_contract, self.inputs,
                                     self.schedule, strategy=self.o_strategy,
                                     batching=sc.batching, selection_proof=self.proof)
        self.workers = {
            CONTRACTOR: Worker(CONTRACTOR, self.C, self.c_contract, self.fn, self.c_strategy,
                               random.Random(f"edgeverify:{sc.seed}:contractor"),
                               batching=sc.batching, partner_pk=partner(self.c_strategy)),
            VERIFIER: Worker(VERIFIER, self.V, self.v_contract, self.fn, self.v_strategy,
                             random.Random(f"edgeverify:{sc.seed}:verifier"),
                             partner_pk=partner(self.v_strategy)),
        }
        self.actors = {OUTSOURCER: self.outsourcer, **self.workers}

    def _select_verifier(self) -> tuple[SelectionProof, bytes]:
        sc = self.sc
        ch = contract_hash(self.c_contract)
        x, y = self.rng.randbytes(32), self.rng.randbytes(32)
        oc = outsourcer_commit(x, ch, self.O.secret)
        if sc.selection == "bypass":
            # Outsourcer skips the exchange and names a Verifier itself
            return SelectionProof(oc, None, x), self.vlist[self.rng.randrange(len(self.vlist))]
        cc = contractor_commit(oc, y, self.vlist, self.C.secret, self.O.public)
        index = verify_selection(oc, cc, x, self.vlist, sc.similarity_threshold,
                                 outsourcer_pk=self.O.public, contractor_pk=self.C.public)
        _, chosen = select_verifier(x, y, self.vlist)
        assert chosen == self.vlist[index]
        if sc.selection == "wrong_verifier" and len(self.vlist) > 1:
            return SelectionProof(oc, cc, x), self.vlist[(index + 1) % len(self.vlist)]
        return SelectionProof(oc, cc, x), chosen

    # -- execution --------------------------------------------------------

    def execute(self) -> None:
        sc = self.sc
        sched = Scheduler(sc.network, self.rng)
        self.sched = sched
        for i in range(sc.n_inputs):
            sched.push(i * sc.input_period, OUTSOURCER, Tick())
        sched.push(sc.check_every, OUTSOURCER, Check())
        trace = hashlib.sha256()
        self.messages: dict[str, dict] = {}
        self.si_overheads: list[int] = []
        self.tampered_delivered = 0
        self.tampered_rejected = 0
        now = 0
        while len(sched):
            ev = sched.pop()
            now = ev.time
            if now > sc.max_time:
                self.notes.append("max_time reached")
                break
            actor = self.actors[ev.target]
            before = len(actor.rejected)
            outs = actor.handle(ev.payload, now)
            if ev.tampered:
                self.tampered_delivered += 1
                if len(actor.rejected) > before:
                    self.tampered_rejected += 1
            trace.update(f"{now}|{ev.seq}|{ev.target}|{type(ev.payload).__name__}|".encode())
            for s in outs:
                self._account(s.data)
                trace.update(s.data)
                sched.transmit(now, ev.target, s.to, s.data, s.delay)
            if isinstance(ev.payload, Check) and not self.outsourcer.finished:
                sched.push(now + sc.check_every, OUTSOURCER, Check())
        self.end_time = now
        self.trace_digest = trace.hexdigest()

    def _account(self, data: bytes) -> None:
        cls = message_type(data)
        if cls is SignedInput:
            oh = overhead_bytes(decode(data))
            self.si_overheads.append(oh)
        else:
            # actors only emit well-formed messages, so the tag fixes the overhead
            oh = type_overhead(cls)
        st = self.messages.setdefault(cls.__name__, {"count": 0, "bytes": 0, "overhead": 0})
        st["count"] += 1
        st["bytes"] += len(data)
        st["overhead"] += oh

    # -- settlement -------------------------------------------------------

    def settle(self) -> None:
        sc = self.sc
        ledger = self.ledger
        t = self.end_time
        for c in (self.c_contract, self.v_contract):
            ledger.end_contract(c.contract_id, t)
        t += 1
        self.case = None
        for acc in self.outsourcer.accusations:
            try:
                self.case = ledger.accuse(acc, t)
            except AccusationRejected as exc:
                self.accusations_rejected.append(str(exc))
        for name, worker in self.workers.items():
            contract = self.c_contract if name == CONTRACTOR else self.v_contract
            if worker.promise is None:
                continue
            try:
                self.redemptions[name] = ledger.redeem(worker.promise, contract, t)
            except RedemptionRejected as exc:
                self.redemptions[name] = str(exc)
        if self.case is not None and self.case.phase is not CasePhase.CLOSED:
            self._contest(t + 1)
        ledger.advance(self.end_time + 20 * sc.deadline)
        if self.case is not None and self.case.convicted is not None and sc.evade_penalty:
            self._evade_after_conviction()
        self._review()
        ledger.advance(self.end_time + 40 * sc.deadline)
        if ledger.open_items():
            self.notes.append("settlement left open items")

    def _strategy_of(self, party: Party):
        return self.c_strategy if party is Party.CONTRACTOR else self.v_strategy

    def _contest(self, t: int) -> None:
        ledger, case = self.ledger, self.case
        acc = case.accusation
        for _ in range(4 * len(self.vlist) + 4):
            if case.phase is CasePhase.CLOSED:
                return
            accused = case.accused
            honest = is_honest(self._strategy_of(accused))
            if not honest and not self.sc.evade_penalty:
                return  # a convicted cheater gains nothing by contesting
            assigned = ledger.open_contestation(case.case_id, accused, t)
            if not assigned:
                return
            record = acc.contractor_input if accused is Party.CONTRACTOR else acc.verifier_input
            answers = tuple((pk, self.pool[pk].contest_answer(acc.contractor_input))
                            for pk in assigned)
            if not honest:
                self._evade_in_contest(case, accused, record, answers, t)
                return
            ledger.submit_contest(case.case_id, ContestSubmission(accused, record, answers), t)
            t += 1

    def _evade_in_contest(self, case, accused, record, answers, t) -> None:
        """A convicted cheater rewrites the record or forges pool answers."""
        worker_kp = self.C if accused is Party.CONTRACTOR else self.V
        truth_holder = self.workers[CONTRACTOR if accused is Party.CONTRACTOR else VERIFIER]
        claimed = truth_holder.answers.get(record.input_index, b"")
        altered = replace(record, payload=record.payload + b"\x00",
                          sig=sign(worker_kp.secret, record.preimage()))
        attempts = [ContestSubmission(accused, altered, answers)]
        forged = []
        for pk, resp in answers:
            fake = replace(resp, payload=claimed)
            forged.append((pk, fake.signed(worker_kp.secret)))
        attempts.append(ContestSubmission(accused, record, tuple(forged)))
        for sub in attempts:
            self.evasion_attempts += 1
            try:
                self.ledger.submit_contest(case.case_id, sub, t)
            except ContestRejected:
                self.evasions_blocked += 1

    def _evade_after_conviction(self) -> None:
        convicted = self.case.convicted
        if convicted is Party.OUTSOURCER:
            return
        name = CONTRACTOR if convicted is Party.CONTRACTOR else VERIFIER
        worker = self.workers[name]
        contract = self.c_contract if name == CONTRACTOR else self.v_contract
        if worker.promise is None:
            return
        self.evasion_attempts += 1
        try:
            self.ledger.redeem(worker.promise, contract, self.end_time + 20 * self.sc.deadline)
        except RedemptionRejected:
            self.evasions_blocked += 1

    def _review(self) -> None:
        o = self.outsourcer
        self.reviews = {}
        for name, contract in ((CONTRACTOR, self.c_contract), (VERIFIER, self.v_contract)):
            ch = contract_hash(contract)
            stats = o.qos.peers.get(name)
            bad = bool(stats and stats.blacklisted)
            score = 0.0 if bad else 1.0
            self.ledger.submit_review(self.O.public, contract.worker_pk, score, ch)
            self.reviews[f"outsourcer->{name}"] = score
            w = self.workers[name]
            w_bad = w.qos.peers.get(OUTSOURCER) is not None and w.qos[OUTSOURCER].blacklisted
            w_score = 0.0 if w_bad else 1.0
            self.ledger.submit_review(contract.worker_pk, self.O.public, w_score, ch)
            self.reviews[f"{name}->outsourcer"] = w_score

    # -- assessment -------------------------------------------------------

    def honest_parties(self) -> dict[str, bytes]:
        honest = {}
        o_honest = (isinstance(self.o_strategy, Honest) and self.sc.selection == "committed")
        if o_honest:
            honest[OUTSOURCER] = self.O.public
        if is_honest(self.c_strategy):
            honest[CONTRACTOR] = self.C.public
        if is_honest(self.v_strategy):
            honest[VERIFIER] = self.V.public
        for pk, pv in self.pool.items():
            if isinstance(pv.strategy, Honest):
                honest[f"pool:{pk.hex()[:8]}"] = pk
        return honest

    def report(self) -> ScenarioReport:
        sc, ledger = self.sc, self.ledger
        case = self.case
        convicted = case.convicted.value if case is not None and case.convicted else None
        mechanism = case.mechanism if case is not None and case.convicted else None
        honest = self.honest_parties()
        honest_pks = set(honest.values())
        fined = any(t.reason in _FINES and t.payer in honest_pks and t.amount
                    for t in ledger.transfers)
        role_pk = {OUTSOURCER: self.O.public, CONTRACTOR: self.C.public, VERIFIER: self.V.public}
        if convicted is not None and role_pk[convicted] in honest_pks:
            fined = True
        delta = {name: ledger.holdings(pk) - self.funding.get(pk, 0)
                 for name, pk in role_pk.items()}
        delta["pool"] = sum(ledger.holdings(pk) for pk in self.pool)
        paid = {}
        for t in ledger.transfers:
            if t.reason == "reward":
                name = CONTRACTOR if t.payee == self.C.public else VERIFIER
                paid[name] = paid.get(name, 0) + t.amount
        o = self.outsourcer
        qos_events = []
        for peer, stats in sorted(o.qos.peers.items()):
            qos_events += [[peer, when, kind.value] for when, kind in stats.violations]
        latency = [det - first for _, first, det in o.detections]
        cm = CostModel(sc.cost_honest, sc.cost_dishonest, sc.q)
        dominant = is_honesty_dominant(payoff_matrix(sc.reward, cm, sc.fee, sc.bounty))
        false_outputs = {name: len(w.false_indices) for name, w in self.workers.items()}
        rep = ScenarioReport(
            threat=sc.threat, seed=sc.seed, outcome="none", violation=False,
            mechanism=mechanism, convicted=convicted,
            accusations=len(o.accusations), accusations_rejected=self.accusations_rejected,
            rejected_messages=[[w, r] for w, r in _rejections(self.actors)],
            qos_events=qos_events, abort_reason=o.abort_reason, messages=self.messages,
            signed_input_overheads=sorted(set(self.si_overheads)), ledger_delta=delta,
            claims_paid=paid, false_outputs=false_outputs, detection_latency=latency,
            evasion_attempts=self.evasion_attempts, evasions_blocked=self.evasions_blocked,
            tampered=self.tampered_delivered, tampered_rejected=self.tampered_rejected,
            reviews=self.reviews, honesty_dominant=dominant,
            conserved=ledger.total() == ledger.funded, honest_fined=fined,
            trace_digest=self.trace_digest, end_time=self.end_time,
            shortfalls=len(ledger.shortfalls), notes=self.notes)
        rep.violation, rep.outcome = _assess(self, rep)
        return rep


def _rejections(actors):
    for name in sorted(actors):
        for item in actors[name].rejected:
            yield name, item[-1]


def _assess(run: _Run, rep: ScenarioReport) -> tuple[bool, str]:
    """Did the scripted violation happen, and was it caught?"""
    threat = run.sc.threat
    conv = rep.convicted
    if threat == "honest":
        clean = not rep.accusations and conv is None and not rep.qos_events
        return False, "none" if clean else "failed"
    if threat == "T1":
        cheated = rep.false_outputs[CONTRACTOR] > 0
        if conv == "contractor":
            return True, "detected"
        return cheated, "undetected" if cheated else "none"
    if threat == "T2":
        ok = conv == "verifier" and rep.mechanism == "contestation"
        return True, "detected" if ok else "failed"
    if threat == "T3":
        ok = conv == "outsourcer" and rep.mechanism == "signature_chain"
        return True, "detected" if ok else "failed"
    if threat == "T4":
        deviator = "contractor" if not is_honest(run.c_strategy) else "verifier"
        ok = (conv == deviator and rep.evasion_attempts > 0
              and rep.evasions_blocked == rep.evasion_attempts)
        return True, "detected" if ok else "failed"
    if threat == "T5":
        promised = {}
        for name, w in run.workers.items():
            p = w.promise
            if p is not None:
                ack = p.ack_count if isinstance(p, SignedInput) else p.final_ack
                promised[name] = ack * run.sc.reward
        paid_ok = all(rep.claims_paid.get(n, 0) == amt for n, amt in promised.items())
        ok = paid_ok and conv is None and bool(rep.accusations_rejected) and bool(promised)
        return True, "prevented" if ok else "failed"
    if threat == "T6":
        ok = conv in ("outsourcer", "verifier") and rep.mechanism in ("randomization",
                                                                      "contestation")
        return True, "detected" if ok else "failed"
    if threat == "T7":
        ok = sum(rep.false_outputs.values()) == 0 and rep.honesty_dominant and conv is None
        return True, "prevented" if ok else "failed"
    if threat == "T8":
        o = run.outsourcer
        stats = o.qos.peers.get(CONTRACTOR)
        ok = (stats is not None and stats.blacklisted
              and any(k != "bad_message" for _, _, k in rep.qos_events)
              and (o.abort_reason or "").startswith("qos:")
              and rep.reviews.get("outsourcer->contractor") == 0.0)
        return True, "detected" if ok else "failed"
    if threat == "T9":
        ok = rep.tampered > 0 and rep.tampered_rejected == rep.tampered
        return True, "detected" if ok else "failed"
    raise ScenarioError(f"unknown threat {threat!r}")


def run_scenario(scenario: Scenario) -> ScenarioReport:
    try:
        run = _Run(scenario)
        run.setup()
    except ContractError as exc:
        raise ScenarioError(str(exc)) from exc
    run.execute()
    run.settle()
    return run.report()


# -- threat presets -----------------------------------------------------------

@dataclass(frozen=True)
class ThreatSpec:
    threat_id: str
    description: str
    technique: str
    probabilistic: bool = False


THREATS = {
    "T1": ThreatSpec("T1", "Contractor returns false responses", "sampling-based re-execution",
                     True),
    "T2": ThreatSpec("T2", "Verifier returns false responses", "contestation"),
    "T3": ThreatSpec("T3", "Outsourcer splits inputs to refuse payment",
                     "signature chain, contestation"),
    "T4": ThreatSpec("T4", "Convicted worker tries to escape penalties", "digital signatures"),
    "T5": ThreatSpec("T5", "Participant refuses to pay", "deposit-backed settlement"),
    "T6": ThreatSpec("T6", "Outsourcer and Verifier collude against the Contractor",
                     "randomization, incentives, contestation"),
    "T7": ThreatSpec("T7", "Contractor and Verifier collude to save work",
                     "randomization, incentives", True),
    "T8": ThreatSpec("T8", "Timeout, low response rate or slow responses",
                     "blacklisting, reviews, contract abortion"),
    "T9": ThreatSpec("T9", "Message tampering in transit", "digital signatures"),
}


def threat_scenario(threat: str, seed: int = 0, **overrides) -> Scenario:
    """Scenario that scripts exactly the deviation named by ``threat``.

    Some threats cycle through variants keyed on ``seed``.
    """
    base = Scenario(threat=threat, seed=seed)
    cfg: dict = {}
    if threat == "honest":
        pass
    elif threat == "T1":
        cfg = {"contractor": CheatRate(0.1), "n_inputs": 44, "interval_size": 1}
    elif threat == "T2":
        cfg = {"verifier": QAlgorithm(0.0)}
    elif threat == "T3":
        cfg = {"outsourcer": SplitInput()}
    elif threat == "T4":
        cheater = {"contractor": CheatRate(1.0)} if seed % 2 == 0 else {"verifier": CheatRate(1.0)}
        cfg = {**cheater, "evade_penalty": True}
    elif threat == "T5":
        # no spare funds: every payment comes out of the locked deposit
        cfg = {"outsourcer": PaymentRefuser(), "outsourcer_spare": 0, "deposit": 400}
    elif threat == "T6":
        mode = ("bypass", "wrong_verifier", "committed")[seed % 3]
        cfg = {"verifier": Colluder("outsourcer"), "selection": mode}
    elif threat == "T7":
        cfg = {"contractor": Colluder("verifier"), "verifier": Colluder("contractor")}
    elif threat == "T8":
        if seed % 2 == 0:
            cfg = {"contractor": SlowResponder(3 * base.qos.max_response_time)}
        else:
            cfg = {"network": inject_drop(base.network, 0.5, (CONTRACTOR, OUTSOURCER))}
    elif threat == "T9":
        rng = random.Random(f"edgeverify:{seed}:tamper")
        cfg = {"network": replace(base.network, tamper=TamperRule(nth=rng.randrange(12)))}
    else:
        raise ScenarioError(f"unknown threat {threat!r}")
    cfg.update(overrides)
    return replace(base, **cfg)


# -- config -----------------------------------------------------------------

_SCENARIO_FIELDS = {f.name for f in fields(Scenario)}


def scenario_from_dict(d: dict) -> Scenario:
    """Build a scenario from its config mapping; unknown keys are an error."""
    d = dict(d)
    threat = d.pop("threat", "honest")
    try:
        seed = int(d.pop("seed", 0))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"seed must be an integer: {exc}") from exc
    if threat != "honest" and threat not in THREATS:
        raise ConfigError(f"unknown threat {threat!r}")
    return apply_overrides(threat, seed, d)


def parse_overrides(d: dict) -> dict:
    """Turn config values (mappings, strategy specs) into scenario field values.

    Values that are already typed pass through; ``network`` stays a mapping
    so it can be merged onto a threat preset's own network.
    """
    d = dict(d)
    unknown = set(d) - (_SCENARIO_FIELDS - {"threat", "seed"})
    if unknown:
        raise ConfigError(f"unknown scenario keys: {', '.join(sorted(unknown))}")
    q = d.get("qos")
    if isinstance(q, dict):
        unknown = set(q) - {"max_response_time", "min_response_rate", "timeout"}
        if unknown:
            raise ConfigError(f"unknown qos keys: {', '.join(sorted(unknown))}")
        try:
            d["qos"] = QosThresholds(**q)
        except ContractError as exc:
            raise ScenarioError(str(exc)) from exc
    for key in ("outsourcer", "contractor", "verifier"):
        if isinstance(d.get(key), (str, dict)):
            try:
                d[key] = parse_strategy(d[key])
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
    return d


def apply_overrides(threat: str, seed: int, overrides: dict) -> Scenario:
    d = parse_overrides(overrides)
    net = d.pop("network", None)
    try:
        sc = threat_scenario(threat, seed, **d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    if isinstance(net, dict):
        sc = replace(sc, network=merge_network(sc.network, net))
    elif net is not None:
        sc = replace(sc, network=net)
    return sc


def network_from_dict(d: dict) -> NetworkModel:
    return merge_network(NetworkModel(), d)


def merge_network(base: NetworkModel, d: dict) -> NetworkModel:
    """``base`` with the keys of ``d`` applied; unset keys keep the base values."""
    allowed = {"latency", "drop_rate", "tamper_nth"}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown network keys: {', '.join(sorted(unknown))}")
    changes = {}
    try:
        if "latency" in d:
            changes["latency"] = tuple(int(x) for x in d["latency"])
        if "drop_rate" in d:
            changes["drop_rate"] = float(d["drop_rate"])
        if "tamper_nth" in d:
            changes["tamper"] = TamperRule(nth=int(d["tamper_nth"]))
        return replace(base, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
