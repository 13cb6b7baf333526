"""Acceptance gate: one PASS/FAIL line per criterion, each timed against its budget."""
import itertools
import math
import random
import time
from fractions import Fraction

import pytest

from edgeverify.contract import (CostModel, detection_probability, is_honesty_dominant,
                                 payoff_matrix, required_intervals)
from edgeverify.crypto import (AuthPath, digest, merkle_build, merkle_prove, merkle_verify)
from edgeverify.engine.sampling import sample_schedule
from edgeverify.engine.strategies import is_honest
from edgeverify.settlement import ContestTally, Party
from edgeverify.simnet import THREAT_IDS, detection_rate, run_scenario, run_threat_suite
from edgeverify.simnet.scenario import threat_scenario
from edgeverify.wire import SignedInput, overhead_bytes

import test_contest_exhaustive as contest

SUITE_SEEDS = 1000


def gate(capsys, number, name, ok, detail, elapsed, budget):
    ok = ok and elapsed < budget
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} "
              f"({detail}; {elapsed:.1f}s of {budget:g}s)")
    assert ok, detail


@pytest.fixture(scope="module")
def suite():
    reports = []
    t0 = time.perf_counter()
    rows = run_threat_suite(0, SUITE_SEEDS, on_report=reports.append)
    honest = [run_scenario(threat_scenario("honest", s)) for s in range(SUITE_SEEDS)]
    return rows, reports + honest, time.perf_counter() - t0


def test_criterion_1_input_overhead(capsys):
    t0 = time.perf_counter()
    seen = []
    for threat in ("honest",) + THREAT_IDS:
        for seed in range(3):
            seen += run_scenario(threat_scenario(threat, seed)).signed_input_overheads
    seen.append(overhead_bytes(SignedInput(bytes(32), 1, 2, 3, 4, b"x" * 4096)))
    ok = bool(seen) and set(seen) == {64 + 5 * 4}
    gate(capsys, 1, "SignedInput overhead is 84 bytes", ok,
         f"{len(seen)} inputs, sizes {sorted(set(seen))}", time.perf_counter() - t0, 1)


def test_criterion_2_sampling_math(capsys):
    t0 = time.perf_counter()
    p = detection_probability(0.1, 44)
    sched = sample_schedule(0, 8800, 200)
    verifier_work = len(sched.sampled_indices())
    ok = (abs(p - (1 - 0.9 ** 44)) <= 1e-4 and 0.9902 <= p <= 0.9904
          and required_intervals(0.1, 0.99) == 44
          and sched.intervals == 44 and verifier_work == 44
          and Fraction(verifier_work, 8800) == Fraction(5, 1000))
    gate(capsys, 2, "sampling math", ok,
         f"p={p:.6f}, intervals={required_intervals(0.1, 0.99)}, workload={verifier_work}/8800",
         time.perf_counter() - t0, 1)


def test_criterion_3_monte_carlo(capsys):
    t0 = time.perf_counter()
    rate, analytic = detection_rate(range(10_000), cheat_rate=0.1, intervals=44)
    ok = abs(rate - analytic) <= 0.01
    gate(capsys, 3, "Monte-Carlo agrees with analytic detection", ok,
         f"empirical {rate:.4f} vs analytic {analytic:.4f} over 10^4 runs",
         time.perf_counter() - t0, 120)


def test_criterion_4_threat_matrix(capsys, suite):
    rows, _, elapsed = suite
    by = {r.threat: r for r in rows}
    certain = [t for t in THREAT_IDS if t not in ("T1", "T7")]
    t1, t7 = by["T1"], by["T7"]
    sd = math.sqrt(t1.analytic * (1 - t1.analytic) / t1.runs)
    ok = (all(by[t].runs >= 1000 and by[t].rate == 1.0 for t in certain)
          and t1.analytic is not None and abs(t1.rate - t1.analytic) <= 5 * sd + 0.01
          and t7.rate == 1.0 and t7.honesty_dominant)
    detail = ", ".join(f"{t} {by[t].rate:.1%}" for t in THREAT_IDS)
    gate(capsys, 4, "threat matrix", ok,
         f"{detail}; T1 analytic {t1.analytic:.4f}; T7 dominant={t7.honesty_dominant}",
         elapsed, 600)


def test_criterion_5_contestation(capsys):
    t0 = time.perf_counter()
    branches = failures = 0
    for n in contest.POOLS:
        pool = tuple(bytes([k]) * 32 for k in range(n))
        for false, d, mode in contest._configs(n):
            for dishonest in itertools.combinations(pool, d):
                out = []
                contest._explore(ContestTally(Party.CONTRACTOR, pool), set(dishonest),
                                 false, mode, out)
                branches += len(out)
                failures += sum(p is not false for p in out)
            for false_contests in (True, False):
                for _, case in contest._scripts(n, false, d, mode, false_contests):
                    branches += 1
                    failures += case.convicted is not false
    gate(capsys, 5, "contestation convicts the false responder", failures == 0,
         f"{branches} branches over pools 3/5/7, {failures} wrong", time.perf_counter() - t0, 60)


def _oracle(r, c_h, c_d, q, f, b):
    """Expected payoffs of the row player by enumerating its own cheat outcomes.

    A dishonest row player runs the cheap algorithm, which goes unnoticed with
    probability q.  A dishonest column player has actually returned a wrong
    answer, so an honest row player always catches it; two dishonest players
    return the same cheap answer and agree.
    """
    def payoff(me_honest, other_honest):
        outcomes = [(Fraction(1), "honest")] if me_honest else [(q, "unnoticed"), (1 - q, "caught")]
        total = Fraction(0)
        for prob, event in outcomes:
            if me_honest:
                gain = r if other_honest else r + b    # bounty for exposing the other side
                cost = c_h
            elif not other_honest or event == "unnoticed":
                gain, cost = r, c_d
            else:
                gain, cost = -(f + b), c_d           # no reward, fine and bounty paid
            total += prob * (gain - cost)
        return total
    return (payoff(True, True), payoff(True, False), payoff(False, True), payoff(False, False))


def test_criterion_6_payoff_matrix(capsys):
    t0 = time.perf_counter()
    rng = random.Random(6)
    frac = lambda hi: Fraction(rng.randrange(0, hi * 8), rng.randrange(1, 9))
    bad = 0
    for _ in range(10_000):
        c_d = frac(20)
        c_h = c_d + frac(20)
        q = Fraction(rng.randrange(0, 101), 100)
        r, f, b = frac(50), frac(40), frac(40)
        m = payoff_matrix(r, CostModel(c_h, c_d, q), f, b)
        want = _oracle(r, c_h, c_d, q, f, b)
        bad += m.as_tuple() != want
        dominant = want[0] > want[2] and want[1] > want[3]
        bad += is_honesty_dominant(m) != dominant
    gate(capsys, 6, "payoff matrix vs expected-value oracle", bad == 0,
         f"10^4 rational cases, {bad} discrepancies", time.perf_counter() - t0, 10)


def test_criterion_7_merkle(capsys):
    t0 = time.perf_counter()
    rng = random.Random(7)
    problems = checks = 0
    for n in range(1, 65):
        leaves = [digest(rng.randbytes(8)) for _ in range(n)]
        tree = merkle_build(leaves)
        for i in range(n):
            path = merkle_prove(tree, i)
            problems += len(path) != math.ceil(math.log2(n))
            problems += not merkle_verify(tree.root, leaves[i], i, path, n)
            flat = b"".join(s for s, _ in path.siblings)
            blobs = [("leaf", leaves[i]), ("root", tree.root), ("path", flat)]
            for kind, blob in blobs:
                for pos in range(len(blob)):
                    mutated = bytearray(blob)
                    mutated[pos] ^= rng.randrange(1, 256)
                    mutated = bytes(mutated)
                    leaf, root, sibs = leaves[i], tree.root, flat
                    if kind == "leaf":
                        leaf = mutated
                    elif kind == "root":
                        root = mutated
                    else:
                        sibs = mutated
                    p = AuthPath(tuple((sibs[32 * k:32 * k + 32], side)
                                       for k, (_, side) in enumerate(path.siblings)))
                    checks += 1
                    problems += merkle_verify(root, leaf, i, p, n)
            for k in range(len(path)):  # flipping a side flag is a one-byte change on the wire
                sides = list(path.siblings)
                sides[k] = (sides[k][0], not sides[k][1])
                checks += 1
                problems += merkle_verify(tree.root, leaves[i], i, AuthPath(tuple(sides)), n)
    gate(capsys, 7, "Merkle proofs", problems == 0,
         f"n=1..64, {checks} mutations, {problems} problems", time.perf_counter() - t0, 10)


def test_criterion_8_conservation(capsys, suite):
    _, reports, elapsed = suite
    t0 = time.perf_counter()
    not_conserved = sum(not r.conserved for r in reports)
    fined = sum(r.honest_fined for r in reports)
    wrong = 0
    for r in reports:
        if r.convicted is not None:
            sc = threat_scenario(r.threat, r.seed)
            wrong += is_honest(getattr(sc, r.convicted))
    ok = not_conserved == 0 and fined == 0 and wrong == 0
    gate(capsys, 8, "ledger conservation, no honest party convicted or fined", ok,
         f"{len(reports)} runs, {not_conserved} unconserved, {fined} honest fined, "
         f"{wrong} honest convicted", elapsed + time.perf_counter() - t0, 600)
