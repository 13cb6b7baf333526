"""Exhaustive contestation: a single false responder always ends up convicted
while more than half of the contest pool answers honestly."""
import copy
import itertools

import pytest

from edgeverify.settlement import ContestSubmission, ContestTally, Party
from edgeverify.wire import ContestResponse
from edgeverify.crypto import digest

from ledger_world import FN, World

POOLS = (3, 5, 7)
FALSE_PARTIES = (Party.CONTRACTOR, Party.VERIFIER)
MODES = ("side", "third")  # dishonest pool members back the liar, or answer something else


def _configs(n):
    for false in FALSE_PARTIES:
        for d in range((n - 1) // 2 + 1):
            for mode in (MODES if d else MODES[:1]):
                yield false, d, mode


# -- pure tally model: every assignment, every dishonest subset ---------------

def _match(pk, dishonest, false, mode):
    if pk not in dishonest:
        return false.counterparty()
    return false if mode == "side" else None


def _explore(tally, dishonest, false, mode, out):
    """Collect the convicted party of every branch.

    The honest party always contests; the false party may give up at any point.
    """
    accused = tally.accused
    if accused is false:
        out.append(accused)  # branch: the liar stops contesting and the deadline convicts
    left = tally.remaining()
    if not left:
        out.append(tally.majority_loser())
        return
    for pick in itertools.combinations(left, min(2, len(left))):
        t = copy.deepcopy(tally)
        t.assign(lambda cands, k, pick=pick: list(pick))
        t.record([_match(pk, dishonest, false, mode) for pk in pick])
        if not t.remaining():
            out.append(t.majority_loser())
        else:
            _explore(t, dishonest, false, mode, out)


@pytest.mark.parametrize("n", POOLS)
def test_tally_model_exhaustive(n):
    pool = tuple(bytes([k]) * 32 for k in range(n))
    branches = 0
    for false, d, mode in _configs(n):
        for dishonest in itertools.combinations(pool, d):
            out = []
            _explore(ContestTally(Party.CONTRACTOR, pool), set(dishonest), false, mode, out)
            assert out and all(p is false for p in out), (n, false, d, mode, dishonest)
            branches += len(out)
    assert branches > 0


def test_tally_model_fails_with_dishonest_majority():
    """Sanity check on the oracle: a colluding majority can frame the honest party."""
    pool = tuple(bytes([k]) * 32 for k in range(3))
    out = []
    _explore(ContestTally(Party.CONTRACTOR, pool), set(pool[:2]), Party.VERIFIER, "side", out)
    assert Party.CONTRACTOR in out


# -- ledger level: real signatures, branches reduced to honest/dishonest classes --

class ScriptedChoice:
    """Stands in for the ledger RNG; picks follow a prepared list of class choices."""

    def __init__(self, script, dishonest):
        self.script = list(script)
        self.dishonest = dishonest
        self.options = []  # number of distinct class choices seen at each pick

    def sample(self, cands, k):
        honest = [c for c in cands if c not in self.dishonest]
        bad = [c for c in cands if c in self.dishonest]
        classes = sorted({j for j in range(k + 1) if j <= len(bad) and k - j <= len(honest)})
        self.options.append(len(classes))
        j = classes[self.script.pop(0) if self.script else 0]
        return bad[:j] + honest[:k - j]


def _answer(w, pk, record, false_payload, honest, mode):
    if honest:
        out = FN.evaluate(record.payload)
    else:
        out = false_payload if mode == "side" else b"third answer"
    resp = ContestResponse(record.contract_ref, record.input_index, record.sig,
                           digest(record.payload), out)
    return pk, resp.signed(w.by_pk[pk].secret)


def _run_ledger(n, false, d, mode, false_contests, script):
    w = World(pool=n, seed=n)
    dishonest = set(w.pool[:d])
    chooser = ScriptedChoice(script, dishonest)
    w.ledger.rng = chooser
    forged = FN.forge(b"input-7")
    a = w.accusation(c_out=forged if false is Party.CONTRACTOR else None,
                     v_out=forged if false is Party.VERIFIER else None)
    led = w.ledger
    total = led.total()
    case = led.accuse(a, 1)
    now = 1
    while case.convicted is None:
        now += 1
        if case.accused is false and not false_contests:
            led.advance(case.deadline + 1)
            break
        keys = led.open_contestation(case.case_id, case.accused, now)
        if not keys:
            break
        # answers are always formed over the Contractor's record; each side presents its own
        rec = a.contractor_input
        own = rec if case.accused is Party.CONTRACTOR else a.verifier_input
        responses = tuple(_answer(w, pk, rec, forged, pk not in dishonest, mode) for pk in keys)
        led.submit_contest(case.case_id, ContestSubmission(case.accused, own, responses), now)
    assert led.total() == total
    return case, chooser.options


def _scripts(n, false, d, mode, false_contests):
    """Depth-first enumeration of class choices, replaying from scratch per branch."""
    stack = [()]
    while stack:
        script = stack.pop()
        case, options = _run_ledger(n, false, d, mode, false_contests, script)
        yield script, case
        for depth in range(len(script), len(options)):
            if depth == len(script):
                for alt in range(1, options[depth]):
                    stack.append(script + (alt,))
                script = script + (0,)


@pytest.mark.parametrize("n", POOLS)
def test_ledger_exhaustive(n):
    branches = 0
    for false, d, mode in _configs(n):
        for false_contests in (True, False):
            for script, case in _scripts(n, false, d, mode, false_contests):
                assert case.convicted is false, (n, false, d, mode, false_contests, script)
                assert case.mechanism in ("sampling", "contestation")
                branches += 1
    assert branches >= 2 * len(list(_configs(n)))
