import random
from collections import Counter

import pytest
from scipy.stats import chisquare

from edgeverify.crypto import keypair_from_seed
from edgeverify.randomization import (RejectReason, SelectionProof, SelectionRejected,
                                      check_selection_proof, contractor_commit, jaccard,
                                      outsourcer_commit, select_verifier, verify_selection)

CH = b"\x11" * 32
O = keypair_from_seed(b"\x01" * 32)
C = keypair_from_seed(b"\x02" * 32)
KEYS = tuple(sorted(keypair_from_seed(bytes([i]) * 32).public for i in range(10, 17)))


def _num(v: int) -> bytes:
    return v.to_bytes(32, "big")


def _exchange(x=_num(5), y=_num(3), keys=KEYS):
    oc = outsourcer_commit(x, CH, O.secret)
    cc = contractor_commit(oc, y, keys, C.secret, O.public)
    return oc, cc


def test_index_example():
    idx, key = select_verifier(_num(5), _num(3), KEYS[:4])
    assert idx == 0 and key == KEYS[0]


def test_honest_exchange_verifies():
    x = _num(5)
    oc, cc = _exchange(x)
    idx = verify_selection(oc, cc, x, KEYS, 0.9, outsourcer_pk=O.public, contractor_pk=C.public)
    assert idx == (5 + 3) % len(KEYS)


def test_selection_uniform():
    rng = random.Random(0)
    n = len(KEYS)
    counts = Counter(select_verifier(rng.randbytes(32), rng.randbytes(32), KEYS)[0]
                     for _ in range(100_000))
    assert chisquare([counts[i] for i in range(n)]).pvalue > 0.01


def test_one_party_randomness_suffices():
    """A fixed y from a cheating Contractor still yields a uniform index."""
    rng = random.Random(1)
    counts = Counter(select_verifier(rng.randbytes(32), _num(0), KEYS)[0] for _ in range(50_000))
    assert chisquare([counts[i] for i in range(len(KEYS))]).pvalue > 0.01


def _reason(fn):
    with pytest.raises(SelectionRejected) as exc:
        fn()
    return exc.value.reason


def test_rejections():
    x = _num(5)
    oc, cc = _exchange(x)
    kw = dict(outsourcer_pk=O.public, contractor_pk=C.public)
    assert _reason(lambda: verify_selection(oc, cc, _num(6), KEYS, 0.9, **kw)) \
        is RejectReason.HASH_MISMATCH
    assert _reason(lambda: verify_selection(oc, cc, x, KEYS, 0.9, outsourcer_pk=C.public,
                                            contractor_pk=C.public)) \
        is RejectReason.BAD_OUTSOURCER_SIG
    assert _reason(lambda: verify_selection(oc, cc, x, KEYS, 0.9, outsourcer_pk=O.public,
                                            contractor_pk=O.public)) \
        is RejectReason.BAD_CONTRACTOR_SIG
    assert _reason(lambda: verify_selection(oc, cc, x, KEYS[:2], 0.9, **kw)) \
        is RejectReason.LIST_DIVERGENCE
    other = outsourcer_commit(x, b"\x22" * 32, O.secret)
    assert _reason(lambda: verify_selection(other, cc, x, KEYS, 0.9, **kw)) \
        is RejectReason.CONTRACT_MISMATCH
    assert _reason(lambda: contractor_commit(oc, _num(3), KEYS[::-1], C.secret, O.public)) \
        is RejectReason.UNSORTED_LIST
    assert _reason(lambda: contractor_commit(oc, _num(3), (), C.secret, O.public)) \
        is RejectReason.EMPTY_LIST
    forged = outsourcer_commit(x, CH, C.secret)
    assert _reason(lambda: contractor_commit(forged, _num(3), KEYS, C.secret, O.public)) \
        is RejectReason.BAD_OUTSOURCER_SIG


def test_duplicate_keys_rejected():
    oc = outsourcer_commit(_num(1), CH, O.secret)
    assert _reason(lambda: contractor_commit(oc, _num(3), (KEYS[0], KEYS[0]), C.secret,
                                             O.public)) is RejectReason.UNSORTED_LIST


def test_jaccard():
    full = set(range(10))
    assert jaccard(full, set(range(7))) == pytest.approx(0.7)
    assert jaccard(set(), set()) == 1.0
    assert jaccard({1}, {2}) == 0.0
    # 30% of the registry missing falls below a 0.9 threshold
    assert jaccard(full, set(range(7))) < 0.9


def test_list_divergence_threshold():
    x = _num(5)
    oc, cc = _exchange(x)
    kw = dict(outsourcer_pk=O.public, contractor_pk=C.public)
    verify_selection(oc, cc, x, KEYS[:-1], 6 / 7, **kw)
    assert _reason(lambda: verify_selection(oc, cc, x, KEYS[:-1], 0.9, **kw)) \
        is RejectReason.LIST_DIVERGENCE


def test_selection_proof():
    x = _num(5)
    oc, cc = _exchange(x)
    chosen = KEYS[(5 + 3) % len(KEYS)]
    kw = dict(ch=CH, outsourcer_pk=O.public, contractor_pk=C.public)
    check_selection_proof(SelectionProof(oc, cc, x), chosen, **kw)
    wrong = next(k for k in KEYS if k != chosen)
    assert _reason(lambda: check_selection_proof(SelectionProof(oc, cc, x), wrong, **kw)) \
        is RejectReason.WRONG_VERIFIER
    assert _reason(lambda: check_selection_proof(SelectionProof(oc, None, x), chosen, **kw)) \
        is RejectReason.BAD_CONTRACTOR_SIG
    assert _reason(lambda: check_selection_proof(None, chosen, **kw)) \
        is RejectReason.BAD_CONTRACTOR_SIG
    assert _reason(lambda: check_selection_proof(SelectionProof(oc, cc, _num(4)), chosen, **kw)) \
        is RejectReason.HASH_MISMATCH


def test_input_lengths():
    with pytest.raises(ValueError):
        outsourcer_commit(b"x", CH, O.secret)
    oc = outsourcer_commit(_num(1), CH, O.secret)
    with pytest.raises(ValueError):
        contractor_commit(oc, b"y", KEYS, C.secret, O.public)
