"""Numeric hot loops, each with a numba and a pure-numpy implementation.

Set ``EDGEVERIFY_NUMBA=0`` to force the numpy path (also used when numba
is not importable).  Both paths are always importable so they can be
benchmarked and cross-checked against each other.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("EDGEVERIFY_NUMBA", "1") not in ("0", "false", "no")


# -- sampling detection Monte-Carlo ----------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S11, _S27, _S30, _S31 = np.uint64(11), np.uint64(27), np.uint64(30), np.uint64(31)
_INV53 = 1.0 / 9007199254740992.0


def _splitmix(state):
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    z = z ^ (z >> _S31)
    return state, (z >> _S11) * _INV53


def _detect_py(cheat_rate, intervals, interval_size, n_contracts, seed):
    # explicit loop over every input; compiled with numba when available
    state = np.uint64(seed) * _MIX1 + _GOLDEN
    out = np.zeros(n_contracts, np.bool_)
    for k in range(n_contracts):
        hit = False
        for _ in range(intervals):
            state, u = _splitmix(state)
            offset = int(u * interval_size)
            for t in range(interval_size):
                state, u = _splitmix(state)
                if t == offset and u < cheat_rate:
                    hit = True
        out[k] = hit
    return out


def detect_numpy(cheat_rate, intervals, interval_size, n_contracts, seed, chunk=1 << 16):
    """One secret sample per interval; True where a sampled input was a cheat."""
    rng = np.random.default_rng(seed)
    out = np.empty(n_contracts, np.bool_)
    per = max(1, chunk // max(1, intervals * interval_size))
    for start in range(0, n_contracts, per):
        m = min(per, n_contracts - start)
        cheats = rng.random((m, intervals, interval_size)) < cheat_rate
        offsets = rng.integers(0, interval_size, size=(m, intervals))
        sampled = np.take_along_axis(cheats, offsets[..., None], axis=2)[..., 0]
        out[start:start + m] = sampled.any(axis=1)
    return out


# -- 4-connected component bounding boxes ----------------------------------

def _boxes_py(grid):
    h, w = grid.shape
    seen = np.zeros((h, w), np.bool_)
    boxes = np.empty((h * w, 4), np.int64)
    stack = np.empty((h * w, 2), np.int64)
    nb = 0
    for r in range(h):
        for c in range(w):
            if grid[r, c] == 0 or seen[r, c]:
                continue
            r0, c0, r1, c1 = r, c, r, c
            top = 0
            stack[0, 0] = r
            stack[0, 1] = c
            top = 1
            seen[r, c] = True
            while top > 0:
                top -= 1
                y = stack[top, 0]
                x = stack[top, 1]
                r0 = min(r0, y)
                r1 = max(r1, y)
                c0 = min(c0, x)
                c1 = max(c1, x)
                for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    yy = y + dy
                    xx = x + dx
                    if 0 <= yy < h and 0 <= xx < w and grid[yy, xx] != 0 and not seen[yy, xx]:
                        seen[yy, xx] = True
                        stack[top, 0] = yy
                        stack[top, 1] = xx
                        top += 1
            boxes[nb, 0] = r0
            boxes[nb, 1] = c0
            boxes[nb, 2] = r1
            boxes[nb, 3] = c1
            nb += 1
    return boxes[:nb]


def boxes_numpy(grid):
    """Bounding boxes (r0, c0, r1, c1) by iterative min-label propagation."""
    grid = np.asarray(grid)
    h, w = grid.shape
    mask = grid != 0
    if not mask.any():
        return np.empty((0, 4), np.int64)
    big = h * w + 1
    labels = np.where(mask, np.arange(1, h * w + 1).reshape(h, w), big)
    while True:
        padded = np.pad(labels, 1, constant_values=big)
        neigh = np.minimum.reduce([
            padded[:-2, 1:-1], padded[2:, 1:-1], padded[1:-1, :-2], padded[1:-1, 2:],
        ])
        new = np.where(mask, np.minimum(labels, neigh), big)
        if np.array_equal(new, labels):
            break
        labels = new
    rows, cols = np.nonzero(mask)
    lab = labels[rows, cols]
    uniq, inv = np.unique(lab, return_inverse=True)
    k = len(uniq)
    r0 = np.full(k, h, np.int64)
    c0 = np.full(k, w, np.int64)
    r1 = np.full(k, -1, np.int64)
    c1 = np.full(k, -1, np.int64)
    np.minimum.at(r0, inv, rows)
    np.minimum.at(c0, inv, cols)
    np.maximum.at(r1, inv, rows)
    np.maximum.at(c1, inv, cols)
    return np.stack([r0, c0, r1, c1], axis=1)


def _sort_boxes(boxes):
    if len(boxes) == 0:
        return boxes
    order = np.lexsort((boxes[:, 3], boxes[:, 2], boxes[:, 1], boxes[:, 0]))
    return boxes[order]


if HAVE_NUMBA:
    _splitmix = njit(cache=True, inline="always")(_splitmix)
    _detect_nb = njit(cache=True)(_detect_py)
    _boxes_nb = njit(cache=True)(_boxes_py)

    def detect_numba(cheat_rate, intervals, interval_size, n_contracts, seed):
        return _detect_nb(float(cheat_rate), int(intervals), int(interval_size),
                          int(n_contracts), int(seed))

    def boxes_numba(grid):
        return _boxes_nb(np.ascontiguousarray(np.asarray(grid) != 0, dtype=np.uint8))
else:  # pragma: no cover
    detect_numba = None
    boxes_numba = None


def simulate_detection(cheat_rate, intervals, interval_size, n_contracts, seed=0):
    """Per-contract detection flags for a Contractor cheating iid at ``cheat_rate``."""
    if not 0 <= cheat_rate <= 1:
        raise ValueError("cheat_rate must be in [0, 1]")
    if interval_size < 1 or intervals < 0 or n_contracts < 0:
        raise ValueError("sizes must be non-negative and interval_size >= 1")
    if USE_NUMBA:
        return detect_numba(cheat_rate, intervals, interval_size, n_contracts, seed)
    return detect_numpy(cheat_rate, intervals, interval_size, n_contracts, seed)


def component_boxes(grid) -> np.ndarray:
    """Sorted bounding boxes of the 4-connected nonzero regions of ``grid``."""
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise ValueError("grid must be 2-D")
    boxes = boxes_numba(grid) if USE_NUMBA else boxes_numpy(grid)
    return _sort_boxes(boxes)


def detection_rate_mc(cheat_rate, intervals, interval_size=1, n_contracts=100_000, seed=0) -> float:
    """Fraction of simulated contracts in which a sampled input was a cheat."""
    flags = simulate_detection(cheat_rate, intervals, interval_size, n_contracts, seed)
    return float(flags.mean()) if len(flags) else 0.0
