import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import ndimage

from edgeverify import kernels
from edgeverify.contract import detection_probability


def scipy_boxes(grid):
    labels, n = ndimage.label(grid != 0)  # default structure is 4-connectivity
    out = [(s[0].start, s[1].start, s[0].stop - 1, s[1].stop - 1)
           for s in ndimage.find_objects(labels)]
    return sorted(out)


@pytest.mark.parametrize("density", [0.0, 0.2, 0.45, 0.7, 1.0])
def test_boxes_match_scipy(density):
    rng = np.random.default_rng(int(density * 100))
    for _ in range(30):
        h, w = rng.integers(1, 30, size=2)
        grid = (rng.random((h, w)) < density).astype(np.uint8) * rng.integers(1, 256, (h, w))
        want = scipy_boxes(grid)
        assert [tuple(b) for b in kernels.component_boxes(grid).tolist()] == want
        np_boxes = kernels._sort_boxes(kernels.boxes_numpy(grid))
        assert [tuple(b) for b in np_boxes.tolist()] == want
        if kernels.HAVE_NUMBA:
            nb_boxes = kernels._sort_boxes(kernels.boxes_numba(grid))
            assert [tuple(b) for b in nb_boxes.tolist()] == want


def test_boxes_value_256_counts_as_object():
    grid = np.zeros((3, 3), np.int32)
    grid[1, 1] = 256
    assert kernels.component_boxes(grid).tolist() == [[1, 1, 1, 1]]


def test_boxes_reject_non_2d():
    with pytest.raises(ValueError):
        kernels.component_boxes(np.zeros(5))


@pytest.mark.parametrize("c,i,size", [(0.1, 44, 1), (0.05, 10, 20), (0.3, 3, 7), (0.0, 5, 2),
                                      (1.0, 2, 3)])
def test_numpy_detection_close_to_formula(c, i, size):
    flags = kernels.detect_numpy(c, i, size, 40_000, 1)
    p = detection_probability(c, i)
    sd = max((p * (1 - p) / 40_000) ** 0.5, 1e-9)
    assert abs(flags.mean() - p) <= 5 * sd + 1e-12


@pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")
@pytest.mark.parametrize("c,i,size", [(0.1, 44, 1), (0.05, 10, 20), (0.3, 3, 7)])
def test_numba_detection_agrees_with_numpy(c, i, size):
    a = kernels.detect_numba(c, i, size, 40_000, 2).mean()
    b = kernels.detect_numpy(c, i, size, 40_000, 2).mean()
    p = detection_probability(c, i)
    sd = (p * (1 - p) / 40_000) ** 0.5
    assert abs(a - p) <= 5 * sd and abs(b - p) <= 5 * sd
    assert abs(a - b) <= 7 * sd


def test_detection_deterministic():
    a = kernels.simulate_detection(0.2, 5, 4, 1000, seed=9)
    b = kernels.simulate_detection(0.2, 5, 4, 1000, seed=9)
    assert np.array_equal(a, b)
    assert kernels.detection_rate_mc(0.2, 5, 4, 0) == 0.0


def test_detection_argument_checks():
    with pytest.raises(ValueError):
        kernels.simulate_detection(1.5, 3, 1, 10)
    with pytest.raises(ValueError):
        kernels.simulate_detection(0.1, 3, 0, 10)


def test_env_flag_selects_numpy():
    code = "from edgeverify import kernels; print(kernels.USE_NUMBA)"
    env = dict(os.environ, EDGEVERIFY_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "False"
