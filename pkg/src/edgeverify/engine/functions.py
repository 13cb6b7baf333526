"""Deterministic reference workloads.

Each function comes with an input generator and a cheap answer (what a
resource-saving worker would return without computing anything).
"""
from __future__ import annotations

import random
import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..crypto import digest
from ..kernels import component_boxes


@dataclass(frozen=True)
class ComputeFunction:
    function_id: str
    evaluate: Callable[[bytes], bytes]
    cost_units: int
    cheap_answer: Callable[[bytes], bytes]
    make_input: Callable[[random.Random], bytes]

    def forge(self, payload: bytes) -> bytes:
        """A made-up answer; never equal to a real output of the reference functions."""
        return b"\xde\xad" + digest(b"forged" + payload)[:6]


def identity(size: int = 16) -> ComputeFunction:
    return ComputeFunction("identity", lambda x: x, 1, lambda x: b"",
                           lambda rng: rng.randbytes(size))


def iterated_hash(iterations: int = 4, size: int = 32) -> ComputeFunction:
    if iterations < 1:
        raise ValueError("iterations must be >= 1")

    def evaluate(x: bytes) -> bytes:
        for _ in range(iterations):
            x = digest(x)
        return x

    return ComputeFunction(f"iterated_hash:{iterations}", evaluate, iterations,
                           lambda x: bytes(32), lambda rng: rng.randbytes(size))


# -- toy object detector ---------------------------------------------------

def encode_grid(grid) -> bytes:
    grid = np.asarray(grid, dtype=np.uint8)
    h, w = grid.shape
    return struct.pack("<BB", h, w) + grid.tobytes()


def decode_grid(payload: bytes) -> np.ndarray:
    if len(payload) < 2:
        raise ValueError("grid payload too short")
    h, w = payload[0], payload[1]
    if len(payload) != 2 + h * w:
        raise ValueError("grid payload has the wrong size")
    return np.frombuffer(payload, dtype=np.uint8, offset=2).reshape(h, w)


def encode_boxes(boxes) -> bytes:
    out = [struct.pack("<H", len(boxes))]
    for r0, c0, r1, c1 in boxes:
        out.append(struct.pack("<BBBB", r0, c0, r1, c1))
    return b"".join(out)


def decode_boxes(payload: bytes) -> list[tuple[int, int, int, int]]:
    (n,) = struct.unpack_from("<H", payload)
    if len(payload) != 2 + 4 * n:
        raise ValueError("box payload has the wrong size")
    return [struct.unpack_from("<BBBB", payload, 2 + 4 * i) for i in range(n)]


def grid_detector(height: int = 12, width: int = 12, object_rate: float = 0.5,
                  max_objects: int = 3) -> ComputeFunction:
    """Bounding boxes of 4-connected nonzero blobs in a small byte grid.

    With probability ``1 - object_rate`` a generated grid is empty, so the
    "no object found" cheap answer is right exactly that often.
    """
    if not 0 <= object_rate <= 1:
        raise ValueError("object_rate must be in [0, 1]")

    def evaluate(x: bytes) -> bytes:
        return encode_boxes(component_boxes(decode_grid(x)).tolist())

    def make_input(rng: random.Random) -> bytes:
        grid = np.zeros((height, width), np.uint8)
        if rng.random() < object_rate:
            for _ in range(rng.randint(1, max_objects)):
                r0, c0 = rng.randrange(height), rng.randrange(width)
                r1 = min(height - 1, r0 + rng.randrange(3))
                c1 = min(width - 1, c0 + rng.randrange(3))
                grid[r0:r1 + 1, c0:c1 + 1] = rng.randint(1, 255)
        return encode_grid(grid)

    return ComputeFunction(f"grid_detector:{height}x{width}", evaluate, height * width,
                           lambda x: encode_boxes([]), make_input)


def make_function(spec: dict | str) -> ComputeFunction:
    """Build a function from its config form, e.g. ``{"kind": "iterated_hash", "iterations": 8}``."""
    if isinstance(spec, str):
        spec = {"kind": spec}
    spec = dict(spec)
    kind = spec.pop("kind")
    factories = {"identity": identity, "iterated_hash": iterated_hash,
                 "grid_detector": grid_detector}
    if kind not in factories:
        raise ValueError(f"unknown function kind {kind!r}")
    return factories[kind](**spec)
