"""Hashing, Ed25519 signatures and binary Merkle trees.

Everything here is pure: no call touches global randomness or mutates
shared state (the expanded-key cache only memoises a deterministic
derivation).
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import nacl.bindings
import nacl.exceptions

DIGEST_SIZE = 32
KEY_SIZE = 32
SIG_SIZE = 64


class KeyFormatError(ValueError):
    """Key or signature material has the wrong length."""


def digest(data: bytes) -> bytes:
    """SHA-256 of ``data``."""
    return hashlib.sha256(data).digest()


@dataclass(frozen=True)
class KeyPair:
    secret: bytes = field(repr=False)
    public: bytes


@lru_cache(maxsize=8192)
def _expanded(seed: bytes) -> tuple[bytes, bytes]:
    """(public key, 64-byte libsodium secret key) for a 32-byte seed."""
    return nacl.bindings.crypto_sign_seed_keypair(seed)


def keypair_from_seed(seed: bytes) -> KeyPair:
    if len(seed) != KEY_SIZE:
        raise KeyFormatError(f"seed must be {KEY_SIZE} bytes, got {len(seed)}")
    seed = bytes(seed)
    return KeyPair(seed, _expanded(seed)[0])


def sign(secret: bytes, message: bytes) -> bytes:
    if len(secret) != KEY_SIZE:
        raise KeyFormatError(f"secret must be {KEY_SIZE} bytes, got {len(secret)}")
    return nacl.bindings.crypto_sign(message, _expanded(bytes(secret))[1])[:SIG_SIZE]


def verify(public: bytes, message: bytes, signature: bytes) -> bool:
    """True iff ``signature`` is valid for ``message`` under ``public``.

    Malformed key or signature lengths raise :class:`KeyFormatError`;
    a well-formed but wrong signature returns False.
    """
    if len(public) != KEY_SIZE:
        raise KeyFormatError(f"public key must be {KEY_SIZE} bytes, got {len(public)}")
    if len(signature) != SIG_SIZE:
        raise KeyFormatError(f"signature must be {SIG_SIZE} bytes, got {len(signature)}")
    return _check(bytes(public), bytes(message), bytes(signature))


@lru_cache(maxsize=4096)
def _check(public: bytes, message: bytes, signature: bytes) -> bool:
    # verification is a pure function, so repeats (a ledger re-checking evidence an
    # actor already checked) are served from the cache
    try:
        nacl.bindings.crypto_sign_open(signature + message, public)
    except (nacl.exceptions.BadSignatureError, nacl.exceptions.ValueError,
            nacl.exceptions.TypeError):
        # TypeError/ValueError cover public keys that are not curve points
        return False
    return True


# -- Merkle trees ----------------------------------------------------------

def response_leaf(input_index: int, payload: bytes) -> bytes:
    """Leaf digest committing a response to its input index."""
    return digest(struct.pack("<I", input_index) + payload)


@dataclass(frozen=True)
class MerkleTree:
    leaves: tuple[bytes, ...]
    levels: tuple[tuple[bytes, ...], ...]

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    def __len__(self) -> int:
        return len(self.leaves)


@dataclass(frozen=True)
class AuthPath:
    # (sibling digest, sibling_is_left) from leaf level upwards
    siblings: tuple[tuple[bytes, bool], ...]

    def __len__(self) -> int:
        return len(self.siblings)


def merkle_build(leaves) -> MerkleTree:
    leaves = tuple(bytes(x) for x in leaves)
    if not leaves:
        raise ValueError("a Merkle tree needs at least one leaf")
    for leaf in leaves:
        if len(leaf) != DIGEST_SIZE:
            raise ValueError("Merkle leaves must be 32-byte digests")
    levels = [leaves]
    level = leaves
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level), 2):
            left = level[i]
            right = level[i + 1] if i + 1 < len(level) else left
            nxt.append(digest(left + right))
        level = tuple(nxt)
        levels.append(level)
    return MerkleTree(leaves, tuple(levels))


def merkle_root(tree: MerkleTree) -> bytes:
    return tree.root


def merkle_prove(tree: MerkleTree, index: int) -> AuthPath:
    if not 0 <= index < len(tree.leaves):
        raise IndexError(f"leaf index {index} out of range for {len(tree.leaves)} leaves")
    path = []
    pos = index
    for level in tree.levels[:-1]:
        if pos % 2:
            path.append((level[pos - 1], True))
        else:
            sib = level[pos + 1] if pos + 1 < len(level) else level[pos]
            path.append((sib, False))
        pos //= 2
    return AuthPath(tuple(path))


def merkle_verify(root: bytes, leaf: bytes, index: int, path: AuthPath,
                  leaf_count: int | None = None) -> bool:
    """Check that ``leaf`` sits at ``index`` under ``root``.

    Side flags must agree with the bits of ``index``; when ``leaf_count``
    is known it also bounds the index and fixes the path length.
    """
    if index < 0 or index >= (1 << len(path.siblings)):
        return False
    if leaf_count is not None:
        if not 0 <= index < leaf_count:
            return False
        if len(path.siblings) != (leaf_count - 1).bit_length():
            return False
    node = leaf
    pos = index
    for sibling, is_left in path.siblings:
        if is_left != bool(pos & 1):
            return False
        node = digest(sibling + node) if is_left else digest(node + sibling)
        pos >>= 1
    return node == root
