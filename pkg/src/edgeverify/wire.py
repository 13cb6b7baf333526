"""Bit-exact message encodings and signature preimages.

Every message is laid out as::

    [tag:1][contract_ref:32][u32 fields][fixed byte fields][var fields][payload_len:4][payload][sig:64]

with all integers little-endian.  Unless a message overrides
``preimage()``, the signed bytes are the encoding minus the trailing
signature, so the tag byte doubles as a domain separator.  PROTOCOL.md
documents each layout.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import ClassVar

from .crypto import AuthPath, SIG_SIZE, digest, sign, verify

U32_MAX = 0xFFFFFFFF


class MalformedMessage(ValueError):
    def __init__(self, reason: str, offset: int):
        super().__init__(f"{reason} at byte offset {offset}")
        self.reason = reason
        self.offset = offset


# field kinds: u32, b32, b64, keys (u32 count + 32*count), path (u32 count + 33*count)
_FIXED = {"b32": 32, "b64": 64}
_WIDTH = {"u32": 4, **_FIXED}


class Message:
    TAG: ClassVar[int]
    LAYOUT: ClassVar[tuple[tuple[str, str], ...]]
    HAS_PAYLOAD: ClassVar[bool] = False
    SIGNED: ClassVar[bool] = True

    contract_ref: bytes

    def preimage(self) -> bytes:
        return _body(self)

    def signed(self, secret: bytes):
        """Copy of this message carrying a fresh signature."""
        return _replace_sig(self, sign(secret, self.preimage()))

    def verify(self, public: bytes) -> bool:
        return verify(public, self.preimage(), self.sig)


def _replace_sig(msg, sig):
    out = object.__new__(type(msg))
    out.__dict__.update(msg.__dict__)  # keeps the memoised body, which excludes sig
    out.__dict__["sig"] = sig
    return out


def _u32(value: int, name: str) -> bytes:
    if not 0 <= value <= U32_MAX:
        raise ValueError(f"{name}={value} does not fit in 32 bits")
    return struct.pack("<I", value)


_STRUCT_CODE = {"u32": "I", "b32": "32s", "b64": "64s"}


def _plan(cls):
    """Per-class codec plan: a struct for the fixed-width prefix plus at most one var field."""
    plan = cls.__dict__.get("_PLAN")
    if plan is None:
        fixed, var = [], None
        for name, kind in cls.LAYOUT:
            if kind in _STRUCT_CODE:
                if var is not None:
                    raise TypeError(f"{cls.__name__}: fixed field after a variable one")
                fixed.append((name, kind))
            else:
                var = (name, kind)
        fmt = struct.Struct("<B32s" + "".join(_STRUCT_CODE[k] for _, k in fixed))
        plan = (fmt, tuple(fixed), var)
        cls._PLAN = plan
    return plan


def _check_fields(msg, fixed) -> None:
    # slow path, only reached when packing failed; names the offending field
    if len(msg.contract_ref) != 32:
        raise ValueError("contract_ref must be 32 bytes")
    for name, kind in fixed:
        value = getattr(msg, name)
        if kind == "u32":
            _u32(value, name)
        elif len(value) != _FIXED[kind]:
            raise ValueError(f"{name} must be {_FIXED[kind]} bytes")


def _encode_body(msg: Message) -> bytes:
    fmt, fixed, var = _plan(type(msg))
    values = [getattr(msg, name) for name, _ in fixed]
    for (name, kind), value in zip(fixed, values):
        if kind != "u32" and len(value) != _FIXED[kind]:
            raise ValueError(f"{name} must be {_FIXED[kind]} bytes")
    if len(msg.contract_ref) != 32:
        raise ValueError("contract_ref must be 32 bytes")
    try:
        head = fmt.pack(msg.TAG, msg.contract_ref, *values)
    except struct.error:
        _check_fields(msg, fixed)
        raise
    parts = [head]
    if var is not None:
        name, kind = var
        value = getattr(msg, name)
        if kind == "keys":
            parts.append(_u32(len(value), name))
            parts.extend(value)
        else:
            parts.append(_u32(len(value.siblings), name))
            for sib, is_left in value.siblings:
                parts.append(sib + (b"\x01" if is_left else b"\x00"))
    if msg.HAS_PAYLOAD:
        parts.append(_u32(len(msg.payload), "payload_len"))
        parts.append(msg.payload)
    return b"".join(parts)


def _body(msg) -> bytes:
    # encoding is canonical and messages are frozen, so the body bytes can be memoised
    body = msg.__dict__.get("_body")
    if body is None:
        body = _encode_body(msg)
        object.__setattr__(msg, "_body", body)
    return body


def encode(msg: Message) -> bytes:
    body = _body(msg)
    if msg.SIGNED:
        if len(msg.sig) != SIG_SIZE:
            raise ValueError("signature must be 64 bytes")
        return body + msg.sig
    return body


def decode(buf: bytes) -> Message:
    if not buf:
        raise MalformedMessage("empty buffer", 0)
    cls = _REGISTRY.get(buf[0])
    if cls is None:
        raise MalformedMessage(f"unknown tag 0x{buf[0]:02x}", 0)
    fmt, fixed, var = _plan(cls)
    if len(buf) < fmt.size:
        # walk the prefix to report which field is cut short
        pos = 1
        for name, width in [("contract_ref", 32)] + [(n, _WIDTH[k]) for n, k in fixed]:
            if pos + width > len(buf):
                raise MalformedMessage(f"truncated {name}", pos)
            pos += width
    _, *head = fmt.unpack_from(buf)
    kwargs = {"contract_ref": head[0]}
    for (name, _), value in zip(fixed, head[1:]):
        kwargs[name] = value
    pos = fmt.size

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(buf):
            raise MalformedMessage(f"truncated {what}", pos)
        chunk = buf[pos:pos + n]
        pos += n
        return chunk

    if var is not None:
        name, kind = var
        count = struct.unpack("<I", take(4, name))[0]
        if kind == "keys":
            kwargs[name] = tuple(take(32, name) for _ in range(count))
        else:
            sibs = []
            for _ in range(count):
                sib = take(32, name)
                side_at = pos
                side = take(1, name)[0]
                if side > 1:
                    raise MalformedMessage("invalid path side flag", side_at)
                sibs.append((sib, bool(side)))
            kwargs[name] = AuthPath(tuple(sibs))
    if cls.HAS_PAYLOAD:
        n = struct.unpack("<I", take(4, "payload_len"))[0]
        kwargs["payload"] = take(n, "payload")
    if cls.SIGNED:
        kwargs["sig"] = take(SIG_SIZE, "signature")
    if pos != len(buf):
        raise MalformedMessage("trailing bytes", pos)
    msg = cls(**kwargs)
    object.__setattr__(msg, "_body", bytes(buf[:pos - SIG_SIZE] if cls.SIGNED else buf))
    return msg


# -- message types ---------------------------------------------------------

@dataclass(frozen=True)
class SignedInput(Message):
    TAG: ClassVar[int] = 0x01
    LAYOUT: ClassVar = (("input_index", "u32"), ("ack_count", "u32"),
                        ("interval_id", "u32"), ("flags", "u32"))
    HAS_PAYLOAD: ClassVar[bool] = True

    contract_ref: bytes
    input_index: int
    ack_count: int
    interval_id: int
    flags: int
    payload: bytes
    sig: bytes = b"\x00" * SIG_SIZE


@dataclass(frozen=True)
class SignedResponse(Message):
    TAG: ClassVar[int] = 0x02
    LAYOUT: ClassVar = (("input_index", "u32"), ("input_sig", "b64"))
    HAS_PAYLOAD: ClassVar[bool] = True

    contract_ref: bytes
    input_index: int
    input_sig: bytes
    payload: bytes
    sig: bytes = b"\x00" * SIG_SIZE


@dataclass(frozen=True)
class RootCommitment(Message):
    TAG: ClassVar[int] = 0x03
    LAYOUT: ClassVar = (("batch_id", "u32"), ("first_index", "u32"),
                        ("leaf_count", "u32"), ("root", "b32"))

    contract_ref: bytes
    batch_id: int
    first_index: int
    leaf_count: int
    root: bytes
    sig: bytes = b"\x00" * SIG_SIZE


@dataclass(frozen=True)
class MembershipChallenge(Message):
    TAG: ClassVar[int] = 0x04
    LAYOUT: ClassVar = (("batch_id", "u32"), ("challenged_index", "u32"))

    contract_ref: bytes
    batch_id: int
    challenged_index: int
    sig: bytes = b"\x00" * SIG_SIZE


@dataclass(frozen=True)
class MembershipProof(Message):
    """Challenged leaf opening; the signature also binds the input signature
    of the challenged index so batched evidence is tied to a raw input."""

    TAG: ClassVar[int] = 0x05
    LAYOUT: ClassVar = (("batch_id", "u32"), ("challenged_index", "u32"),
                        ("challenge_sig", "b64"), ("input_sig", "b64"),
                        ("path", "path"))
    HAS_PAYLOAD: ClassVar[bool] = True

    contract_ref: bytes
    batch_id: int
    challenged_index: int
    challenge_sig: bytes
    input_sig: bytes
    path: AuthPath
    payload: bytes
    sig: bytes = b"\x00" * SIG_SIZE

    def preimage(self) -> bytes:
        # the path is checked against the signed root, so it stays unsigned
        return b"".join([
            bytes([self.TAG]), self.contract_ref,
            _u32(self.batch_id, "batch_id"),
            _u32(self.challenged_index, "challenged_index"),
            self.challenge_sig, self.input_sig,
            _u32(len(self.payload), "payload_len"), self.payload,
        ])


@dataclass(frozen=True)
class Termination(Message):
    TAG: ClassVar[int] = 0x06
    LAYOUT: ClassVar = (("final_ack", "u32"),)

    contract_ref: bytes
    final_ack: int
    sig: bytes = b"\x00" * SIG_SIZE


@dataclass(frozen=True)
class ContestResponse(Message):
    """Fresh Verifier answer during contestation, bound to the original input."""

    TAG: ClassVar[int] = 0x07
    LAYOUT: ClassVar = (("input_index", "u32"), ("input_sig", "b64"),
                        ("input_hash", "b32"))
    HAS_PAYLOAD: ClassVar[bool] = True

    contract_ref: bytes
    input_index: int
    input_sig: bytes
    input_hash: bytes
    payload: bytes
    sig: bytes = b"\x00" * SIG_SIZE


@dataclass(frozen=True)
class ResponseData(Message):
    """Unsigned response sent while Merkle batching is enabled."""

    TAG: ClassVar[int] = 0x08
    LAYOUT: ClassVar = (("input_index", "u32"),)
    HAS_PAYLOAD: ClassVar[bool] = True
    SIGNED: ClassVar[bool] = False

    contract_ref: bytes
    input_index: int
    payload: bytes


@dataclass(frozen=True)
class OutsourcerCommit(Message):
    TAG: ClassVar[int] = 0x10
    LAYOUT: ClassVar = (("x_hash", "b32"),)

    contract_ref: bytes
    x_hash: bytes
    sig: bytes = b"\x00" * SIG_SIZE

    def preimage(self) -> bytes:
        return bytes([self.TAG]) + self.x_hash + self.contract_ref


@dataclass(frozen=True)
class ContractorCommit(Message):
    TAG: ClassVar[int] = 0x11
    LAYOUT: ClassVar = (("x_hash", "b32"), ("y", "b32"), ("verifier_list", "keys"))

    contract_ref: bytes
    x_hash: bytes
    y: bytes
    verifier_list: tuple[bytes, ...]
    sig: bytes = b"\x00" * SIG_SIZE

    def m_bytes(self) -> bytes:
        return encode_selection_m(self.y, self.verifier_list)

    def preimage(self) -> bytes:
        return bytes([self.TAG]) + self.x_hash + self.contract_ref + digest(self.m_bytes())


_REGISTRY = {cls.TAG: cls for cls in (
    SignedInput, SignedResponse, RootCommitment, MembershipChallenge,
    MembershipProof, Termination, ContestResponse, ResponseData,
    OutsourcerCommit, ContractorCommit)}


def encode_selection_m(y: bytes, verifier_list) -> bytes:
    """Canonical ``[y:32][count:4][keys:32 each]`` encoding of the Contractor's reveal."""
    return y + struct.pack("<I", len(verifier_list)) + b"".join(verifier_list)


def input_sig_preimage(ch, input_index, ack_count, interval_id, flags, payload) -> bytes:
    return SignedInput(ch, input_index, ack_count, interval_id, flags, payload).preimage()


def response_sig_preimage(ch, input_index, input_sig, payload) -> bytes:
    return SignedResponse(ch, input_index, input_sig, payload).preimage()


# -- byte accounting -------------------------------------------------------

def _int_count(cls) -> int:
    n = sum(1 for _, kind in cls.LAYOUT if kind in ("u32", "keys", "path"))
    return n + (1 if cls.HAS_PAYLOAD else 0)


@lru_cache(maxsize=None)
def type_overhead(cls) -> int:
    """Overhead of any message of type ``cls``; it depends on the layout only."""
    return (SIG_SIZE if cls.SIGNED else 0) + 4 * _int_count(cls)


def message_type(data: bytes):
    """Message class named by the tag byte of an encoded message, or None."""
    return _REGISTRY.get(data[0]) if data else None


def overhead_bytes(msg: Message) -> int:
    """Own signature plus 32-bit integer fields.

    Digests, echoed counterparty signatures and payloads are excluded;
    see :func:`reference_bytes` and :func:`wire_size` for those.
    """
    return type_overhead(type(msg))


def wire_size(msg: Message) -> int:
    return len(encode(msg))


def payload_size(msg: Message) -> int:
    return len(msg.payload) if msg.HAS_PAYLOAD else 0


def reference_bytes(msg: Message) -> int:
    """Everything on the wire that is neither overhead nor payload."""
    return wire_size(msg) - overhead_bytes(msg) - payload_size(msg)


def fixed_header_size(cls) -> int:
    """Non-payload size of a message type without variable-length fields."""
    size = 1 + 32
    for _, kind in cls.LAYOUT:
        if kind == "u32":
            size += 4
        elif kind in _FIXED:
            size += _FIXED[kind]
        else:
            raise ValueError(f"{cls.__name__} has variable-length fields")
    if cls.HAS_PAYLOAD:
        size += 4
    if cls.SIGNED:
        size += SIG_SIZE
    return size


MESSAGE_TYPES = tuple(_REGISTRY.values())
