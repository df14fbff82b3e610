"""Keyed function families built on SHAKE256 with one-octet domain tags.

Every family (one-way ``f``, collision-resistant ``g``, tree hash ``T``,
the seed expander and the MAC) is the same XOF, separated by a tag octet
and the family key. Outputs are the leading octets of the XOF stream.
"""

from __future__ import annotations

import hashlib
import hmac
import os
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, Iterator

from hashsig.errors import InvalidParameter, MalformedData, PurposeMismatch

FAMILY_KEY_BYTES = 32
PRNG_BLOCK_BYTES = 32
MAC_TAG_BYTES = 16


class Purpose(IntEnum):
    F = 0x01
    G = 0x02
    T = 0x03
    PRNG = 0x04
    MAC = 0x05


@dataclass(frozen=True)
class FamilyKey:
    data: bytes
    purpose: Purpose

    def __post_init__(self) -> None:
        if len(self.data) != FAMILY_KEY_BYTES:
            raise InvalidParameter(f"family key must be {FAMILY_KEY_BYTES} octets, got {len(self.data)}")
        object.__setattr__(self, "purpose", Purpose(self.purpose))

    @classmethod
    def generate(cls, purpose: Purpose, entropy: Callable[[int], bytes] = os.urandom) -> FamilyKey:
        return cls(entropy(FAMILY_KEY_BYTES), purpose)


@dataclass(frozen=True)
class FamilyKeys:
    """The (f, g, T) family indices that both ends of a link agree on."""

    f: FamilyKey
    g: FamilyKey
    t: FamilyKey

    MAGIC = b"FKS1"

    def __post_init__(self) -> None:
        for key, purpose in ((self.f, Purpose.F), (self.g, Purpose.G), (self.t, Purpose.T)):
            _check_purpose(key, purpose)

    @classmethod
    def generate(cls, entropy: Callable[[int], bytes] = os.urandom) -> FamilyKeys:
        return cls(
            FamilyKey.generate(Purpose.F, entropy),
            FamilyKey.generate(Purpose.G, entropy),
            FamilyKey.generate(Purpose.T, entropy),
        )

    @classmethod
    def derive(cls, label: bytes) -> FamilyKeys:
        """Deterministic public family keys from a label (for shared defaults)."""

        def one(purpose: Purpose) -> FamilyKey:
            data = hashlib.shake_256(b"hashsig-family" + bytes([purpose]) + label).digest(FAMILY_KEY_BYTES)
            return FamilyKey(data, purpose)

        return cls(one(Purpose.F), one(Purpose.G), one(Purpose.T))

    def to_bytes(self) -> bytes:
        return self.MAGIC + self.f.data + self.g.data + self.t.data

    @classmethod
    def from_bytes(cls, data: bytes) -> FamilyKeys:
        if len(data) != 4 + 3 * FAMILY_KEY_BYTES or data[:4] != cls.MAGIC:
            raise MalformedData("not a family key file")
        k = FAMILY_KEY_BYTES
        return cls(
            FamilyKey(data[4 : 4 + k], Purpose.F),
            FamilyKey(data[4 + k : 4 + 2 * k], Purpose.G),
            FamilyKey(data[4 + 2 * k :], Purpose.T),
        )


@dataclass(frozen=True)
class Seed:
    data: bytes

    def __post_init__(self) -> None:
        if not self.data:
            raise InvalidParameter("seed must not be empty")

    @property
    def bits(self) -> int:
        return 8 * len(self.data)

    @classmethod
    def generate(cls, bits: int = 256, entropy: Callable[[int], bytes] = os.urandom) -> Seed:
        _check_bit_length(bits, "seed bits")
        return cls(entropy(bits // 8))


@dataclass(frozen=True)
class DigestBits:
    """An l-bit digest; bit 0 is the most significant bit of octet 0."""

    data: bytes

    @property
    def length(self) -> int:
        return 8 * len(self.data)

    def bit(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (self.data[i >> 3] >> (7 - (i & 7))) & 1

    def __iter__(self) -> Iterator[int]:
        for octet in self.data:
            for shift in range(7, -1, -1):
                yield (octet >> shift) & 1

    def __len__(self) -> int:
        return self.length

    def to_int(self) -> int:
        return int.from_bytes(self.data, "big")

    @classmethod
    def from_int(cls, value: int, length: int) -> DigestBits:
        _check_bit_length(length, "digest length")
        return cls(value.to_bytes(length // 8, "big"))

    @classmethod
    def from_bits(cls, bits: list[int]) -> DigestBits:
        if len(bits) % 8:
            raise InvalidParameter("bit count must be a multiple of 8")
        value = 0
        for b in bits:
            value = (value << 1) | (b & 1)
        return cls.from_int(value, len(bits))


def _check_bit_length(bits: int, what: str) -> None:
    if bits <= 0 or bits % 8:
        raise InvalidParameter(f"{what} must be a positive multiple of 8, got {bits}")
    if bits >= 1 << 16:
        raise InvalidParameter(f"{what} too large: {bits}")


def _check_purpose(key: FamilyKey, purpose: Purpose) -> None:
    if not isinstance(key, FamilyKey) or key.purpose is not purpose:
        got = getattr(key, "purpose", type(key).__name__)
        raise PurposeMismatch(f"expected a {purpose.name} key, got {got!r}")


def _keyed(tag: Purpose, key: bytes, out_bits: int, data: bytes) -> bytes:
    h = hashlib.shake_256(bytes([tag]) + key + struct.pack(">H", out_bits))
    h.update(data)
    return h.digest(out_bits // 8)


def eval_f(key: FamilyKey, x: bytes, n: int) -> bytes:
    """One-way function f_k: {0,1}^n -> {0,1}^n."""
    _check_purpose(key, Purpose.F)
    _check_bit_length(n, "n")
    if len(x) != n // 8:
        raise InvalidParameter(f"f input must be {n // 8} octets, got {len(x)}")
    return _keyed(Purpose.F, key.data, n, x)


def eval_g(key: FamilyKey, message: bytes, ell: int) -> DigestBits:
    """Collision-resistant message digest g_k: {0,1}* -> {0,1}^l."""
    _check_purpose(key, Purpose.G)
    _check_bit_length(ell, "digest length")
    return DigestBits(_keyed(Purpose.G, key.data, ell, message))


def eval_t(key: FamilyKey, data: bytes, m: int) -> bytes:
    """Merkle node hash T_k: {0,1}* -> {0,1}^m."""
    _check_purpose(key, Purpose.T)
    _check_bit_length(m, "node hash length")
    return _keyed(Purpose.T, key.data, m, data)


def prng_block(seed: Seed, index: int) -> bytes:
    """Block ``index`` of the counter-mode expansion, computed on its own."""
    if not 0 <= index < 1 << 32:
        raise InvalidParameter(f"block index out of range: {index}")
    return hashlib.shake_256(bytes([Purpose.PRNG]) + seed.data + struct.pack(">I", index)).digest(PRNG_BLOCK_BYTES)


def prng_expand(seed: Seed, out_bits: int) -> bytes:
    if out_bits <= 0 or out_bits % 8:
        raise InvalidParameter(f"out_bits must be a positive multiple of 8, got {out_bits}")
    need = out_bits // 8
    blocks = -(-need // PRNG_BLOCK_BYTES)
    return b"".join(prng_block(seed, j) for j in range(blocks))[:need]


def prng_slice(seed: Seed, offset: int, length: int) -> bytes:
    """Octets ``[offset, offset + length)`` of the expansion, touching only the blocks needed."""
    if offset < 0 or length < 0:
        raise InvalidParameter("negative slice")
    if length == 0:
        return b""
    first = offset // PRNG_BLOCK_BYTES
    last = (offset + length - 1) // PRNG_BLOCK_BYTES
    chunk = b"".join(prng_block(seed, j) for j in range(first, last + 1))
    start = offset - first * PRNG_BLOCK_BYTES
    return chunk[start : start + length]


def mac_tag(key: FamilyKey, message: bytes) -> bytes:
    _check_purpose(key, Purpose.MAC)
    return hashlib.shake_256(bytes([Purpose.MAC]) + key.data + message).digest(MAC_TAG_BYTES)


def mac_verify(key: FamilyKey, message: bytes, tag: bytes) -> bool:
    return hmac.compare_digest(mac_tag(key, message), tag)
