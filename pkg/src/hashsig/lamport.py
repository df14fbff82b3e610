"""(n, l) Lamport one-time signatures.

The private key is 2*l strings ``x[i][j]`` of n bits; the public key is
``y[i][j] = f(x[i][j])``. A signature of a message with digest
``m = g(M)`` reveals ``x[i][m_i]`` for every digest bit.

Private keys are single-use objects. The used flag is set (and any
persistence callback has returned) before a single signature octet is
released, and key material is wiped as it stops being needed.
"""

from __future__ import annotations

import os
import struct
import threading
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from hashsig.errors import (
    EntropyUnavailable,
    InvalidParameter,
    KeyAlreadyUsed,
    MalformedData,
    ParamMismatch,
    StreamExhausted,
)
from hashsig.primitives import (
    DigestBits,
    FamilyKey,
    Purpose,
    Seed,
    _check_purpose,
    eval_f,
    eval_g,
    prng_expand,
    prng_slice,
)

PUBLIC_MAGIC = b"LPK1"
SIGNATURE_MAGIC = b"LSG1"
PRIVATE_MAGIC = b"LSK1"

MODE_RAW = 0x00
MODE_SEEDED = 0x01

_HEADER = struct.Struct(">4sHH")


@dataclass
class CallCounter:
    """Instrumentation hook: counts evaluations of f and T."""

    f: int = 0
    t_leaf: int = 0
    t_combine: int = 0


@dataclass(frozen=True)
class LamportParams:
    n: int
    ell: int

    def __post_init__(self) -> None:
        for name, value in (("n", self.n), ("ell", self.ell)):
            if not isinstance(value, int) or value < 8 or value % 8 or value >= 1 << 16:
                raise InvalidParameter(f"{name} must be a multiple of 8 in [8, 65535], got {value!r}")

    @property
    def string_bytes(self) -> int:
        return self.n // 8

    @property
    def key_bits(self) -> int:
        """Size of the private key, and of the public key payload: 2*n*l bits."""
        return 2 * self.n * self.ell

    @property
    def signature_bits(self) -> int:
        return self.n * self.ell


def string_offset(params: LamportParams, i: int, j: int) -> int:
    """Octet offset of x[i][j] in the seed expansion (i-major, j-minor)."""
    if not 0 <= i < params.ell or j not in (0, 1):
        raise IndexError((i, j))
    return (2 * i + j) * params.string_bytes


def derive_private_string(params: LamportParams, seed: Seed, i: int, j: int) -> bytes:
    """Recompute one private string from the seed without expanding the rest."""
    return prng_slice(seed, string_offset(params, i, j), params.string_bytes)


class LamportPrivateKey:
    def __init__(
        self,
        params: LamportParams,
        x: Sequence[Sequence[bytes]],
        *,
        seed: Optional[Seed] = None,
        used: bool = False,
    ) -> None:
        if len(x) != params.ell or any(len(pair) != 2 for pair in x):
            raise InvalidParameter("private key must hold exactly 2*l strings")
        if any(len(s) != params.string_bytes for pair in x for s in pair):
            raise InvalidParameter(f"private strings must be {params.string_bytes} octets")
        self.params = params
        self.seed = seed
        self._x = [[bytearray(pair[0]), bytearray(pair[1])] for pair in x]
        self._used = used
        self._lock = threading.Lock()
        if used:
            self.zeroize()

    @property
    def used(self) -> bool:
        return self._used

    def string(self, i: int, j: int) -> bytes:
        if self._used:
            raise KeyAlreadyUsed("private key material is no longer available")
        return bytes(self._x[i][j])

    def consume(self) -> list[list[bytearray]]:
        """Atomically flip the used flag and hand over the key material."""
        with self._lock:
            if self._used:
                raise KeyAlreadyUsed("one-time key has already signed")
            self._used = True
            return self._x

    def zeroize(self) -> None:
        for pair in self._x:
            for buf in pair:
                buf[:] = bytes(len(buf))

    def is_zeroized(self) -> bool:
        return all(not any(buf) for pair in self._x for buf in pair)

    def __repr__(self) -> str:
        return f"LamportPrivateKey(n={self.params.n}, ell={self.params.ell}, used={self._used})"


@dataclass(frozen=True)
class LamportPublicKey:
    params: LamportParams
    f_key: FamilyKey
    g_key: FamilyKey
    y: tuple[tuple[bytes, bytes], ...]

    def __post_init__(self) -> None:
        _check_purpose(self.f_key, Purpose.F)
        _check_purpose(self.g_key, Purpose.G)
        if len(self.y) != self.params.ell:
            raise InvalidParameter("public key must hold exactly 2*l hashes")

    @property
    def payload_bits(self) -> int:
        return 8 * sum(len(v) for pair in self.y for v in pair)

    def to_bytes(self) -> bytes:
        body = b"".join(v for pair in self.y for v in pair)
        return _HEADER.pack(PUBLIC_MAGIC, self.params.n, self.params.ell) + body

    @classmethod
    def from_bytes(cls, data: bytes, f_key: FamilyKey, g_key: FamilyKey) -> LamportPublicKey:
        params, body = _parse_header(data, PUBLIC_MAGIC)
        size = params.string_bytes
        if len(body) != 2 * params.ell * size:
            raise MalformedData("public key length does not match its header")
        y = tuple(
            (body[(2 * i) * size : (2 * i + 1) * size], body[(2 * i + 1) * size : (2 * i + 2) * size])
            for i in range(params.ell)
        )
        return cls(params, f_key, g_key, y)


def signature_header(params: LamportParams) -> bytes:
    """Prefix of an encoded signature; the l strings follow in order."""
    return _HEADER.pack(SIGNATURE_MAGIC, params.n, params.ell)


@dataclass(frozen=True)
class LamportSignature:
    params: LamportParams
    s: tuple[bytes, ...]

    def __post_init__(self) -> None:
        if len(self.s) != self.params.ell or any(len(v) != self.params.string_bytes for v in self.s):
            raise InvalidParameter("signature must hold exactly l strings of n bits")

    def to_bytes(self) -> bytes:
        return signature_header(self.params) + b"".join(self.s)

    @classmethod
    def from_bytes(cls, data: bytes) -> LamportSignature:
        params, body = _parse_header(data, SIGNATURE_MAGIC)
        size = params.string_bytes
        if len(body) != params.ell * size:
            raise MalformedData("signature length does not match its header")
        return cls(params, tuple(body[i * size : (i + 1) * size] for i in range(params.ell)))

    @staticmethod
    def encoded_length(params: LamportParams) -> int:
        return _HEADER.size + params.ell * params.string_bytes


def public_key_encoded_length(params: LamportParams) -> int:
    return _HEADER.size + 2 * params.ell * params.string_bytes


def _parse_header(data: bytes, magic: bytes) -> tuple[LamportParams, bytes]:
    if len(data) < _HEADER.size:
        raise MalformedData("truncated header")
    got, n, ell = _HEADER.unpack_from(data)
    if got != magic:
        raise MalformedData(f"bad magic {got!r}, expected {magic!r}")
    try:
        params = LamportParams(n, ell)
    except InvalidParameter as exc:
        raise MalformedData(str(exc)) from exc
    return params, bytes(data[_HEADER.size :])


def _split_strings(params: LamportParams, stream: bytes) -> list[list[bytes]]:
    size = params.string_bytes
    return [
        [stream[(2 * i) * size : (2 * i + 1) * size], stream[(2 * i + 1) * size : (2 * i + 2) * size]]
        for i in range(params.ell)
    ]


def derive_public_key(
    priv: LamportPrivateKey,
    f_key: FamilyKey,
    g_key: FamilyKey,
    counter: Optional[CallCounter] = None,
) -> LamportPublicKey:
    n = priv.params.n
    y = []
    for i in range(priv.params.ell):
        y.append((eval_f(f_key, priv.string(i, 0), n), eval_f(f_key, priv.string(i, 1), n)))
    if counter is not None:
        counter.f += 2 * priv.params.ell
    return LamportPublicKey(priv.params, f_key, g_key, tuple(y))


def keygen(
    params: LamportParams,
    f_key: FamilyKey,
    g_key: FamilyKey,
    entropy: Callable[[int], bytes] = os.urandom,
    counter: Optional[CallCounter] = None,
) -> tuple[LamportPrivateKey, LamportPublicKey]:
    want = params.key_bits // 8
    try:
        stream = entropy(want)
    except Exception as exc:
        raise EntropyUnavailable(f"entropy source failed: {exc}") from exc
    if not isinstance(stream, (bytes, bytearray)) or len(stream) != want:
        raise EntropyUnavailable(f"entropy source returned {len(stream) if stream else 0} of {want} octets")
    priv = LamportPrivateKey(params, _split_strings(params, bytes(stream)))
    return priv, derive_public_key(priv, f_key, g_key, counter)


def keygen_from_seed(
    params: LamportParams,
    f_key: FamilyKey,
    g_key: FamilyKey,
    seed: Seed,
    counter: Optional[CallCounter] = None,
) -> tuple[LamportPrivateKey, LamportPublicKey]:
    if seed.bits < params.n:
        raise InvalidParameter(f"seed has {seed.bits} bits, needs at least n={params.n}")
    stream = prng_expand(seed, params.key_bits)
    priv = LamportPrivateKey(params, _split_strings(params, stream), seed=seed)
    return priv, derive_public_key(priv, f_key, g_key, counter)


class StreamingSigner:
    """Emits one signature chunk at a time, wiping the unused half as it goes.

    Mirrors a smart card that cannot output the whole signature at once:
    once digest bit ``i`` is known, ``x[i][1 - m_i]`` is erased.
    """

    def __init__(self, material: list[list[bytearray]], params: LamportParams, digest: DigestBits) -> None:
        self.params = params
        self.digest = digest
        self.cursor = 0
        self._x = material
        self._erased = [[False, False] for _ in range(params.ell)]

    def next(self) -> bytes:
        if self.cursor >= self.params.ell:
            raise StreamExhausted("all l chunks have been emitted")
        i = self.cursor
        bit = self.digest.bit(i)
        chunk = bytes(self._x[i][bit])
        self._wipe(i, 1 - bit)
        self.cursor += 1
        if self.cursor == self.params.ell:
            for k in range(self.params.ell):
                self._wipe(k, 0)
                self._wipe(k, 1)
        return chunk

    def __iter__(self):
        while self.cursor < self.params.ell:
            yield self.next()

    def _wipe(self, i: int, j: int) -> None:
        buf = self._x[i][j]
        buf[:] = bytes(len(buf))
        self._erased[i][j] = True

    def is_erased(self, i: int, j: int) -> bool:
        return self._erased[i][j]

    def erased_positions(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.params.ell) for j in (0, 1) if self._erased[i][j]]


def streaming_sign_start(
    priv: LamportPrivateKey,
    digest: DigestBits,
    on_consume: Optional[Callable[[], None]] = None,
) -> StreamingSigner:
    if digest.length != priv.params.ell:
        raise ParamMismatch(f"digest has {digest.length} bits, key expects {priv.params.ell}")
    material = priv.consume()
    if on_consume is not None:
        try:
            on_consume()
        except BaseException:
            priv.zeroize()
            raise
    return StreamingSigner(material, priv.params, digest)


def streaming_sign_next(signer: StreamingSigner) -> bytes:
    return signer.next()


def sign_digest(
    priv: LamportPrivateKey,
    digest: DigestBits,
    on_consume: Optional[Callable[[], None]] = None,
) -> LamportSignature:
    signer = streaming_sign_start(priv, digest, on_consume)
    chunks = tuple(signer)
    return LamportSignature(priv.params, chunks)


def sign(
    priv: LamportPrivateKey,
    g_key: FamilyKey,
    message: bytes,
    on_consume: Optional[Callable[[], None]] = None,
) -> LamportSignature:
    """Sign ``message``; raises KeyAlreadyUsed on a second call.

    ``on_consume`` runs after the used flag is set and before any part of
    the signature exists outside the key object (write-ahead persistence).
    """
    if priv.used:
        raise KeyAlreadyUsed("one-time key has already signed")
    digest = eval_g(g_key, message, priv.params.ell)
    return sign_digest(priv, digest, on_consume)


def verify_digest(
    pub: LamportPublicKey,
    digest: DigestBits,
    sig: LamportSignature,
    counter: Optional[CallCounter] = None,
) -> bool:
    if sig.params != pub.params:
        raise ParamMismatch(f"signature params {sig.params} != key params {pub.params}")
    if digest.length != pub.params.ell:
        raise ParamMismatch("digest length does not match the key")
    n = pub.params.n
    for i, bit in enumerate(digest):
        if counter is not None:
            counter.f += 1
        if eval_f(pub.f_key, sig.s[i], n) != pub.y[i][bit]:
            return False
    return True


def verify(
    pub: LamportPublicKey,
    message: bytes,
    sig: LamportSignature,
    counter: Optional[CallCounter] = None,
) -> bool:
    if sig.params != pub.params:
        raise ParamMismatch(f"signature params {sig.params} != key params {pub.params}")
    return verify_digest(pub, eval_g(pub.g_key, message, pub.params.ell), sig, counter)


def encode_private_key(priv: LamportPrivateKey) -> bytes:
    """Serialize to the LSK1 format.

    Used keys keep their header but carry an all-zero payload.
    """
    header = _HEADER.pack(PRIVATE_MAGIC, priv.params.n, priv.params.ell)
    if priv.seed is not None:
        mode, payload = MODE_SEEDED, priv.seed.data
    else:
        mode, payload = MODE_RAW, b"".join(bytes(buf) for pair in priv._x for buf in pair)
    if priv.used:
        payload = bytes(len(payload))
    return header + bytes([0x01 if priv.used else 0x00, mode]) + payload


def decode_private_key(data: bytes) -> LamportPrivateKey:
    params, rest = _parse_header(data, PRIVATE_MAGIC)
    if len(rest) < 2:
        raise MalformedData("truncated private key")
    used_flag, mode, payload = rest[0], rest[1], rest[2:]
    if used_flag not in (0, 1):
        raise MalformedData(f"bad used flag {used_flag:#x}")
    used = used_flag == 1
    if mode == MODE_RAW:
        if len(payload) != params.key_bits // 8:
            raise MalformedData("raw private key payload has the wrong length")
        return LamportPrivateKey(params, _split_strings(params, payload), used=used)
    if mode == MODE_SEEDED:
        if len(payload) * 8 < params.n:
            raise MalformedData("seed shorter than n bits")
        seed = Seed(payload)
        stream = bytes(params.key_bits // 8) if used else prng_expand(seed, params.key_bits)
        return LamportPrivateKey(params, _split_strings(params, stream), seed=seed, used=used)
    raise MalformedData(f"unknown private key mode {mode:#x}")


def private_key_used_flag_offset() -> int:
    """Offset of the used-flag octet inside an LSK1 file."""
    return _HEADER.size
