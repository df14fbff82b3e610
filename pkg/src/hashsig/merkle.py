"""Depth-H Merkle trees over 2^H seeded Lamport key pairs.

Nodes live in a heap-ordered array: index 0 is the root, the children of
node ``k`` are ``2k + 1`` and ``2k + 2``, and leaf ``i`` sits at
``2^H - 1 + i``. A leaf value is ``T(serialized OTS public key)``; an inner
node is ``T(left || right)``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable, Optional

from hashsig import lamport
from hashsig.errors import InvalidParameter, MalformedData, ParamMismatch, TreeExhausted
from hashsig.lamport import CallCounter, LamportParams, LamportPublicKey, LamportSignature
from hashsig.primitives import FamilyKeys, Seed, eval_t, prng_expand

SIGNATURE_MAGIC = b"MSG1"
ROOT_MAGIC = b"MRT1"
STATE_MAGIC = b"MSK1"

MAX_HEIGHT = 20

_SIG_HEADER = struct.Struct(">4sBHI")
_ROOT_HEADER = struct.Struct(">4sBH")
_STATE_HEADER = struct.Struct(">4sBHHHIH")


@dataclass(frozen=True)
class MerkleParams:
    height: int
    m: int
    ots: LamportParams

    def __post_init__(self) -> None:
        if not isinstance(self.height, int) or not 0 <= self.height <= MAX_HEIGHT:
            raise InvalidParameter(f"tree height must be in [0, {MAX_HEIGHT}], got {self.height!r}")
        if self.m < 8 or self.m % 8 or self.m >= 1 << 16:
            raise InvalidParameter(f"node hash length must be a positive multiple of 8, got {self.m}")

    @classmethod
    def for_ots(cls, height: int, ots: LamportParams) -> MerkleParams:
        """Node hash width equal to the OTS digest width."""
        return cls(height, ots.ell, ots)

    @property
    def leaves(self) -> int:
        return 1 << self.height

    @property
    def node_bytes(self) -> int:
        return self.m // 8


def leaf_seed(master: Seed, index: int) -> Seed:
    """Per-leaf seed: the expander keyed by ``master || index`` (4 octets, big-endian)."""
    return Seed(prng_expand(Seed(master.data + struct.pack(">I", index)), master.bits))


def leaf_keypair(
    params: MerkleParams,
    master: Seed,
    keys: FamilyKeys,
    index: int,
    counter: Optional[CallCounter] = None,
) -> tuple[lamport.LamportPrivateKey, LamportPublicKey]:
    if not 0 <= index < params.leaves:
        raise IndexError(index)
    return lamport.keygen_from_seed(params.ots, keys.f, keys.g, leaf_seed(master, index), counter)


def hash_leaf(keys: FamilyKeys, params: MerkleParams, pub: LamportPublicKey) -> bytes:
    return eval_t(keys.t, pub.to_bytes(), params.m)


def hash_children(keys: FamilyKeys, params: MerkleParams, left: bytes, right: bytes) -> bytes:
    return eval_t(keys.t, left + right, params.m)


class MerkleKeySet:
    def __init__(
        self,
        params: MerkleParams,
        seed: Seed,
        keys: FamilyKeys,
        nodes: list[bytes],
        *,
        cursor: int = 0,
        used: Optional[bytearray] = None,
    ) -> None:
        if len(nodes) != 2 * params.leaves - 1:
            raise InvalidParameter("node array must hold 2^(H+1) - 1 entries")
        self.params = params
        self.seed = seed
        self.keys = keys
        self.nodes = nodes
        self.cursor = cursor
        self.used = used if used is not None else bytearray((params.leaves + 7) // 8)

    @property
    def root(self) -> bytes:
        return self.nodes[0]

    @property
    def remaining(self) -> int:
        return self.params.leaves - self.cursor

    def is_used(self, index: int) -> bool:
        return bool(self.used[index >> 3] & (0x80 >> (index & 7)))

    def _mark_used(self, index: int) -> None:
        self.used[index >> 3] |= 0x80 >> (index & 7)

    def public_key(self) -> MerklePublicKey:
        return MerklePublicKey(self.root, self.params, self.keys)

    def auth_path(self, index: int) -> tuple[bytes, ...]:
        """Sibling nodes from the leaf level up to just below the root."""
        k = self.params.leaves - 1 + index
        path = []
        while k > 0:
            path.append(self.nodes[k + 1] if k % 2 == 1 else self.nodes[k - 1])
            k = (k - 1) // 2
        return tuple(path)

    def to_bytes(self) -> bytes:
        p = self.params
        header = _STATE_HEADER.pack(STATE_MAGIC, p.height, p.m, p.ots.n, p.ots.ell, self.cursor, len(self.seed.data))
        return header + self.seed.data + bytes(self.used) + b"".join(self.nodes)

    @classmethod
    def from_bytes(cls, data: bytes, keys: FamilyKeys) -> MerkleKeySet:
        if len(data) < _STATE_HEADER.size:
            raise MalformedData("truncated tree state")
        magic, height, m, n, ell, cursor, seed_len = _STATE_HEADER.unpack_from(data)
        if magic != STATE_MAGIC:
            raise MalformedData(f"bad magic {magic!r}")
        try:
            params = MerkleParams(height, m, LamportParams(n, ell))
        except InvalidParameter as exc:
            raise MalformedData(str(exc)) from exc
        bitmap_len = (params.leaves + 7) // 8
        node_count = 2 * params.leaves - 1
        expected = _STATE_HEADER.size + seed_len + bitmap_len + node_count * params.node_bytes
        if len(data) != expected or seed_len == 0 or cursor > params.leaves:
            raise MalformedData("tree state length does not match its header")
        off = _STATE_HEADER.size
        seed = Seed(data[off : off + seed_len])
        off += seed_len
        used = bytearray(data[off : off + bitmap_len])
        off += bitmap_len
        size = params.node_bytes
        nodes = [bytes(data[off + k * size : off + (k + 1) * size]) for k in range(node_count)]
        return cls(params, seed, keys, nodes, cursor=cursor, used=used)


@dataclass(frozen=True)
class MerklePublicKey:
    root: bytes
    params: MerkleParams
    keys: FamilyKeys

    def to_bytes(self) -> bytes:
        return _ROOT_HEADER.pack(ROOT_MAGIC, self.params.height, self.params.m) + self.root

    @classmethod
    def from_bytes(cls, data: bytes, keys: FamilyKeys, ots: LamportParams) -> MerklePublicKey:
        height, m, root = parse_root(data)
        try:
            params = MerkleParams(height, m, ots)
        except InvalidParameter as exc:
            raise MalformedData(str(exc)) from exc
        return cls(root, params, keys)


def parse_root(data: bytes) -> tuple[int, int, bytes]:
    """Split an MRT1 root file into (H, m, root)."""
    if len(data) < _ROOT_HEADER.size:
        raise MalformedData("truncated root file")
    magic, height, m = _ROOT_HEADER.unpack_from(data)
    if magic != ROOT_MAGIC:
        raise MalformedData(f"bad magic {magic!r}")
    root = bytes(data[_ROOT_HEADER.size :])
    if m % 8 or len(root) != m // 8 or m == 0:
        raise MalformedData("root length does not match its header")
    return height, m, root


@dataclass(frozen=True)
class MerkleSignature:
    leaf_index: int
    ots_public_key: LamportPublicKey
    ots_signature: LamportSignature
    auth_path: tuple[bytes, ...]

    def to_bytes(self, m: int) -> bytes:
        header = _SIG_HEADER.pack(SIGNATURE_MAGIC, len(self.auth_path), m, self.leaf_index)
        return header + self.ots_public_key.to_bytes() + self.ots_signature.to_bytes() + b"".join(self.auth_path)

    @classmethod
    def from_bytes(cls, data: bytes, keys: FamilyKeys) -> tuple[MerkleSignature, int]:
        """Parse an MSG1 blob; returns the signature and its node hash width m."""
        if len(data) < _SIG_HEADER.size + 8:
            raise MalformedData("truncated Merkle signature")
        magic, height, m, leaf = _SIG_HEADER.unpack_from(data)
        if magic != SIGNATURE_MAGIC:
            raise MalformedData(f"bad magic {magic!r}")
        if m == 0 or m % 8:
            raise MalformedData(f"bad node width {m}")
        off = _SIG_HEADER.size
        _, n, ell = struct.unpack_from(">4sHH", data, off)
        try:
            ots = LamportParams(n, ell)
        except InvalidParameter as exc:
            raise MalformedData(str(exc)) from exc
        pk_len = lamport.public_key_encoded_length(ots)
        sig_len = LamportSignature.encoded_length(ots)
        path_len = height * (m // 8)
        if len(data) != off + pk_len + sig_len + path_len:
            raise MalformedData("Merkle signature length does not match its header")
        pub = LamportPublicKey.from_bytes(data[off : off + pk_len], keys.f, keys.g)
        off += pk_len
        sig = LamportSignature.from_bytes(data[off : off + sig_len])
        off += sig_len
        size = m // 8
        path = tuple(bytes(data[off + k * size : off + (k + 1) * size]) for k in range(height))
        return cls(leaf, pub, sig, path), m


def merkle_keygen(
    params: MerkleParams,
    seed: Seed,
    keys: FamilyKeys,
    counter: Optional[CallCounter] = None,
) -> MerkleKeySet:
    if seed.bits < params.ots.n:
        raise InvalidParameter(f"seed has {seed.bits} bits, needs at least n={params.ots.n}")
    first_leaf = params.leaves - 1
    nodes: list[bytes] = [b""] * (2 * params.leaves - 1)
    for i in range(params.leaves):
        _, pub = leaf_keypair(params, seed, keys, i, counter)
        nodes[first_leaf + i] = hash_leaf(keys, params, pub)
        if counter is not None:
            counter.t_leaf += 1
    for k in range(first_leaf - 1, -1, -1):
        nodes[k] = hash_children(keys, params, nodes[2 * k + 1], nodes[2 * k + 2])
        if counter is not None:
            counter.t_combine += 1
    return MerkleKeySet(params, seed, keys, nodes)


def merkle_sign(
    keyset: MerkleKeySet,
    message: bytes,
    on_consume: Optional[Callable[[], None]] = None,
) -> MerkleSignature:
    """Sign with the next unused leaf.

    The cursor and bitmap are advanced, and ``on_consume`` has returned,
    before the leaf's OTS key is regenerated and used.
    """
    index = keyset.cursor
    if index >= keyset.params.leaves:
        raise TreeExhausted(f"all {keyset.params.leaves} leaves have been used")
    if keyset.is_used(index):
        raise TreeExhausted(f"leaf {index} is marked used ahead of the cursor")
    keyset._mark_used(index)
    keyset.cursor = index + 1
    if on_consume is not None:
        on_consume()
    priv, pub = leaf_keypair(keyset.params, keyset.seed, keyset.keys, index)
    sig = lamport.sign(priv, keyset.keys.g, message)
    return MerkleSignature(index, pub, sig, keyset.auth_path(index))


def merkle_verify(
    root: bytes,
    params: MerkleParams,
    keys: FamilyKeys,
    message: bytes,
    sig: MerkleSignature,
    counter: Optional[CallCounter] = None,
) -> bool:
    if len(sig.auth_path) != params.height:
        raise MalformedData(f"auth path has {len(sig.auth_path)} entries, tree height is {params.height}")
    if any(len(node) != params.node_bytes for node in sig.auth_path):
        raise MalformedData("auth path entry has the wrong width")
    if not 0 <= sig.leaf_index < params.leaves:
        raise MalformedData(f"leaf index {sig.leaf_index} outside the tree")
    if sig.ots_public_key.params != params.ots or sig.ots_signature.params != params.ots:
        raise ParamMismatch("OTS parameters differ from the tree parameters")

    pub = LamportPublicKey(params.ots, keys.f, keys.g, sig.ots_public_key.y)
    if not lamport.verify(pub, message, sig.ots_signature):
        return False

    node = hash_leaf(keys, params, pub)
    if counter is not None:
        counter.t_leaf += 1
    index = sig.leaf_index
    for sibling in sig.auth_path:
        if index & 1:
            node = hash_children(keys, params, sibling, node)
        else:
            node = hash_children(keys, params, node, sibling)
        if counter is not None:
            counter.t_combine += 1
        index >>= 1
    return node == root
