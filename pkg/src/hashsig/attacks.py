"""Forging Lamport signatures once a key has signed more than once.

Every signature hands out one private string per digest position. After
k signatures, position i has revealed ``{m_i^j : j < k}``; any digest whose
bits all lie in those sets can be signed by pure reassembly.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence

from hashsig import lamport
from hashsig.errors import InvalidObservation, InvalidParameter, NotForgeable
from hashsig.lamport import LamportParams, LamportPublicKey, LamportSignature
from hashsig.primitives import DigestBits, eval_f, eval_g

# Message-level search inverts g by trial, so it is limited to toy digests.
MAX_SEARCH_ELL = 24


@dataclass(frozen=True)
class RevealedMaterial:
    params: LamportParams
    pub: LamportPublicKey
    revealed: tuple[dict[int, bytes], ...]
    observations: int

    @property
    def fixed_mask(self) -> int:
        """Bits (as an l-bit integer, position 0 = MSB) where only one value was revealed."""
        mask = 0
        for i, known in enumerate(self.revealed):
            if len(known) == 1:
                mask |= 1 << (self.params.ell - 1 - i)
        return mask

    @property
    def fixed_value(self) -> int:
        value = 0
        for i, known in enumerate(self.revealed):
            if len(known) == 1 and 1 in known:
                value |= 1 << (self.params.ell - 1 - i)
        return value

    def set_sizes(self) -> list[int]:
        return [len(known) for known in self.revealed]

    def forgeable_count(self) -> int:
        count = 1
        for size in self.set_sizes():
            count *= size
        return count


def collect(
    pub: LamportPublicKey,
    observations: Sequence[tuple[bytes, LamportSignature]],
) -> RevealedMaterial:
    """Pool the private strings revealed by signatures under ``pub``."""
    if not observations:
        raise InvalidObservation("at least one observed signature is required")
    params = pub.params
    revealed: list[dict[int, bytes]] = [{} for _ in range(params.ell)]
    for message, sig in observations:
        if sig.params != params or not lamport.verify(pub, message, sig):
            raise InvalidObservation("observation does not verify under the public key")
        digest = eval_g(pub.g_key, message, params.ell)
        for i, bit in enumerate(digest):
            revealed[i][bit] = sig.s[i]
    return RevealedMaterial(params, pub, tuple(revealed), len(observations))


def forgeable_digest(material: RevealedMaterial, digest: DigestBits) -> bool:
    if digest.length != material.params.ell:
        raise InvalidParameter("digest length does not match the key")
    return digest.to_int() & material.fixed_mask == material.fixed_value


def forgeable(material: RevealedMaterial, target: bytes) -> bool:
    return forgeable_digest(material, eval_g(material.pub.g_key, target, material.params.ell))


def forge_digest(material: RevealedMaterial, digest: DigestBits) -> LamportSignature:
    if not forgeable_digest(material, digest):
        raise NotForgeable("digest needs a private string that was never revealed")
    s = tuple(material.revealed[i][bit] for i, bit in enumerate(digest))
    return LamportSignature(material.params, s)


def forge(material: RevealedMaterial, target: bytes) -> LamportSignature:
    return forge_digest(material, eval_g(material.pub.g_key, target, material.params.ell))


def forgeable_digests(material: RevealedMaterial) -> Iterator[DigestBits]:
    """Every digest satisfying the revealed-bit condition, in lexicographic order."""
    choices = [sorted(known) for known in material.revealed]
    for bits in itertools.product(*choices):
        yield DigestBits.from_bits(list(bits))


def find_forgeable_message(
    material: RevealedMaterial,
    exclude: Sequence[bytes] = (),
    max_tries: int = 1 << 20,
    message_bytes: int = 16,
    entropy: Callable[[int], bytes] = os.urandom,
) -> Optional[bytes]:
    """Search random messages for one whose digest can be forged.

    Digests equal to an excluded message's digest are skipped, so the
    result is a genuinely new signable message. Returns None when the
    budget runs out.
    """
    ell = material.params.ell
    if ell > MAX_SEARCH_ELL:
        raise InvalidParameter(f"message search is only supported for l <= {MAX_SEARCH_ELL}")
    g_key = material.pub.g_key
    banned = {eval_g(g_key, m, ell).data for m in exclude}
    mask, value = material.fixed_mask, material.fixed_value
    for _ in range(max_tries):
        candidate = entropy(message_bytes)
        digest = eval_g(g_key, candidate, ell)
        if digest.data in banned:
            continue
        if digest.to_int() & mask == value:
            return candidate
    return None


def check_revealed(material: RevealedMaterial) -> bool:
    """Every stored string really is a preimage of the matching public hash."""
    pub = material.pub
    return all(
        eval_f(pub.f_key, x, pub.params.n) == pub.y[i][bit]
        for i, known in enumerate(material.revealed)
        for bit, x in known.items()
    )
