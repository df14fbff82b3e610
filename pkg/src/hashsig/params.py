"""Parameter dimensioning and concrete-security bounds.

Bounds are exact rationals (``fractions.Fraction``); values such as
``2**-128`` lose nothing, and conversion to decimal or log2 is for
display only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Union

from hashsig.errors import InvalidParameter

Probability = Union[int, Fraction]


class ModelKind(str, Enum):
    CLASSICAL = "classical"
    QUANTUM_LOW_MEMORY = "quantum"
    PARALLEL = "parallel"


@dataclass(frozen=True)
class AttackModel:
    kind: ModelKind
    mu: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.mu < 0:
            raise InvalidParameter(f"mu must be >= 0, got {self.mu}")
        if self.kind is not ModelKind.PARALLEL and self.mu:
            raise InvalidParameter("mu only applies to the parallel model")

    @classmethod
    def classical(cls) -> AttackModel:
        return cls(ModelKind.CLASSICAL)

    @classmethod
    def quantum_low_memory(cls) -> AttackModel:
        return cls(ModelKind.QUANTUM_LOW_MEMORY)

    @classmethod
    def parallel(cls, mu: int) -> AttackModel:
        return cls(ModelKind.PARALLEL, mu)


@dataclass(frozen=True)
class ParamProfile:
    k: int
    model: AttackModel
    n: int
    ell: int

    def line(self) -> str:
        """Machine-readable record: ``model k mu n l``."""
        return f"{self.model.kind.value} {self.k} {self.model.mu} {self.n} {self.ell}"


def round_up8(bits: int) -> int:
    return -(-bits // 8) * 8


def dimension(k: int, model: AttackModel) -> tuple[int, int]:
    """Smallest byte-aligned (n, l) for k-bit security under ``model``.

    classical: n >= k, l >= 2k (generic preimage 2^n, collision 2^(l/2));
    quantum, low memory: n, l >= 2k (Grover preimage, no BHT);
    parallel with 2^mu resources: n >= 2k + mu, l >= 2(k + mu).
    """
    if not isinstance(k, int) or k <= 0:
        raise InvalidParameter(f"security level must be a positive integer, got {k!r}")
    if model.kind is ModelKind.CLASSICAL:
        return round_up8(max(k, 8)), round_up8(2 * k)
    if model.kind is ModelKind.QUANTUM_LOW_MEMORY:
        return round_up8(2 * k), round_up8(2 * k)
    return round_up8(2 * k + model.mu), round_up8(2 * (k + model.mu))


def profile(k: int, model: AttackModel) -> ParamProfile:
    n, ell = dimension(k, model)
    return ParamProfile(k, model, n, ell)


def _prob(value: Probability, name: str) -> Fraction:
    if isinstance(value, float):
        raise InvalidParameter(f"{name}: pass an exact Fraction or int, not a float")
    p = Fraction(value)
    if not 0 <= p <= 1:
        raise InvalidParameter(f"{name} must lie in [0, 1], got {p}")
    return p


def _count(value: int, name: str, minimum: int = 0) -> int:
    if not isinstance(value, int) or value < minimum:
        raise InvalidParameter(f"{name} must be an integer >= {minimum}, got {value!r}")
    return value


def bound_lamport(ell: int, eps_ow: Probability, eps_cr: Probability, r: int) -> Fraction:
    """Forgery bound r * (2 l eps_OW + eps_CR) for r identities."""
    ell = _count(ell, "ell", 1)
    r = _count(r, "r")
    return r * (2 * ell * _prob(eps_ow, "eps_ow") + _prob(eps_cr, "eps_cr"))


def bound_lamport_prng(ell: int, eps_ow: Probability, eps_cr: Probability, eps_rg: Probability, r: int) -> Fraction:
    ell = _count(ell, "ell", 1)
    r = _count(r, "r")
    return r * (2 * ell * _prob(eps_ow, "eps_ow") + _prob(eps_cr, "eps_cr") + _prob(eps_rg, "eps_rg"))


def bound_merkle(height: int, eps_ots: Probability, eps_cr_tree: Probability, r: int) -> Fraction:
    height = _count(height, "H")
    r = _count(r, "r")
    return r * (2**height * _prob(eps_ots, "eps_ots") + _prob(eps_cr_tree, "eps_cr_tree"))


def bound_merkle_lamport(height: int, ell: int, eps_ow: Probability, eps_cr: Probability,
                         eps_cr_tree: Probability, r: int) -> Fraction:
    """Merkle tree over Lamport leaves with independent random keys."""
    height = _count(height, "H")
    ell = _count(ell, "ell", 1)
    r = _count(r, "r")
    ots = 2 * ell * _prob(eps_ow, "eps_ow") + _prob(eps_cr, "eps_cr")
    return r * (2**height * ots + _prob(eps_cr_tree, "eps_cr_tree"))


def bound_merkle_lamport_prng(height: int, ell: int, eps_ow: Probability, eps_rg: Probability,
                              eps_cr: Probability, eps_cr_tree: Probability, r: int) -> Fraction:
    height = _count(height, "H")
    ell = _count(ell, "ell", 1)
    r = _count(r, "r")
    ots = 2 * ell * _prob(eps_ow, "eps_ow") + _prob(eps_rg, "eps_rg") + _prob(eps_cr, "eps_cr")
    return r * (2**height * ots + _prob(eps_cr_tree, "eps_cr_tree"))


def bound_qkd_composition(eps_qkd: Probability, ell: int, eps_ow: Probability, eps_cr: Probability) -> Fraction:
    """QKD distance after authenticating both directions with one Lamport key each."""
    ell = _count(ell, "ell", 1)
    return _prob(eps_qkd, "eps_qkd") + 4 * ell * _prob(eps_ow, "eps_ow") + 2 * _prob(eps_cr, "eps_cr")


@dataclass(frozen=True)
class SecurityBound:
    value: Fraction

    @property
    def clamped(self) -> bool:
        return self.value > 1

    @property
    def probability(self) -> Fraction:
        return min(self.value, Fraction(1))

    def log2(self) -> float:
        """log2 of the (clamped) bound; -inf for a zero bound."""
        p = self.probability
        if p == 0:
            return -math.inf
        return math.log2(p.numerator) - math.log2(p.denominator)

    def bits(self) -> float:
        return -self.log2()

    def __str__(self) -> str:
        if self.value == 0:
            return "0"
        suffix = " (clamped to 1)" if self.clamped else ""
        return f"2^{self.log2():.3f}{suffix}"


def pow2(exponent: int) -> Fraction:
    return Fraction(2) ** exponent


def parse_probability(text: str) -> Fraction:
    """Accept ``2^-128``, ``3*2^-64``, ``1/1024`` or a decimal string."""
    s = text.replace(" ", "")
    try:
        if "^" in s:
            coeff, _, power = s.rpartition("*")
            base, _, exp = power.partition("^")
            if base != "2":
                raise ValueError(text)
            value = Fraction(coeff or 1) * pow2(int(exp))
        else:
            value = Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidParameter(f"cannot parse probability {text!r}") from exc
    return _prob(value, "probability")
