"""Shared builders for session tests."""

from hashsig import lamport, merkle, session
from hashsig.lamport import LamportParams
from hashsig.merkle import MerkleParams
from hashsig.primitives import FamilyKeys, Seed
from hashsig.session import Direction, Role, SessionConfig

OTS = LamportParams(64, 64)


def keypair(family, rng, params=OTS):
    return lamport.keygen(params, family.f, family.g, rng)


def configs(family, rng, params=OTS, **extra):
    i_priv, i_pub = keypair(family, rng, params)
    r_priv, r_pub = keypair(family, rng, params)
    return (SessionConfig(Role.INITIATOR, i_priv, r_pub, family, **extra),
            SessionConfig(Role.RESPONDER, r_priv, i_pub, family, **extra))


def merkle_configs(family, rng, height=2):
    params = MerkleParams.for_ots(height, OTS)
    a = merkle.merkle_keygen(params, Seed(rng(16)), family)
    b = merkle.merkle_keygen(params, Seed(rng(16)), family)
    return (SessionConfig(Role.INITIATOR, a, b.public_key(), family),
            SessionConfig(Role.RESPONDER, b, a.public_key(), family))


def alternating(count, rng, size=24):
    return [(Direction.I2R if k % 2 == 0 else Direction.R2I, rng(size)) for k in range(count)]


def fixed_schedule():
    return [(Direction.I2R if k % 2 == 0 else Direction.R2I, b"payload-%d" % k) for k in range(6)]


def run(i_cfg, r_cfg, schedule, script=None):
    return session.run_scripted(i_cfg, r_cfg, schedule, script)


__all__ = ["FamilyKeys", "OTS", "alternating", "configs", "fixed_schedule", "keypair", "merkle_configs", "run"]
