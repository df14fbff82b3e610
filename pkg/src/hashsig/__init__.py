"""Hash-based one-time signatures and one-signature-per-direction transcript authentication."""

from hashsig.errors import (
    EntropyUnavailable,
    FrameError,
    HashSigError,
    InvalidObservation,
    InvalidParameter,
    KeyAlreadyUsed,
    MalformedData,
    NotForgeable,
    ParamMismatch,
    PhaseViolation,
    PurposeMismatch,
    ScriptError,
    StreamExhausted,
    TreeExhausted,
)
from hashsig.lamport import LamportParams, LamportPrivateKey, LamportPublicKey, LamportSignature
from hashsig.merkle import MerkleKeySet, MerkleParams, MerklePublicKey, MerkleSignature
from hashsig.primitives import DigestBits, FamilyKey, FamilyKeys, Purpose, Seed

__version__ = "0.1.0"

__all__ = [
    "DigestBits",
    "EntropyUnavailable",
    "FamilyKey",
    "FamilyKeys",
    "FrameError",
    "HashSigError",
    "InvalidObservation",
    "InvalidParameter",
    "KeyAlreadyUsed",
    "LamportParams",
    "LamportPrivateKey",
    "LamportPublicKey",
    "LamportSignature",
    "MalformedData",
    "MerkleKeySet",
    "MerkleParams",
    "MerklePublicKey",
    "MerkleSignature",
    "NotForgeable",
    "ParamMismatch",
    "PhaseViolation",
    "Purpose",
    "PurposeMismatch",
    "ScriptError",
    "Seed",
    "StreamExhausted",
    "TreeExhausted",
]
