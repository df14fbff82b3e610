"""Command-line interface.

Exit codes: 0 success / valid, 1 cryptographic rejection (including a
spent key), 2 structural error (malformed input), 3 usage error.

``HASHSIG_SEED_FILE`` replaces the system entropy source with a
deterministic expansion of that file's contents. ``HASHSIG_FAULT_AT=<k>``
kills the process at the k-th checkpoint of ``sign`` (fault injection).
"""

from __future__ import annotations

import argparse
import fcntl
import os
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

from hashsig import attacks, lamport, merkle, params, session
from hashsig.errors import HashSigError, KeyAlreadyUsed, MalformedData, ParamMismatch, ScriptError
from hashsig.lamport import LamportParams, LamportPublicKey, LamportSignature
from hashsig.merkle import MerkleKeySet, MerkleParams, MerkleSignature
from hashsig.primitives import FamilyKeys, Seed, eval_g, prng_expand

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_MALFORMED = 2
EXIT_USAGE = 3

SEED_ENV = "HASHSIG_SEED_FILE"
FAULT_ENV = "HASHSIG_FAULT_AT"
DEFAULT_FAMILY_LABEL = b"hashsig-default-v1"
FAULT_EXIT = 70


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit 2, which is reserved
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- fault injection ---------------------------------------------------------

_checkpoints = 0


def _checkpoint(name: str) -> None:
    global _checkpoints
    target = os.environ.get(FAULT_ENV)
    if target is not None and int(target) == _checkpoints:
        sys.stderr.write(f"fault injected at checkpoint {_checkpoints} ({name})\n")
        sys.stderr.flush()
        os._exit(FAULT_EXIT)
    _checkpoints += 1


# -- entropy and family keys -------------------------------------------------


class _SeededEntropy:
    """Deterministic octet stream standing in for os.urandom."""

    def __init__(self, data: bytes) -> None:
        self._seed = Seed(data)
        self._offset = 0

    def __call__(self, count: int) -> bytes:
        end = self._offset + count
        out = prng_expand(self._seed, 8 * end)[self._offset :] if count else b""
        self._offset = end
        return out


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except FileNotFoundError as exc:
        raise UsageError(f"no such file: {path}") from exc


def _entropy() -> Callable[[int], bytes]:
    seed_file = os.environ.get(SEED_ENV)
    if seed_file:
        return _SeededEntropy(_read(seed_file))
    return os.urandom


def _seed_for(n: int, seed_file: Optional[str]) -> Seed:
    if seed_file:
        seed = Seed(_read(seed_file))
    else:
        seed = Seed(_entropy()(max(32, n // 8)))
    if seed.bits < n:
        raise UsageError(f"seed has {seed.bits} bits; n={n} needs at least {n}")
    return seed


def _family(path: Optional[str], create: bool = False) -> FamilyKeys:
    if path is None:
        return FamilyKeys.derive(DEFAULT_FAMILY_LABEL)
    p = Path(path)
    if create and not p.exists():
        keys = FamilyKeys.generate(_entropy())
        p.write_bytes(keys.to_bytes())
        return keys
    return FamilyKeys.from_bytes(_read(path))


def _write_durable(path: str, data: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())


# -- subcommands -------------------------------------------------------------


def cmd_keygen(args: argparse.Namespace) -> int:
    family = _family(args.family, create=True)
    ots = LamportParams(args.n, args.ell)
    if args.mode == "raw":
        priv, pub = lamport.keygen(ots, family.f, family.g, _entropy())
        _write_durable(args.out_private, lamport.encode_private_key(priv))
        _write_durable(args.out_public, pub.to_bytes())
    elif args.mode == "seeded":
        priv, pub = lamport.keygen_from_seed(ots, family.f, family.g, _seed_for(args.n, args.seed_file))
        _write_durable(args.out_private, lamport.encode_private_key(priv))
        _write_durable(args.out_public, pub.to_bytes())
    else:
        mparams = MerkleParams(args.height, args.m or args.ell, ots)
        keyset = merkle.merkle_keygen(mparams, _seed_for(args.n, args.seed_file), family)
        _write_durable(args.out_private, keyset.to_bytes())
        _write_durable(args.out_public, keyset.public_key().to_bytes())
        print(f"tree root {keyset.root.hex()} ({mparams.leaves} leaves)")
    return EXIT_OK


def _sign_lamport(fh, data: bytes, family: FamilyKeys, message: bytes, out: str) -> int:
    priv = lamport.decode_private_key(data)
    if priv.used:
        print("key already used", file=sys.stderr)
        return EXIT_REJECT
    digest = eval_g(family.g, message, priv.params.ell)

    def persist() -> None:
        fh.seek(0)
        fh.write(lamport.encode_private_key(priv))
        fh.truncate()
        fh.flush()
        _checkpoint("flag-flushed")
        os.fsync(fh.fileno())
        _checkpoint("flag-synced")

    signer = lamport.streaming_sign_start(priv, digest, on_consume=persist)
    with open(out, "wb") as sig_fh:
        sig_fh.write(lamport.signature_header(priv.params))
        sig_fh.flush()
        _checkpoint("header-written")
        for i in range(priv.params.ell):
            sig_fh.write(signer.next())
            sig_fh.flush()
            _checkpoint(f"chunk-{i}")
        os.fsync(sig_fh.fileno())
    return EXIT_OK


def _sign_merkle(fh, data: bytes, family: FamilyKeys, message: bytes, out: str) -> int:
    keyset = MerkleKeySet.from_bytes(data, family)
    if keyset.remaining == 0:
        print("key already used: every leaf of the tree has signed", file=sys.stderr)
        return EXIT_REJECT

    def persist() -> None:
        fh.seek(0)
        fh.write(keyset.to_bytes())
        fh.truncate()
        fh.flush()
        _checkpoint("state-flushed")
        os.fsync(fh.fileno())
        _checkpoint("state-synced")

    sig = merkle.merkle_sign(keyset, message, on_consume=persist)
    with open(out, "wb") as sig_fh:
        sig_fh.write(sig.to_bytes(keyset.params.m))
        sig_fh.flush()
        _checkpoint("signature-written")
        os.fsync(sig_fh.fileno())
    return EXIT_OK


def cmd_sign(args: argparse.Namespace) -> int:
    family = _family(args.family)
    message = _read(args.message)
    if not Path(args.key).exists():
        raise UsageError(f"no such file: {args.key}")
    with open(args.key, "r+b") as fh:
        fcntl.flock(fh.fileno(), fcntl.LOCK_EX)
        data = fh.read()
        _checkpoint("locked")
        if data[:4] == lamport.PRIVATE_MAGIC:
            return _sign_lamport(fh, data, family, message, args.out)
        if data[:4] == merkle.STATE_MAGIC:
            return _sign_merkle(fh, data, family, message, args.out)
        raise MalformedData("not a private key file")


def cmd_verify(args: argparse.Namespace) -> int:
    family = _family(args.family)
    pub_data, message, sig_data = _read(args.public), _read(args.message), _read(args.signature)
    if pub_data[:4] == lamport.PUBLIC_MAGIC:
        pub = LamportPublicKey.from_bytes(pub_data, family.f, family.g)
        ok = lamport.verify(pub, message, LamportSignature.from_bytes(sig_data))
    elif pub_data[:4] == merkle.ROOT_MAGIC:
        height, m, root = merkle.parse_root(pub_data)
        sig, sig_m = MerkleSignature.from_bytes(sig_data, family)
        if sig_m != m:
            raise ParamMismatch("signature node width differs from the root file")
        mparams = MerkleParams(height, m, sig.ots_public_key.params)
        ok = merkle.merkle_verify(root, mparams, family, message, sig)
    else:
        raise MalformedData("not a public key or root file")
    print("valid" if ok else "invalid")
    return EXIT_OK if ok else EXIT_REJECT


def _model(name: str, mu: int) -> params.AttackModel:
    if name == "parallel":
        return params.AttackModel.parallel(mu)
    return params.AttackModel(params.ModelKind(name))


def cmd_params(args: argparse.Namespace) -> int:
    names = [args.model] if args.model else ["classical", "quantum", "parallel"]
    mus = args.mu if args.mu else [64]
    profiles = []
    for name in names:
        for mu in (mus if name == "parallel" else [0]):
            profiles.append(params.profile(args.k, _model(name, mu)))
    if args.format == "line":
        for p in profiles:
            print(p.line())
        return EXIT_OK
    print(f"{'model':<10} {'k':>5} {'mu':>4} {'n':>5} {'l':>5} {'public key bits':>16}")
    for p in profiles:
        pk_bits = LamportParams(p.n, p.ell).key_bits
        print(f"{p.model.kind.value:<10} {p.k:>5} {p.model.mu:>4} {p.n:>5} {p.ell:>5} {pk_bits:>16}")
    return EXIT_OK


def cmd_forge_demo(args: argparse.Namespace) -> int:
    rng = _SeededEntropy(bytes.fromhex(args.seed)) if args.seed else _entropy()
    family = FamilyKeys.generate(rng)
    ots = LamportParams(args.n, args.ell)
    seed = Seed(rng(max(32, args.n // 8)))
    _, pub = lamport.keygen_from_seed(ots, family.f, family.g, seed)

    observations = []
    for j in range(args.observations):
        # Re-deriving from the same seed is exactly the misuse being demonstrated.
        priv, _ = lamport.keygen_from_seed(ots, family.f, family.g, seed)
        message = b"observed-%d-" % j + rng(8)
        observations.append((message, lamport.sign(priv, family.g, message)))

    material = attacks.collect(pub, observations)
    doubled = sum(1 for size in material.set_sizes() if size == 2)
    count = material.forgeable_count()
    print(f"observations: {material.observations}")
    print(f"positions with both bits revealed: {doubled}")
    print(f"forgeable digests: {count} (2^{doubled} = {2 ** doubled})")
    if args.ell <= 16:
        enumerated = sum(
            1 for v in range(1 << args.ell)
            if attacks.forgeable_digest(material, attacks.DigestBits.from_int(v, args.ell))
        )
        print(f"enumeration over all 2^{args.ell} digests: {enumerated} forgeable")

    if count == 1 or len({eval_g(family.g, m, args.ell).data for m, _ in observations}) == count:
        print("nothing forgeable beyond the observed messages")
        return EXIT_OK

    exclude = [m for m, _ in observations]
    target = attacks.find_forgeable_message(material, exclude, max_tries=args.budget, entropy=rng) \
        if args.ell <= attacks.MAX_SEARCH_ELL else None
    if target is not None:
        forged = attacks.forge(material, target)
        ok = lamport.verify(pub, target, forged)
        print(f"target message: {target.hex()}")
    else:
        observed = {eval_g(family.g, m, args.ell).data for m in exclude}
        digest = next(d for d in attacks.forgeable_digests(material) if d.data not in observed)
        forged = attacks.forge_digest(material, digest)
        ok = lamport.verify_digest(pub, digest, forged)
        print(f"no message found within budget; forging digest {digest.data.hex()}")
    print(f"forgery verifies: {'true' if ok else 'false'}")
    return EXIT_OK if ok else EXIT_REJECT


def demo_schedule(messages: int, rng: Callable[[int], bytes]) -> list[tuple[session.Direction, bytes]]:
    schedule = []
    for i in range(messages):
        direction = session.Direction.I2R if i % 2 == 0 else session.Direction.R2I
        schedule.append((direction, b"msg-%d-" % i + rng(8)))
    return schedule


def demo_configs(ots: LamportParams, rng: Callable[[int], bytes]):
    family = FamilyKeys.generate(rng)
    i_priv, i_pub = lamport.keygen(ots, family.f, family.g, rng)
    r_priv, r_pub = lamport.keygen(ots, family.f, family.g, rng)
    initiator = session.SessionConfig(session.Role.INITIATOR, i_priv, r_pub, family)
    responder = session.SessionConfig(session.Role.RESPONDER, r_priv, i_pub, family)
    return initiator, responder


def cmd_session_demo(args: argparse.Namespace) -> int:
    rng = _SeededEntropy(bytes.fromhex(args.seed)) if args.seed else _entropy()
    script = session.ChannelScript.parse(_read(args.script).decode()) if args.script else session.ChannelScript()
    initiator, responder = demo_configs(LamportParams(args.n, args.ell), rng)
    schedule = demo_schedule(args.messages, rng)
    out_i, out_r, events = session.run_scripted(initiator, responder, schedule, script)
    for event in events:
        print(event)
    # outcomes go to stderr so stdout is exactly the event log
    print(f"initiator {out_i}", file=sys.stderr)
    print(f"responder {out_r}", file=sys.stderr)
    return EXIT_OK if out_i.accepted and out_r.accepted else EXIT_REJECT


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hashsig", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def family_opt(p: argparse.ArgumentParser) -> None:
        p.add_argument("--family", help="family key file (FKS1); default is the built-in public family")

    p = sub.add_parser("keygen", help="generate a Lamport key pair or a Merkle tree")
    p.add_argument("--mode", choices=["raw", "seeded", "merkle"], default="raw")
    p.add_argument("-n", "--n", type=int, default=128)
    p.add_argument("-l", "--ell", type=int, default=256)
    p.add_argument("--height", type=int, default=2, help="Merkle tree depth H")
    p.add_argument("--m", type=int, default=None, help="Merkle node width in bits (default: l)")
    p.add_argument("--seed-file")
    p.add_argument("--out-private", required=True)
    p.add_argument("--out-public", required=True)
    family_opt(p)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("sign", help="sign a file with a one-time key or the next tree leaf")
    p.add_argument("--key", required=True)
    p.add_argument("--message", required=True)
    p.add_argument("--out", required=True)
    family_opt(p)
    p.set_defaults(func=cmd_sign)

    p = sub.add_parser("verify", help="verify a signature")
    p.add_argument("--public", required=True)
    p.add_argument("--message", required=True)
    p.add_argument("--signature", required=True)
    family_opt(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("params", help="dimension n and l for a security level")
    p.add_argument("-k", "--k", type=int, default=128)
    p.add_argument("--model", choices=["classical", "quantum", "parallel"])
    p.add_argument("--mu", type=int, action="append", help="parallel resource exponent (repeatable)")
    p.add_argument("--format", choices=["text", "line"], default="text")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("forge-demo", help="forge from two signatures under one key (toy sizes)")
    p.add_argument("-l", "--ell", type=int, default=16)
    p.add_argument("-n", "--n", type=int, default=16)
    p.add_argument("--observations", type=int, choices=[1, 2, 3, 4], default=2)
    p.add_argument("--budget", type=int, default=1 << 20, help="max random messages tried")
    p.add_argument("--seed", help="hex seed for a reproducible run")
    p.set_defaults(func=cmd_forge_demo)

    p = sub.add_parser("session-demo", help="run a scripted two-party session")
    p.add_argument("--script")
    p.add_argument("--messages", type=int, default=6)
    p.add_argument("-n", "--n", type=int, default=128)
    p.add_argument("-l", "--ell", type=int, default=256)
    p.add_argument("--seed", help="hex seed for a reproducible run")
    p.set_defaults(func=cmd_session_demo)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hashsig: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyAlreadyUsed as exc:
        print(f"hashsig: key already used: {exc}", file=sys.stderr)
        return EXIT_REJECT
    except (MalformedData, ParamMismatch, ScriptError) as exc:
        print(f"hashsig: malformed input: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except HashSigError as exc:
        print(f"hashsig: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"hashsig: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
