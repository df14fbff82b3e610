import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hashsig import lamport
from hashsig.errors import (
    EntropyUnavailable,
    InvalidParameter,
    KeyAlreadyUsed,
    MalformedData,
    ParamMismatch,
    StreamExhausted,
)
from hashsig.lamport import CallCounter, LamportParams, LamportPublicKey, LamportSignature
from hashsig.primitives import Seed, eval_f, eval_g, prng_expand

SMALL = LamportParams(16, 16)
MID = LamportParams(64, 32)


def fresh(family, params=SMALL, rng=None):
    if rng is None:
        return lamport.keygen(params, family.f, family.g)
    return lamport.keygen(params, family.f, family.g, rng)


def test_params_validation():
    for bad in [(0, 16), (12, 16), (16, 7), (16, 1 << 16)]:
        with pytest.raises(InvalidParameter):
            LamportParams(*bad)
    assert LamportParams(128, 256).key_bits == 65536
    assert LamportParams(128, 256).signature_bits == 32768


def test_public_key_is_f_of_private(family, rng):
    priv, pub = fresh(family, MID, rng)
    for i in range(MID.ell):
        for j in (0, 1):
            assert pub.y[i][j] == eval_f(family.f, priv.string(i, j), MID.n)


def test_keygen_counts_f_calls(family, rng):
    counter = CallCounter()
    lamport.keygen(MID, family.f, family.g, rng, counter)
    assert counter.f == 2 * MID.ell


def test_sign_reveals_digest_selected_strings(family, rng):
    priv, pub = fresh(family, MID, rng)
    x = [[priv.string(i, j) for j in (0, 1)] for i in range(MID.ell)]
    digest = eval_g(family.g, b"message", MID.ell)
    sig = lamport.sign(priv, family.g, b"message")
    assert sig.s == tuple(x[i][digest.bit(i)] for i in range(MID.ell))
    counter = CallCounter()
    assert lamport.verify(pub, b"message", sig, counter)
    assert counter.f == MID.ell


def test_second_sign_fails(family, rng):
    priv, _ = fresh(family, rng=rng)
    lamport.sign(priv, family.g, b"a")
    with pytest.raises(KeyAlreadyUsed):
        lamport.sign(priv, family.g, b"b")
    with pytest.raises(KeyAlreadyUsed):
        lamport.streaming_sign_start(priv, eval_g(family.g, b"b", SMALL.ell))


def test_key_is_wiped_after_signing(family, rng):
    priv, _ = fresh(family, rng=rng)
    lamport.sign(priv, family.g, b"a")
    assert priv.is_zeroized()
    with pytest.raises(KeyAlreadyUsed):
        priv.string(0, 0)


def test_concurrent_signers_get_one_signature(family, rng):
    priv, pub = fresh(family, MID, rng)
    results, errors = [], []
    barrier = threading.Barrier(8)

    def worker(k):
        barrier.wait()
        try:
            results.append(lamport.sign(priv, family.g, b"msg-%d" % k))
        except KeyAlreadyUsed:
            errors.append(k)

    threads = [threading.Thread(target=worker, args=(k,)) for k in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(results) == 1 and len(errors) == 7


def test_on_consume_runs_before_any_chunk(family, rng):
    priv, _ = fresh(family, rng=rng)
    seen = []
    lamport.sign(priv, family.g, b"m", on_consume=lambda: seen.append(priv.used))
    assert seen == [True]


def test_failing_persistence_burns_the_key(family, rng):
    priv, _ = fresh(family, rng=rng)

    def boom():
        raise OSError("disk full")

    with pytest.raises(OSError):
        lamport.sign(priv, family.g, b"m", on_consume=boom)
    assert priv.used and priv.is_zeroized()
    with pytest.raises(KeyAlreadyUsed):
        lamport.sign(priv, family.g, b"m")


def test_entropy_failures(family):
    def broken(k):
        raise OSError("no entropy")

    with pytest.raises(EntropyUnavailable):
        lamport.keygen(SMALL, family.f, family.g, broken)
    with pytest.raises(EntropyUnavailable):
        lamport.keygen(SMALL, family.f, family.g, lambda k: bytes(k - 1))


def test_seeded_keygen_matches_expansion(family):
    seed = Seed(bytes(range(32)))
    priv, pub = lamport.keygen_from_seed(MID, family.f, family.g, seed)
    stream = prng_expand(seed, MID.key_bits)
    size = MID.string_bytes
    for i in range(MID.ell):
        for j in (0, 1):
            expect = stream[(2 * i + j) * size:(2 * i + j + 1) * size]
            assert priv.string(i, j) == expect
            assert lamport.derive_private_string(MID, seed, i, j) == expect
    _, again = lamport.keygen_from_seed(MID, family.f, family.g, seed)
    assert again == pub


def test_seed_shorter_than_n_rejected(family):
    with pytest.raises(InvalidParameter):
        lamport.keygen_from_seed(LamportParams(128, 16), family.f, family.g, Seed(bytes(8)))


def test_param_mismatch(family, rng):
    priv, _ = fresh(family, SMALL, rng)
    _, pub = fresh(family, MID, rng)
    sig = lamport.sign(priv, family.g, b"m")
    with pytest.raises(ParamMismatch):
        lamport.verify(pub, b"m", sig)


def test_public_key_roundtrip(family, rng):
    _, pub = fresh(family, MID, rng)
    data = pub.to_bytes()
    assert len(data) == lamport.public_key_encoded_length(MID)
    assert len(data) - 8 == MID.key_bits // 8
    assert LamportPublicKey.from_bytes(data, family.f, family.g) == pub
    with pytest.raises(MalformedData):
        LamportPublicKey.from_bytes(data[:-1], family.f, family.g)
    with pytest.raises(MalformedData):
        LamportPublicKey.from_bytes(b"XXXX" + data[4:], family.f, family.g)


def test_signature_roundtrip(family, rng):
    priv, _ = fresh(family, MID, rng)
    sig = lamport.sign(priv, family.g, b"m")
    data = sig.to_bytes()
    assert len(data) == LamportSignature.encoded_length(MID)
    assert LamportSignature.from_bytes(data) == sig
    with pytest.raises(MalformedData):
        LamportSignature.from_bytes(data + b"\x00")


@pytest.mark.parametrize("seeded", [False, True])
def test_private_key_file_roundtrip(family, rng, seeded):
    if seeded:
        priv, pub = lamport.keygen_from_seed(MID, family.f, family.g, Seed(rng(32)))
    else:
        priv, pub = fresh(family, MID, rng)
    restored = lamport.decode_private_key(lamport.encode_private_key(priv))
    assert not restored.used
    sig = lamport.sign(restored, family.g, b"m")
    assert lamport.verify(pub, b"m", sig)
    spent = lamport.encode_private_key(restored)
    assert spent[lamport.private_key_used_flag_offset()] == 1
    assert not any(spent[10:])
    again = lamport.decode_private_key(spent)
    assert again.used
    with pytest.raises(KeyAlreadyUsed):
        lamport.sign(again, family.g, b"m")


def test_private_key_file_rejects_junk():
    with pytest.raises(MalformedData):
        lamport.decode_private_key(b"LSK1\x00\x10\x00\x10\x07\x00")
    with pytest.raises(MalformedData):
        lamport.decode_private_key(b"LSK1")


def test_streaming_matches_batch_and_erases(family):
    seed = Seed(bytes(range(32)))
    digest = eval_g(family.g, b"stream me", MID.ell)
    batch_priv, _ = lamport.keygen_from_seed(MID, family.f, family.g, seed)
    batch = lamport.sign_digest(batch_priv, digest)
    priv, _ = lamport.keygen_from_seed(MID, family.f, family.g, seed)
    signer = lamport.streaming_sign_start(priv, digest)
    chunks = []
    for i in range(MID.ell):
        chunks.append(lamport.streaming_sign_next(signer))
        bit = digest.bit(i)
        assert signer.is_erased(i, 1 - bit)
        if i < MID.ell - 1:
            assert not signer.is_erased(i + 1, 0) and not signer.is_erased(i + 1, 1)
    assert tuple(chunks) == batch.s
    assert priv.is_zeroized()
    assert len(signer.erased_positions()) == 2 * MID.ell
    with pytest.raises(StreamExhausted):
        signer.next()


@settings(max_examples=30, deadline=None)
@given(st.binary(max_size=300), st.integers(min_value=0))
def test_tampered_message_rejected(msg, flip):
    from hashsig.primitives import FamilyKeys

    family = FamilyKeys.derive(b"prop")
    priv, pub = lamport.keygen_from_seed(SMALL, family.f, family.g, Seed(msg.ljust(2, b"\x00")))
    sig = lamport.sign(priv, family.g, msg)
    assert lamport.verify(pub, msg, sig)
    tampered = bytearray(msg or b"\x00")
    bit = flip % (8 * len(tampered))
    tampered[bit >> 3] ^= 1 << (bit & 7)
    # at l = 16 a tampered message can collide with probability 2^-16
    if eval_g(family.g, bytes(tampered), 16) != eval_g(family.g, msg, 16):
        assert not lamport.verify(pub, bytes(tampered), sig)
