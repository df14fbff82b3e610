from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hashsig.errors import InvalidParameter, MalformedData, PurposeMismatch
from hashsig.primitives import (
    DigestBits,
    FamilyKey,
    FamilyKeys,
    Purpose,
    Seed,
    eval_f,
    eval_g,
    eval_t,
    mac_tag,
    mac_verify,
    prng_block,
    prng_expand,
    prng_slice,
)

VECTORS = Path(__file__).parent / "vectors"


def rows(name):
    for line in (VECTORS / name).read_text().splitlines():
        if line and not line.startswith("#"):
            yield [b"" if f == "-" else f for f in line.split()]


def unhex(field):
    return bytes.fromhex(field) if isinstance(field, str) else field


def test_eval_f_vectors():
    for n, key, x, out in rows("eval_f.txt"):
        assert eval_f(FamilyKey(unhex(key), Purpose.F), unhex(x), int(n)).hex() == out


def test_eval_g_vectors():
    for ell, key, msg, out in rows("eval_g.txt"):
        digest = eval_g(FamilyKey(unhex(key), Purpose.G), unhex(msg), int(ell))
        assert digest.data.hex() == out
        assert digest.length == int(ell)


def test_eval_t_vectors():
    for m, key, data, out in rows("eval_t.txt"):
        assert eval_t(FamilyKey(unhex(key), Purpose.T), unhex(data), int(m)).hex() == out


def test_prng_block_vectors():
    for seed, j, out in rows("prng_block.txt"):
        assert prng_block(Seed(unhex(seed)), int(j)).hex() == out


def test_mac_vectors():
    for key, msg, out in rows("mac.txt"):
        k = FamilyKey(unhex(key), Purpose.MAC)
        assert mac_tag(k, unhex(msg)).hex() == out
        assert mac_verify(k, unhex(msg), unhex(out))


def test_purpose_separation(family):
    with pytest.raises(PurposeMismatch):
        eval_f(family.g, bytes(16), 128)
    with pytest.raises(PurposeMismatch):
        eval_g(family.f, b"m", 256)
    with pytest.raises(PurposeMismatch):
        eval_t(family.f, b"m", 256)


def test_domain_tags_separate_outputs():
    raw = bytes(32)
    x = bytes(16)
    assert eval_f(FamilyKey(raw, Purpose.F), x, 128) != eval_g(FamilyKey(raw, Purpose.G), x, 128).data


@pytest.mark.parametrize("n", [0, 7, 12, -8, 1 << 16])
def test_bad_lengths(family, n):
    with pytest.raises(InvalidParameter):
        eval_g(family.g, b"m", n)


def test_f_input_length_enforced(family):
    with pytest.raises(InvalidParameter):
        eval_f(family.f, bytes(15), 128)


def test_family_key_size_enforced():
    with pytest.raises((InvalidParameter, ValueError)):
        FamilyKey(bytes(31), Purpose.F)


def test_family_keys_roundtrip(rng):
    keys = FamilyKeys.generate(rng)
    assert FamilyKeys.from_bytes(keys.to_bytes()) == keys
    with pytest.raises(MalformedData):
        FamilyKeys.from_bytes(keys.to_bytes()[:-1])


def test_family_derive_is_deterministic():
    assert FamilyKeys.derive(b"a") == FamilyKeys.derive(b"a")
    assert FamilyKeys.derive(b"a") != FamilyKeys.derive(b"b")


def test_digest_bits_msb_first():
    d = DigestBits(bytes([0b10000001, 0b01000000]))
    assert [d.bit(i) for i in range(16)] == [1, 0, 0, 0, 0, 0, 0, 1, 0, 1] + [0] * 6
    assert d.to_int() == 0x8140


@given(st.integers(min_value=1, max_value=40).map(lambda k: 8 * k).flatmap(
    lambda ell: st.tuples(st.just(ell), st.integers(min_value=0, max_value=(1 << ell) - 1))))
def test_digest_int_roundtrip(pair):
    ell, value = pair
    d = DigestBits.from_int(value, ell)
    assert d.to_int() == value
    assert DigestBits.from_bits(list(d)) == d


@given(st.binary(min_size=1, max_size=64),
       st.integers(min_value=0, max_value=300),
       st.integers(min_value=0, max_value=200))
def test_prng_slice_matches_expansion(seed, offset, length):
    s = Seed(seed)
    total = offset + length
    full = prng_expand(s, 8 * total) if total else b""
    assert prng_slice(s, offset, length) == full[offset:offset + length]


@given(st.binary(min_size=1, max_size=64), st.integers(min_value=1, max_value=100))
def test_prng_expansion_is_prefix_stable(seed, k):
    s = Seed(seed)
    assert prng_expand(s, 8 * (k + 33))[:k] == prng_expand(s, 8 * k)


def test_prng_rejects_partial_octets():
    with pytest.raises(InvalidParameter):
        prng_expand(Seed(b"s"), 12)


@given(st.binary(max_size=200), st.binary(max_size=200))
def test_mac_rejects_other_messages(a, b):
    key = FamilyKey(bytes(range(32)), Purpose.MAC)
    if a != b:
        assert not mac_verify(key, b, mac_tag(key, a))
