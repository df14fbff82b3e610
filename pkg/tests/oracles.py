"""Independent re-implementations used as test oracles.

Built from hashlib and struct only; they share no code with hashsig.
"""

import hashlib
import struct


def keyed(tag, key, bits, data):
    return hashlib.shake_256(bytes([tag]) + key + struct.pack(">H", bits) + data).digest(bits // 8)


def expand(seed, nbytes):
    out = b""
    j = 0
    while len(out) < nbytes:
        out += hashlib.shake_256(b"\x04" + seed + struct.pack(">I", j)).digest(32)
        j += 1
    return out[:nbytes]


def lamport_public_bytes(f_key, seed, n, ell):
    stream = expand(seed, 2 * n * ell // 8)
    size = n // 8
    ys = [keyed(0x01, f_key, n, stream[k * size:(k + 1) * size]) for k in range(2 * ell)]
    return b"LPK1" + struct.pack(">HH", n, ell) + b"".join(ys)


def merkle_root(f_key, t_key, master, n, ell, m, height):
    """Hash every leaf, then fold the list pairwise until one node is left."""
    level = []
    for i in range(1 << height):
        leaf = expand(master + struct.pack(">I", i), len(master))
        level.append(keyed(0x03, t_key, m, lamport_public_bytes(f_key, leaf, n, ell)))
    while len(level) > 1:
        level = [keyed(0x03, t_key, m, level[k] + level[k + 1]) for k in range(0, len(level), 2)]
    return level[0]
