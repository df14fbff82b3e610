"""Regenerate the golden vectors from hashlib alone (no hashsig import).

Run from this directory: python3 make_vectors.py
Each line: space-separated hex fields, described in the file's header.
"""

import hashlib
import struct


def keyed(tag, key, bits, data):
    return hashlib.shake_256(bytes([tag]) + key + struct.pack(">H", bits) + data).digest(bits // 8)


def block(seed, j):
    return hashlib.shake_256(b"\x04" + seed + struct.pack(">I", j)).digest(32)


def pattern(length, salt):
    return bytes((i * 37 + salt) & 0xFF for i in range(length))


def write(name, header, rows):
    with open(name, "w") as fh:
        fh.write(f"# {header}\n")
        for row in rows:
            fh.write(" ".join(row) + "\n")


key = pattern(32, 1)
rows = []
for n in (16, 128, 256, 320):
    for salt in (0, 7):
        x = pattern(n // 8, salt)
        rows.append((str(n), key.hex(), x.hex(), keyed(0x01, key, n, x).hex()))
write("eval_f.txt", "n key x f(x)", rows)

rows = []
for ell in (16, 256, 384):
    for msg in (b"", b"abc", pattern(200, 3)):
        rows.append((str(ell), key.hex(), msg.hex() or "-", keyed(0x02, key, ell, msg).hex()))
write("eval_g.txt", "l key message(- for empty) g(message)", rows)

rows = []
for m in (128, 256):
    data = pattern(64, 9)
    rows.append((str(m), key.hex(), data.hex(), keyed(0x03, key, m, data).hex()))
write("eval_t.txt", "m key data T(data)", rows)

rows = []
for seed in (pattern(16, 5), pattern(32, 6), pattern(48, 7)):
    for j in (0, 1, 2, 1000, 2**32 - 1):
        rows.append((seed.hex(), str(j), block(seed, j).hex()))
write("prng_block.txt", "seed j block_j", rows)

rows = []
for msg in (b"", b"transcript", pattern(100, 2)):
    tag = hashlib.shake_256(b"\x05" + key + msg).digest(16)
    rows.append((key.hex(), msg.hex() or "-", tag.hex()))
write("mac.txt", "key message(- for empty) tag", rows)
