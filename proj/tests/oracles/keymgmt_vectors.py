"""Oracle for context refresh: generation ID contexts and the keys they yield.

Master secret and salt are the OSCORE appendix C.1 values. The node sends
under kid 0x01 as the initiator, the collector under kid 0x42.
Run: python3 tests/oracles/keymgmt_vectors.py
"""
import struct

from oscore_vectors import derive, hkdf

SECRET = bytes.fromhex("0102030405060708090a0b0c0d0e0f10")
SALT = bytes.fromhex("9e7ca92223786340")


def gen_id_context(gen):
    return hkdf(SALT, SECRET, b"gen" + struct.pack(">I", gen), 8)


for gen in (1, 2, 0xFFFFFFFF):
    print(f"gen {gen:#x} id_context {gen_id_context(gen).hex()}")

ctx1 = gen_id_context(1)
_, sender_key = derive(SECRET, SALT, b"\x01", ctx1, "Key", 16)
_, recipient_key = derive(SECRET, SALT, b"\x42", ctx1, "Key", 16)
_, common_iv = derive(SECRET, SALT, b"", ctx1, "IV", 13)
print("gen 1 sender key (kid 01)", sender_key.hex())
print("gen 1 recipient key (kid 42)", recipient_key.hex())
print("gen 1 common iv", common_iv.hex())
