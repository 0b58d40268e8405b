"""Oracle for the X25519 and Ed25519 known answers (RFC 7748 6.1, RFC 8032 7.1 test 1).

Recomputes both with the `cryptography` package so the frozen hex in the C++
tests does not rest on one implementation.
Run: python3 tests/oracles/pk_vectors.py
"""
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

RAW = (Encoding.Raw, PublicFormat.Raw)

alice = X25519PrivateKey.from_private_bytes(
    bytes.fromhex("77076d0a7318a57d3c16c17251b26645df4c2f87ebc0992ab177fba51db92c2a"))
bob = X25519PrivateKey.from_private_bytes(
    bytes.fromhex("5dab087e624a8a4b79e17f8b83800ee66f3bb1292618b6fd1c2f8b27ff88e0eb"))
print("alice public", alice.public_key().public_bytes(*RAW).hex())
print("bob public  ", bob.public_key().public_bytes(*RAW).hex())
print("shared      ", alice.exchange(bob.public_key()).hex())

sk = Ed25519PrivateKey.from_private_bytes(
    bytes.fromhex("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60"))
print("ed25519 public", sk.public_key().public_bytes(*RAW).hex())
print("ed25519 sig(empty)", sk.sign(b"").hex())
