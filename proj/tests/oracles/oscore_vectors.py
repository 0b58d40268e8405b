"""Independent oracle for the frozen crypto vectors used by the C++ tests.

Uses the `cryptography` package (OpenSSL-independent API surface) and a
hand-rolled CBOR encoder for the handful of structures involved.
Run: python3 tests/oracles/oscore_vectors.py
"""
from cryptography.hazmat.primitives.ciphers.aead import AESCCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from cryptography.hazmat.primitives import hashes


def cbor_head(major, n):
    if n < 24:
        return bytes([(major << 5) | n])
    if n < 256:
        return bytes([(major << 5) | 24, n])
    if n < 65536:
        return bytes([(major << 5) | 25]) + n.to_bytes(2, "big")
    return bytes([(major << 5) | 26]) + n.to_bytes(4, "big")


def cbor(x):
    if x is None:
        return b"\xf6"
    if isinstance(x, int):
        return cbor_head(0, x)
    if isinstance(x, bytes):
        return cbor_head(2, len(x)) + x
    if isinstance(x, str):
        b = x.encode()
        return cbor_head(3, len(b)) + b
    if isinstance(x, list):
        return cbor_head(4, len(x)) + b"".join(cbor(i) for i in x)
    raise TypeError(x)


def hkdf(salt, ikm, info, n):
    return HKDF(hashes.SHA256(), n, salt if salt else None, info).derive(ikm)


def derive(secret, salt, ident, id_ctx, label, n):
    info = cbor([ident, id_ctx, 10, label, n])
    return info, hkdf(salt, secret, info, n)


def nonce(piv, ident, civ):
    raw = bytes([len(ident)]) + ident.rjust(7, b"\0") + piv.rjust(5, b"\0")
    return bytes(a ^ b for a, b in zip(raw, civ))


def aad(kid, piv):
    ext = cbor([1, [10], kid, piv, b""])
    return ext, cbor(["Encrypt0", b"", ext])


def h(b):
    return b.hex()


if __name__ == "__main__":
    ms = bytes.fromhex("0102030405060708090a0b0c0d0e0f10")
    salt = bytes.fromhex("9e7ca92223786340")
    print("== OSCORE appendix C.1 (client) ==")
    for lbl, ident, n in (("Key", b"", 16), ("Key", b"\x01", 16), ("IV", b"", 13)):
        info, out = derive(ms, salt, ident, None, lbl, n)
        print(lbl, h(ident), "info", h(info), "->", h(out))
    skey = derive(ms, salt, b"", None, "Key", 16)[1]
    civ = derive(ms, salt, b"", None, "IV", 13)[1]
    print("== C.2 (no salt) ==")
    for lbl, ident, n in (("Key", b"\x00", 16), ("Key", b"\x01", 16), ("IV", b"", 13)):
        print(lbl, h(ident), "->", h(derive(ms, b"", ident, None, lbl, n)[1]))
    print("== C.3 (id context) ==")
    idc = bytes.fromhex("37cbf3210017a2d3")
    for lbl, ident, n in (("Key", b"", 16), ("Key", b"\x01", 16), ("IV", b"", 13)):
        print(lbl, h(ident), "->", h(derive(ms, salt, ident, idc, lbl, n)[1]))
    print("== C.4 request ==")
    ext, a = aad(b"", b"\x14")
    nn = nonce(b"\x14", b"", civ)
    pt = bytes.fromhex("01b3747631")
    ct = AESCCM(skey, tag_length=8).encrypt(nn, pt, a)
    print("external_aad", h(ext), "aad", h(a), "nonce", h(nn), "ct", h(ct))
    print("== CCM golden (blend config) ==")
    key = bytes(range(16))
    nn = bytes(range(0x10, 0x1d))
    a = bytes.fromhex("a1a2a3")
    pt = bytes.fromhex("02b0ff") + b"sensor"
    print("ct", h(AESCCM(key, tag_length=8).encrypt(nn, pt, a)))
    print("ct-empty", h(AESCCM(key, tag_length=8).encrypt(nn, b"", b"")))
    print("== RFC 5869 TC1 ==")
    print(h(hkdf(bytes(range(13)), b"\x0b" * 22, bytes(range(0xf0, 0xfa)), 42)))
    print("== Table II packet (ctx from C.1 master secret, sender 0x42, recipient 0x01) ==")
    k42 = derive(ms, salt, b"\x42", None, "Key", 16)[1]
    civ42 = derive(ms, salt, b"", None, "IV", 13)[1]
    nn = nonce(b"\x13", b"\x42", civ42)
    _, a = aad(b"\x42", b"\x13")
    inner = bytes.fromhex("02b0ff") + bytes.fromhex("010203040506")
    ct = AESCCM(k42, tag_length=8).encrypt(nn, inner, a)
    pkt = bytes.fromhex("41024a8484") + bytes.fromhex("93091342") + b"\xff" + ct
    print("key", h(k42), "nonce", h(nn), "packet", h(pkt), len(pkt))
    print("== C.7 response (server sender 0x01, request kid h'', piv 0x14) ==")
    rkey = derive(ms, salt, b"\x01", None, "Key", 16)[1]
    _, a = aad(b"", b"\x14")
    pt = bytes.fromhex("45ff48656c6c6f20576f726c6421")
    print("ct", h(AESCCM(rkey, tag_length=8).encrypt(nonce(b"\x14", b"", civ), pt, a)))
