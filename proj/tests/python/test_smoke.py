import pytest

import blend

SECRET = bytes.fromhex("0102030405060708090a0b0c0d0e0f10")
SALT = bytes.fromhex("9e7ca92223786340")


def pair(engine, id_context=None):
    client = blend.derive_context(engine, SECRET, SALT, b"", b"\x01", id_context)
    server = blend.derive_context(engine, SECRET, SALT, b"\x01", b"", id_context)
    return client, server


def test_context_known_answer():
    client, _ = pair(blend.CryptoEngine())
    assert client.sender_key.hex() == "f0910ed7295e6ad4b54fc793154302ff"
    assert client.recipient_key.hex() == "ffb14e093c94c9cac9471648b4f98710"
    assert client.common_iv.hex() == "4622d4dd6d944168eefb54987c"
    assert client.id_context is None


def test_generation_id_context():
    assert blend.generation_id_context(SECRET, SALT, 1).hex() == "720249aa56708869"
    assert blend.generation_id_context(SECRET, SALT, 0xFFFFFFFF).hex() == "9040c2ccc685840c"


@pytest.mark.parametrize("length", [6, 20, 56])
def test_packet_length_and_round_trip(length):
    engine = blend.CryptoEngine()
    receiver, sender = pair(engine)
    payload = bytes(range(length))
    packet = blend.protect(engine, sender, payload, 5)
    assert len(packet) == length + 21
    out = blend.unprotect(engine, receiver, packet)
    assert out["payload"] == payload
    assert out["seq"] == 5
    assert engine.counters()["seal"] == 1
    assert engine.counters()["open"] == 1


def test_tamper_raises_with_code():
    engine = blend.CryptoEngine()
    client, server = pair(engine)
    packet = bytearray(blend.protect(engine, client, b"reading", 1))
    packet[-1] ^= 1
    with pytest.raises(blend.BlendError) as err:
        blend.unprotect(engine, server, bytes(packet))
    assert err.value.code == blend.ErrorCode.authentication


def test_optimized_store_reconstructs_packets():
    engine = blend.CryptoEngine()
    _, sender = pair(engine)
    store = blend.PacketStore(blend.StorageMode.optimized)
    packets = [blend.protect(engine, sender, b"abcdef", seq, seq) for seq in range(250, 262)]
    slots = [store.store(p) for p in packets]
    assert [store.load(*s) for s in slots] == packets
    assert store.packet_count == len(packets)
    assert blend.storage_overhead(blend.StorageMode.optimized, 56) == pytest.approx(56 + 11 + 8 / 25)


def test_scenario_exactly_once():
    config = blend.parse_scenario("readings = 40\nloss = 0.1\ndup = 0.1\nreorder = 3\nseed = 9\n")
    report = blend.run_scenario(config)
    assert report.ok, report.violations
    assert len(report.received) == 40
    assert report.nodes[0]["send_path_ops"]["seal"] == 0
    assert sorted(p["seq"] for p in report.received) == list(range(40))


def test_bad_scenario_is_config_error():
    with pytest.raises(blend.BlendError) as err:
        blend.parse_scenario("colour = blue\n")
    assert err.value.code == blend.ErrorCode.config


def test_bench_reports():
    rows = blend.bench_storage([56]).rows
    assert {r["mode"]: r["stored_bytes"] for r in rows}["full_oscore"] == 77
    send = {r["mode"]: r for r in blend.bench_send_path(100, [16]).rows}
    assert (send["blend"]["seal_ops"], send["blend"]["open_ops"]) == (0, 0)
    assert (send["baseline"]["seal_ops"], send["baseline"]["open_ops"]) == (100, 100)
    assert all(r["delta_bytes"] == 8 for r in blend.bench_dtls_compare([6, 51]).rows)
    assert blend.bench_storage([6]).csv().startswith("scenario,payload_len,mode,")
