"""Precomputed OSCORE packets: crypto, storage, scenarios and benchmarks."""

from ._core import (
    BenchReport,
    BlendError,
    Buffering,
    CryptoEngine,
    ErrorCode,
    NodeMode,
    PacketStore,
    RecoveryPolicy,
    ScenarioConfig,
    ScenarioReport,
    SecurityContext,
    StorageMode,
    bench_dtls_compare,
    bench_send_path,
    bench_storage,
    derive_context,
    generation_id_context,
    parse_scenario,
    protect,
    run_scenario,
    scenario_rows,
    storage_overhead,
    unprotect,
)

__all__ = [name for name in dir() if not name.startswith("_")]
