#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

#include "blend/bench.hpp"
#include "blend/error.hpp"
#include "blend/keymgmt.hpp"
#include "blend/oscore.hpp"
#include "blend/packet_store.hpp"
#include "blend/scenario.hpp"

namespace py = pybind11;
using namespace blend;

namespace {

Bytes to_bytes_arg(const py::bytes& b) {
    const std::string s = b;
    return Bytes(s.begin(), s.end());
}

py::bytes py_bytes(ByteView b) { return py::bytes(reinterpret_cast<const char*>(b.data()), b.size()); }

py::object optional_bytes(const std::optional<Bytes>& b) { return b ? py::object(py_bytes(*b)) : py::none(); }

py::dict counters_dict(const crypto::CryptoCounters& c) {
    py::dict d;
    d["seal"] = c.seal_count;
    d["open"] = c.open_count;
    d["kdf"] = c.kdf_count;
    d["pk"] = c.pk_count;
    d["aead_bytes"] = c.aead_bytes;
    return d;
}

/// Flash, file system and packet store owned together.
class PyPacketStore {
public:
    PyPacketStore(storage::StorageMode mode, std::size_t batch_capacity, std::size_t page_size, std::size_t page_count)
        : flash_(std::make_unique<storage::FlashDevice>(page_size, page_count)),
          files_(std::make_unique<storage::FileStore>(*flash_)),
          store_(std::make_unique<storage::PacketStore>(*files_, mode, batch_capacity)) {}

    py::tuple store(const py::bytes& packet) {
        const Bytes p = to_bytes_arg(packet);
        if (store_->mode() == storage::StorageMode::optimized && !store_->fits_open_batch(p)) store_->close_batch();
        const auto r = store_->store_packet(p);
        return py::make_tuple(r.batch, r.index);
    }
    py::bytes load(storage::FileId batch, std::size_t index) const { return py_bytes(store_->load_packet(batch, index)); }
    void close_batch() { store_->close_batch(); }
    std::uint64_t stored_bytes() const { return store_->stored_bytes(); }
    std::size_t packet_count() const { return store_->packet_count(); }
    std::uint64_t flash_bytes_written() const { return flash_->write_byte_count(); }

private:
    std::unique_ptr<storage::FlashDevice> flash_;
    std::unique_ptr<storage::FileStore> files_;
    std::unique_ptr<storage::PacketStore> store_;
};

py::list rows(const bench::BenchReport& r) {
    py::list out;
    const auto opt = [](const auto& v) { return v ? py::cast(*v) : py::none(); };
    for (const auto& row : r.rows) {
        py::dict d;
        d["scenario"] = row.scenario;
        d["payload_len"] = row.payload_len;
        d["mode"] = row.mode;
        d["stored_bytes"] = row.stored_bytes;
        d["overhead_pct"] = row.overhead_pct;
        d["seal_ops"] = opt(row.seal_ops);
        d["open_ops"] = opt(row.open_ops);
        d["flash_bytes_rw"] = opt(row.flash_bytes_rw);
        d["est_time_us"] = opt(row.est_time_us);
        d["est_energy_uJ"] = opt(row.est_energy_uJ);
        d["delta_bytes"] = opt(row.delta_bytes);
        out.append(d);
    }
    return out;
}

std::string csv(const bench::BenchReport& r) {
    std::ostringstream out;
    r.write_csv(out);
    return out.str();
}

std::optional<bench::CostModel> cost_model_arg(const std::optional<std::string>& text) {
    if (!text) return std::nullopt;
    std::istringstream in(*text);
    return bench::CostModel::parse(in);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Precomputed OSCORE packets: crypto, storage, scenarios and benchmarks";

    py::enum_<Errc>(m, "ErrorCode")
        .value("invalid_argument", Errc::invalid_argument)
        .value("cbor_encoding", Errc::cbor_encoding)
        .value("cbor_truncated", Errc::cbor_truncated)
        .value("cbor_non_canonical", Errc::cbor_non_canonical)
        .value("cbor_unsupported", Errc::cbor_unsupported)
        .value("authentication", Errc::authentication)
        .value("coap_invalid", Errc::coap_invalid)
        .value("coap_parse", Errc::coap_parse)
        .value("oscore_parse", Errc::oscore_parse)
        .value("sequence_exhausted", Errc::sequence_exhausted)
        .value("replay", Errc::replay)
        .value("no_context", Errc::no_context)
        .value("flash_violation", Errc::flash_violation)
        .value("storage_full", Errc::storage_full)
        .value("batch_mismatch", Errc::batch_mismatch)
        .value("end_of_data", Errc::end_of_data)
        .value("handshake_abort", Errc::handshake_abort)
        .value("transport", Errc::transport)
        .value("config", Errc::config)
        .value("crypto_backend", Errc::crypto_backend);

    static py::exception<Error> blend_error(m, "BlendError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object err = py::handle(blend_error.ptr())(e.what());
            err.attr("code") = py::cast(e.code());
            PyErr_SetObject(blend_error.ptr(), err.ptr());
        }
    });

    py::enum_<storage::StorageMode>(m, "StorageMode")
        .value("full_udp", storage::StorageMode::full_udp)
        .value("full_oscore", storage::StorageMode::full_oscore)
        .value("optimized", storage::StorageMode::optimized);
    py::enum_<node::NodeMode>(m, "NodeMode").value("blend", node::NodeMode::blend).value("baseline", node::NodeMode::baseline);
    py::enum_<node::Buffering>(m, "Buffering")
        .value("allowed", node::Buffering::allowed)
        .value("forbidden", node::Buffering::forbidden);
    py::enum_<keymgmt::RecoveryPolicy>(m, "RecoveryPolicy")
        .value("request_reauth", keymgmt::RecoveryPolicy::request_reauth)
        .value("blind_trigger", keymgmt::RecoveryPolicy::blind_trigger);

    py::class_<crypto::CryptoEngine>(m, "CryptoEngine")
        .def(py::init<>())
        .def("counters", [](const crypto::CryptoEngine& e) { return counters_dict(e.counters()); })
        .def("reset_counters", &crypto::CryptoEngine::reset_counters)
        .def("hkdf",
             [](crypto::CryptoEngine& e, const py::bytes& salt, const py::bytes& ikm, const py::bytes& info, std::size_t n) {
                 return py_bytes(e.hkdf(to_bytes_arg(salt), to_bytes_arg(ikm), to_bytes_arg(info), n));
             })
        .def("seal",
             [](crypto::CryptoEngine& e, const py::bytes& key, const py::bytes& nonce, const py::bytes& aad,
                const py::bytes& pt) {
                 return py_bytes(e.seal(crypto::AeadKey(to_bytes_arg(key)), to_bytes_arg(nonce), to_bytes_arg(aad),
                                        to_bytes_arg(pt)));
             })
        .def("open", [](crypto::CryptoEngine& e, const py::bytes& key, const py::bytes& nonce, const py::bytes& aad,
                        const py::bytes& ct) {
            return py_bytes(
                e.open(crypto::AeadKey(to_bytes_arg(key)), to_bytes_arg(nonce), to_bytes_arg(aad), to_bytes_arg(ct)));
        });

    py::class_<oscore::SecurityContext>(m, "SecurityContext")
        .def_property_readonly("sender_key", [](const oscore::SecurityContext& c) { return py_bytes(c.sender_key.bytes()); })
        .def_property_readonly("recipient_key",
                               [](const oscore::SecurityContext& c) { return py_bytes(c.recipient_key.bytes()); })
        .def_property_readonly("common_iv", [](const oscore::SecurityContext& c) { return py_bytes(c.common_iv); })
        .def_property_readonly("sender_id", [](const oscore::SecurityContext& c) { return py_bytes(c.sender_id); })
        .def_property_readonly("recipient_id", [](const oscore::SecurityContext& c) { return py_bytes(c.recipient_id); })
        .def_property_readonly("id_context", [](const oscore::SecurityContext& c) { return optional_bytes(c.id_context); })
        .def_readwrite("sender_seq", &oscore::SecurityContext::sender_seq);

    m.def(
        "derive_context",
        [](crypto::CryptoEngine& e, const py::bytes& secret, const py::bytes& salt, const py::bytes& sender_id,
           const py::bytes& recipient_id, const std::optional<py::bytes>& id_context) {
            oscore::ContextInputs in;
            in.master_secret = to_bytes_arg(secret);
            in.master_salt = to_bytes_arg(salt);
            in.sender_id = to_bytes_arg(sender_id);
            in.recipient_id = to_bytes_arg(recipient_id);
            if (id_context) in.id_context = to_bytes_arg(*id_context);
            return oscore::derive_context(e, in);
        },
        py::arg("engine"), py::arg("master_secret"), py::arg("master_salt"), py::arg("sender_id"),
        py::arg("recipient_id"), py::arg("id_context") = py::none());

    m.def(
        "protect",
        [](crypto::CryptoEngine& e, oscore::SecurityContext& ctx, const py::bytes& payload, std::uint64_t seq,
           std::uint16_t message_id, const py::bytes& token, const std::string& uri_path) {
            coap::Message msg;
            msg.message_id = message_id;
            msg.token = to_bytes_arg(token);
            msg.uri_path = uri_path;
            msg.payload = to_bytes_arg(payload);
            return py_bytes(oscore::protect(e, ctx, msg, seq));
        },
        "Confirmable POST protected as an OSCORE request.", py::arg("engine"), py::arg("ctx"), py::arg("payload"),
        py::arg("seq"), py::arg("message_id") = 0, py::arg("token") = py::bytes("\x00", 1), py::arg("uri_path") = "");

    m.def(
        "unprotect",
        [](crypto::CryptoEngine& e, oscore::SecurityContext& ctx, const py::bytes& packet) {
            const auto u = oscore::unprotect(e, ctx, to_bytes_arg(packet));
            py::dict d;
            d["seq"] = u.seq;
            d["code"] = u.message.code;
            d["message_id"] = u.message.message_id;
            d["token"] = py_bytes(u.message.token);
            d["uri_path"] = u.message.uri_path;
            d["payload"] = py_bytes(u.message.payload);
            return d;
        },
        py::arg("engine"), py::arg("ctx"), py::arg("packet"));

    m.def(
        "generation_id_context",
        [](const py::bytes& secret, const py::bytes& salt, std::uint32_t generation) {
            crypto::CryptoEngine e;
            keymgmt::MasterSecretBundle b;
            b.master_secret = to_bytes_arg(secret);
            b.master_salt = to_bytes_arg(salt);
            b.generation = generation;
            return optional_bytes(keymgmt::generation_id_context(e, b));
        },
        py::arg("master_secret"), py::arg("master_salt"), py::arg("generation"));

    m.def("storage_overhead", &storage::storage_overhead, py::arg("mode"), py::arg("payload_len"),
          py::arg("batch_capacity") = storage::default_batch_capacity);

    py::class_<PyPacketStore>(m, "PacketStore")
        .def(py::init<storage::StorageMode, std::size_t, std::size_t, std::size_t>(), py::arg("mode"),
             py::arg("batch_capacity") = storage::default_batch_capacity,
             py::arg("page_size") = storage::default_page_size, py::arg("page_count") = storage::default_page_count)
        .def("store", &PyPacketStore::store, "Stores a protected packet; returns (batch, index).")
        .def("load", &PyPacketStore::load)
        .def("close_batch", &PyPacketStore::close_batch)
        .def_property_readonly("stored_bytes", &PyPacketStore::stored_bytes)
        .def_property_readonly("packet_count", &PyPacketStore::packet_count)
        .def_property_readonly("flash_bytes_written", &PyPacketStore::flash_bytes_written);

    py::class_<scenario::ScenarioConfig>(m, "ScenarioConfig")
        .def(py::init<>())
        .def_readwrite("name", &scenario::ScenarioConfig::name)
        .def_readwrite("nodes", &scenario::ScenarioConfig::nodes)
        .def_readwrite("readings", &scenario::ScenarioConfig::readings)
        .def_readwrite("reading_size", &scenario::ScenarioConfig::reading_size)
        .def_readwrite("payload_target", &scenario::ScenarioConfig::payload_target)
        .def_readwrite("buffering", &scenario::ScenarioConfig::buffering)
        .def_readwrite("node_mode", &scenario::ScenarioConfig::node_mode)
        .def_readwrite("storage_mode", &scenario::ScenarioConfig::storage_mode)
        .def_readwrite("batch", &scenario::ScenarioConfig::batch)
        .def_readwrite("collect_every", &scenario::ScenarioConfig::collect_every)
        .def_readwrite("context_loss_after", &scenario::ScenarioConfig::context_loss_after)
        .def_readwrite("recovery_policy", &scenario::ScenarioConfig::recovery_policy)
        .def_readwrite("max_rounds", &scenario::ScenarioConfig::max_rounds)
        .def_readwrite("blind_rounds", &scenario::ScenarioConfig::blind_rounds)
        .def_readwrite("initial_seq", &scenario::ScenarioConfig::initial_seq)
        .def_readwrite("trace", &scenario::ScenarioConfig::trace)
        .def_property(
            "loss", [](const scenario::ScenarioConfig& c) { return c.channel.loss_prob; },
            [](scenario::ScenarioConfig& c, double v) { c.channel.loss_prob = v; })
        .def_property(
            "dup", [](const scenario::ScenarioConfig& c) { return c.channel.dup_prob; },
            [](scenario::ScenarioConfig& c, double v) { c.channel.dup_prob = v; })
        .def_property(
            "reorder", [](const scenario::ScenarioConfig& c) { return c.channel.reorder_window; },
            [](scenario::ScenarioConfig& c, std::size_t v) { c.channel.reorder_window = v; })
        .def_property(
            "seed", [](const scenario::ScenarioConfig& c) { return c.channel.seed; },
            [](scenario::ScenarioConfig& c, std::uint64_t v) { c.channel.seed = v; })
        .def("validate", &scenario::ScenarioConfig::validate);

    m.def("parse_scenario", [](const std::string& text) {
        std::istringstream in(text);
        return scenario::parse_scenario(in);
    });

    py::class_<scenario::ScenarioReport>(m, "ScenarioReport")
        .def_property_readonly("ok", &scenario::ScenarioReport::ok)
        .def_readonly("violations", &scenario::ScenarioReport::violations)
        .def_readonly("rounds", &scenario::ScenarioReport::rounds)
        .def_readonly("trace_csv", &scenario::ScenarioReport::trace_csv)
        .def_property_readonly("nodes",
                               [](const scenario::ScenarioReport& r) {
                                   py::list out;
                                   for (const auto& n : r.nodes) {
                                       py::dict d;
                                       d["node"] = n.node;
                                       d["stored"] = n.stored;
                                       d["stored_payload_bytes"] = n.stored_payload_bytes;
                                       d["collected"] = n.collected;
                                       d["duplicates"] = n.duplicates;
                                       d["left_on_node"] = n.left_on_node;
                                       d["collected_old_context"] = n.collected_old_context;
                                       d["collected_new_context"] = n.collected_new_context;
                                       d["stored_before_loss"] = n.stored_before_loss;
                                       d["flash_bytes_written"] = n.flash_bytes_written;
                                       d["node_ops"] = counters_dict(n.node_ops);
                                       d["send_path_ops"] = counters_dict(n.send_path_ops);
                                       d["send_path_flash_reads"] = n.send_path_flash_reads;
                                       d["refreshes"] = n.refreshes;
                                       out.append(d);
                                   }
                                   return out;
                               })
        .def_property_readonly("received", [](const scenario::ScenarioReport& r) {
            py::list out;
            for (const auto& p : r.received) {
                py::dict d;
                d["node"] = p.node;
                d["kid"] = py_bytes(p.kid);
                d["kid_context"] = optional_bytes(p.kid_context);
                d["seq"] = p.seq;
                d["payload"] = py_bytes(p.payload);
                out.append(d);
            }
            return out;
        });

    m.def("run_scenario", &scenario::run_scenario, py::arg("config"), py::call_guard<py::gil_scoped_release>());

    py::class_<bench::BenchReport>(m, "BenchReport")
        .def_property_readonly("rows", &rows)
        .def("csv", &csv);

    m.def("bench_storage", &bench::bench_storage, py::arg("payloads"),
          py::arg("batch_capacity") = storage::default_batch_capacity,
          py::arg("modes") = std::vector<storage::StorageMode>{storage::StorageMode::full_udp,
                                                               storage::StorageMode::full_oscore,
                                                               storage::StorageMode::optimized});
    m.def(
        "bench_send_path",
        [](std::size_t n, const std::vector<std::size_t>& payloads, const std::vector<node::NodeMode>& modes,
           storage::StorageMode storage_mode, std::size_t batch, const std::optional<std::string>& cost_model,
           std::uint64_t seed) {
            return bench::bench_send_path(n, payloads, modes, storage_mode, batch, cost_model_arg(cost_model), seed);
        },
        "cost_model is the text of a key=value cost model file.", py::arg("packets"), py::arg("payloads"),
        py::arg("modes") = std::vector<node::NodeMode>{node::NodeMode::blend, node::NodeMode::baseline},
        py::arg("storage_mode") = storage::StorageMode::optimized,
        py::arg("batch_capacity") = storage::default_batch_capacity, py::arg("cost_model") = py::none(),
        py::arg("seed") = 1);
    m.def("bench_dtls_compare", &bench::bench_dtls_compare, py::arg("payloads"));
    m.def(
        "scenario_rows",
        [](const scenario::ScenarioReport& r, const std::optional<std::string>& cost_model) {
            return bench::scenario_rows(r, cost_model_arg(cost_model));
        },
        py::arg("report"), py::arg("cost_model") = py::none());
}
