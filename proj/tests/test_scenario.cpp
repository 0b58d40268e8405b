#include <gtest/gtest.h>

#include <sstream>

#include "blend/scenario.hpp"
#include "test_support.hpp"

using namespace blend;
using namespace blend::scenario;
using blend::test::error_code;

namespace {

ScenarioConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_scenario(in);
}

std::string describe(const ScenarioReport& r) {
    std::string out;
    for (const auto& v : r.violations) out += v + "\n";
    return out;
}

}  // namespace

TEST(ScenarioFile, ParsesEveryKey) {
    const auto c = parse(
        "# comment\n"
        "name = field\n"
        "nodes=3\nreadings=40\nreading_size=10\npayload_target=50\n"
        "buffering=allowed\nnode_mode=baseline\nstorage_mode=full_udp\nbatch=10\n"
        "loss=0.1  # trailing comment\ndup=0.05\nreorder=4\nseed=99\n"
        "collect_every=20\nrecovery_policy=blind_trigger\nmax_rounds=50\nblind_rounds=2\n"
        "initial_seq=0x10\ntrace=true\n");
    EXPECT_EQ(c.name, "field");
    EXPECT_EQ(c.nodes, 3u);
    EXPECT_EQ(c.readings, 40u);
    EXPECT_EQ(c.reading_size, 10u);
    EXPECT_EQ(c.payload_target, 50u);
    EXPECT_EQ(c.buffering, node::Buffering::allowed);
    EXPECT_EQ(c.node_mode, node::NodeMode::baseline);
    EXPECT_EQ(c.storage_mode, storage::StorageMode::full_udp);
    EXPECT_EQ(c.batch, 10u);
    EXPECT_DOUBLE_EQ(c.channel.loss_prob, 0.1);
    EXPECT_DOUBLE_EQ(c.channel.dup_prob, 0.05);
    EXPECT_EQ(c.channel.reorder_window, 4u);
    EXPECT_EQ(c.channel.seed, 99u);
    EXPECT_EQ(c.collect_every, 20u);
    EXPECT_EQ(c.recovery_policy, keymgmt::RecoveryPolicy::blind_trigger);
    EXPECT_EQ(c.max_rounds, 50u);
    EXPECT_EQ(c.blind_rounds, 2u);
    EXPECT_EQ(c.initial_seq, 16u);
    EXPECT_TRUE(c.trace);
    EXPECT_FALSE(c.context_loss_after);
}

TEST(ScenarioFile, RejectsBadInput) {
    EXPECT_EQ(error_code([] { parse("readings\n"); }), Errc::config);
    EXPECT_EQ(error_code([] { parse("colour=blue\n"); }), Errc::config);
    EXPECT_EQ(error_code([] { parse("readings=-3\n"); }), Errc::config);
    EXPECT_EQ(error_code([] { parse("loss=lots\n"); }), Errc::config);
    EXPECT_EQ(error_code([] { parse("loss=1.5\n"); }), Errc::config);
    EXPECT_EQ(error_code([] { parse("reading_size=57\n"); }), Errc::config);
    EXPECT_EQ(error_code([] { parse("storage_mode=zip\n"); }), Errc::config);
    EXPECT_EQ(error_code([] { parse("node_mode=baseline\ncontext_loss_after=5\n"); }), Errc::config);
    EXPECT_EQ(error_code([] { load_scenario("/nonexistent/scenario.txt"); }), Errc::config);
}

TEST(Scenario, CleanRunInOrder) {
    ScenarioConfig c;
    c.readings = 60;
    const auto r = run_scenario(c);
    ASSERT_TRUE(r.ok()) << describe(r);
    ASSERT_EQ(r.nodes.size(), 1u);
    EXPECT_EQ(r.nodes[0].stored, 60u);
    EXPECT_EQ(r.nodes[0].collected, 60u);
    EXPECT_EQ(r.nodes[0].send_path_ops.seal_count, 0u);
    EXPECT_EQ(r.nodes[0].send_path_ops.open_count, 0u);
    EXPECT_EQ(r.received.size(), 60u);
}

TEST(Scenario, BufferedMultiNode) {
    ScenarioConfig c;
    c.nodes = 3;
    c.readings = 80;
    c.buffering = node::Buffering::allowed;
    c.collect_every = 30;
    const auto r = run_scenario(c);
    ASSERT_TRUE(r.ok()) << describe(r);
    for (const auto& n : r.nodes) {
        EXPECT_EQ(n.stored_payload_bytes, 80u * 6u);
        EXPECT_EQ(n.stored, 10u);  // 8 readings per 48-byte packet
    }
}

TEST(Scenario, ExactlyOnceUnderFaults) {
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        ScenarioConfig c;
        c.readings = 60;
        c.channel = {0.2, 0.2, 8, seed};
        c.collect_every = 20;
        const auto r = run_scenario(c);
        EXPECT_TRUE(r.ok()) << "seed " << seed << "\n" << describe(r);
        EXPECT_EQ(r.nodes[0].duplicates, 0u);
    }
}

TEST(Scenario, BaselineUnderFaults) {
    ScenarioConfig c;
    c.node_mode = node::NodeMode::baseline;
    c.readings = 50;
    c.channel = {0.1, 0.1, 3, 5};
    const auto r = run_scenario(c);
    ASSERT_TRUE(r.ok()) << describe(r);
    EXPECT_EQ(r.nodes[0].send_path_ops.seal_count, 50u);
    EXPECT_EQ(r.nodes[0].send_path_ops.open_count, 50u);
}

TEST(Scenario, RecoveryBothPolicies) {
    for (auto policy : {keymgmt::RecoveryPolicy::request_reauth, keymgmt::RecoveryPolicy::blind_trigger}) {
        ScenarioConfig c;
        c.readings = 60;
        c.context_loss_after = 30;
        c.recovery_policy = policy;
        c.channel = {0.1, 0.05, 2, 11};
        const auto r = run_scenario(c);
        ASSERT_TRUE(r.ok()) << keymgmt::to_string(policy) << "\n" << describe(r);
        EXPECT_EQ(r.nodes[0].stored_before_loss, 30u);
        EXPECT_EQ(r.nodes[0].collected_old_context, 30u);
        EXPECT_EQ(r.nodes[0].collected_new_context, 30u);
    }
}

TEST(Scenario, CrossesRefresh) {
    ScenarioConfig c;
    c.readings = 40;
    c.initial_seq = storage::max_batch_start_seq - 16;
    const auto r = run_scenario(c);
    ASSERT_TRUE(r.ok()) << describe(r);
    EXPECT_EQ(r.nodes[0].refreshes, 1u);
    std::size_t with_context = 0;
    for (const auto& p : r.received) with_context += p.kid_context ? 1 : 0;
    EXPECT_EQ(with_context, 24u);
}

TEST(Scenario, TraceOnRequest) {
    ScenarioConfig c;
    c.readings = 3;
    EXPECT_TRUE(run_scenario(c).trace_csv.empty());
    c.trace = true;
    const auto r = run_scenario(c);
    EXPECT_EQ(r.trace_csv.rfind("step,channel,event,length,hex\n", 0), 0u);
    EXPECT_NE(r.trace_csv.find("node0:a>b,deliver"), std::string::npos);
}

TEST(Scenario, Deterministic) {
    ScenarioConfig c;
    c.readings = 30;
    c.channel = {0.2, 0.1, 4, 77};
    const auto a = run_scenario(c);
    const auto b = run_scenario(c);
    ASSERT_EQ(a.received.size(), b.received.size());
    for (std::size_t i = 0; i < a.received.size(); ++i) {
        EXPECT_EQ(a.received[i].seq, b.received[i].seq);
        EXPECT_EQ(a.received[i].payload, b.received[i].payload);
    }
    EXPECT_EQ(a.rounds, b.rounds);
}
