#include <doctest.h>

#include <numeric>
#include <sstream>

#include "etree/sim.hpp"
#include "etree/synthetic.hpp"

using namespace etree;

namespace {

struct World {
    TopologyGraph graph;
    DelayMatrix delays;
    LabeledDataset train;
    LabeledDataset test;
    NodePartition partition;
    ETree tree;
    bool has_tree = false;

    World(TopologyGraph g, LabeledDataset tr, LabeledDataset te, NodePartition p)
        : graph(std::move(g)),
          delays(all_pairs_min_delay(graph)),
          train(std::move(tr)),
          test(std::move(te)),
          partition(std::move(p)) {}

    void build_tree(std::vector<int> ks, std::vector<int> freqs, uint64_t seed = 0) {
        TreeBuildOptions opts;
        opts.seed = seed;
        tree = build_etree(graph, delays, ks, freqs, opts);
        has_tree = true;
    }

    SimConfig config(Protocol p) const {
        SimConfig cfg;
        cfg.protocol = p;
        cfg.graph = &graph;
        cfg.delays = &delays;
        cfg.train = &train;
        cfg.test = &test;
        cfg.partition = &partition;
        if (has_tree) cfg.tree = &tree;
        return cfg;
    }
};

World small_world(int n, int m, uint64_t seed, double delay_std = 30.0) {
    SyntheticSpec spec = har_like_spec(seed);
    spec.train_size = 40 * n;
    spec.test_size = 200;
    spec.feature_count = 8;
    spec.separation = 2.0;
    auto [train, test] = make_synthetic_dataset(spec);
    NodePartition p = partition_iid(train, n, seed);
    return World(generate_random_topology(n, m, 50, delay_std, seed), std::move(train),
                 std::move(test), std::move(p));
}

std::string csv_of(const MetricsLog& log) {
    std::ostringstream out;
    log.write_csv(out);
    return out.str();
}

void check_log_shape(const MetricsLog& log) {
    for (size_t i = 1; i < log.rows.size(); ++i) {
        CHECK(log.rows[i].round > log.rows[i - 1].round);
        CHECK(log.rows[i].sim_time_ms >= log.rows[i - 1].sim_time_ms);
        CHECK(log.rows[i].cum_hops >= log.rows[i - 1].cum_hops);
    }
}

}  // namespace

TEST_CASE("protocol names round-trip") {
    for (Protocol p : {Protocol::etree, Protocol::federated, Protocol::gossip,
                       Protocol::individual, Protocol::grouped})
        CHECK(protocol_from_name(protocol_name(p)) == p);
    CHECK_THROWS_AS(protocol_from_name("telepathy"), std::invalid_argument);
}

TEST_CASE("simulation config validation") {
    World w = small_world(5, 8, 1);
    SimConfig cfg = w.config(Protocol::federated);
    cfg.graph = nullptr;
    CHECK_THROWS_AS(run_simulation(cfg), std::invalid_argument);

    cfg = w.config(Protocol::etree);
    CHECK_THROWS_AS(run_simulation(cfg), std::invalid_argument);  // no tree

    cfg = w.config(Protocol::federated);
    cfg.client_fraction = 0.0;
    CHECK_THROWS_AS(run_simulation(cfg), std::invalid_argument);
    cfg.client_fraction = 1.5;
    CHECK_THROWS_AS(run_simulation(cfg), std::invalid_argument);

    NodePartition bad = w.partition;
    bad.shards[2].clear();
    cfg = w.config(Protocol::federated);
    cfg.partition = &bad;
    CHECK_THROWS_AS(run_simulation(cfg), std::invalid_argument);
}

TEST_CASE("one federated round on a star counts 8 hops") {
    // Star with hub 0; every link 500 ms, so a round takes exactly 1000 ms.
    TopologyGraph star(5, {{0, 1, 500}, {0, 2, 500}, {0, 3, 500}, {0, 4, 500}});
    SyntheticSpec spec = har_like_spec(2);
    spec.train_size = 100;
    spec.test_size = 60;
    spec.feature_count = 6;
    auto [train, test] = make_synthetic_dataset(spec);
    NodePartition p = partition_iid(train, 5, 1);
    World w(std::move(star), std::move(train), std::move(test), std::move(p));
    SimConfig cfg = w.config(Protocol::federated);
    cfg.time_budget_ms = 1000.0;
    MetricsLog log = run_federated(cfg);
    REQUIRE(log.rows.size() == 1);
    CHECK(log.rows[0].cum_hops == 8);
    CHECK(communication_cost(log) == 8);
    CHECK(log.leaf_updates_per_round[0] == 5);
}

TEST_CASE("individual training reports zero hops and improves accuracy") {
    World w = small_world(6, 10, 3);
    SimConfig cfg = w.config(Protocol::individual);
    cfg.time_budget_ms = 10000.0;
    MetricsLog log = run_individual(cfg);
    REQUIRE(log.rows.size() == 11);  // round 0 + 10 ticks
    CHECK(log.total_hops() == 0);
    CHECK(log.rows[0].sim_time_ms == 0.0);
    CHECK(log.final_accuracy() > log.rows[0].accuracy);
    check_log_shape(log);
}

TEST_CASE("a lone device approaches the centralized accuracy") {
    SyntheticSpec spec = har_like_spec(4);
    spec.train_size = 300;
    spec.test_size = 200;
    spec.feature_count = 12;
    spec.separation = 2.0;
    auto [train, test] = make_synthetic_dataset(spec);
    NodePartition p;
    p.shards.resize(1);
    p.shards[0].resize(train.size());
    std::iota(p.shards[0].begin(), p.shards[0].end(), 0);
    World w(TopologyGraph(1, {}), train, test, p);
    SimConfig cfg = w.config(Protocol::individual);
    cfg.time_budget_ms = 30000.0;
    MetricsLog log = run_individual(cfg);

    // Centralized oracle: one 30-epoch run over the full training set.
    TrainConfig tc = cfg.train_cfg;
    tc.local_epochs = 30;
    tc.seed = 99;
    ModelParams central = sgd_train(init_model(12, 6), train, p.shards[0], tc);
    double oracle = evaluate(central, test).accuracy;
    CHECK(log.final_accuracy() == doctest::Approx(oracle).epsilon(0.06));
}

TEST_CASE("degenerate one-group etree matches federated byte for byte") {
    // Equal link delays, one leaf group, aggregation frequency 1: the tree
    // collapses to master/clients and must reproduce the exact trace.
    World w = small_world(10, 20, 5, 0.0);
    w.build_tree({1}, {1});
    SimConfig fe = w.config(Protocol::federated);
    fe.time_budget_ms = 10000.0;
    SimConfig et = w.config(Protocol::etree);
    et.time_budget_ms = 10000.0;
    MetricsLog f = run_federated(fe);
    MetricsLog e = run_etree(et);
    REQUIRE_FALSE(f.rows.empty());
    CHECK(csv_of(f) == csv_of(e));
    CHECK(f.leaf_updates_per_round == e.leaf_updates_per_round);
}

TEST_CASE("singleton-group aggregation matches individual training byte for byte") {
    World w = small_world(8, 14, 6);
    w.build_tree({8}, {1});
    SimConfig gr = w.config(Protocol::grouped);
    gr.time_budget_ms = 8000.0;
    SimConfig in = w.config(Protocol::individual);
    in.time_budget_ms = 8000.0;
    MetricsLog g = run_grouped(gr);
    MetricsLog i = run_individual(in);
    REQUIRE(g.rows.size() == i.rows.size());
    CHECK(csv_of(g) == csv_of(i));
    CHECK(g.total_hops() == 0);
}

TEST_CASE("one all-device group matches federated accuracy on a star") {
    TopologyGraph star(5, {{0, 1, 500}, {0, 2, 500}, {0, 3, 500}, {0, 4, 500}});
    SyntheticSpec spec = har_like_spec(7);
    spec.train_size = 200;
    spec.test_size = 100;
    spec.feature_count = 8;
    auto [train, test] = make_synthetic_dataset(spec);
    NodePartition p = partition_iid(train, 5, 2);
    World w(std::move(star), std::move(train), std::move(test), std::move(p));
    w.build_tree({1}, {1});
    SimConfig fe = w.config(Protocol::federated);
    fe.time_budget_ms = 6000.0;
    SimConfig gr = w.config(Protocol::grouped);
    gr.time_budget_ms = 6000.0;
    MetricsLog f = run_federated(fe);
    MetricsLog g = run_grouped(gr);
    // Group cycles last exactly 1000 ms, one per sampling tick, so round k
    // of federated aligns with tick k of grouped.
    REQUIRE(f.rows.size() + 1 == g.rows.size());
    for (size_t k = 0; k < f.rows.size(); ++k) {
        CHECK(f.rows[k].accuracy == g.rows[k + 1].accuracy);
        CHECK(f.rows[k].loss == g.rows[k + 1].loss);
        CHECK(f.rows[k].cum_hops == g.rows[k + 1].cum_hops);
    }
}

TEST_CASE("gossip with zero budget reports only the zero model") {
    World w = small_world(4, 6, 8);
    SimConfig cfg = w.config(Protocol::gossip);
    cfg.time_budget_ms = 0.0;
    MetricsLog log = run_gossip(cfg);
    REQUIRE(log.rows.size() == 1);
    double zero_acc = evaluate(init_model(w.train.feature_count, w.train.class_count),
                               w.test).accuracy;
    CHECK(log.rows[0].accuracy == doctest::Approx(zero_acc));
    CHECK(log.rows[0].cum_hops == 0);
}

TEST_CASE("an isolated pair with one shared sample mirrors individual training") {
    // Both devices hold the same single sample, so every local update is
    // bitwise identical and gossip merges are no-ops.
    SyntheticSpec spec = har_like_spec(9);
    spec.train_size = 60;
    spec.test_size = 60;
    spec.feature_count = 6;
    auto [train, test] = make_synthetic_dataset(spec);
    NodePartition p;
    p.shards = {{0}, {0}};
    World w(TopologyGraph(2, {{0, 1, 500}}), std::move(train), std::move(test), p);
    SimConfig go = w.config(Protocol::gossip);
    go.time_budget_ms = 5000.0;
    go.gossip_cycle_ms = 1000.0;
    SimConfig in = w.config(Protocol::individual);
    in.time_budget_ms = 5000.0;
    MetricsLog g = run_gossip(go);
    MetricsLog i = run_individual(in);
    REQUIRE(g.rows.size() == i.rows.size());
    // Row 0 is the shared zero model; after that gossip trains at cycle
    // starts (t = 0 included), so its row k carries one more local step
    // than individual's row k.
    CHECK(g.rows[0].loss == i.rows[0].loss);
    for (size_t k = 1; k + 1 < g.rows.size(); ++k) {
        CHECK(g.rows[k].accuracy == i.rows[k + 1].accuracy);
        CHECK(g.rows[k].loss == i.rows[k + 1].loss);
    }
}

TEST_CASE("gossip hop counter grows with neighbor fan-out") {
    World w = small_world(6, 9, 10);
    SimConfig cfg = w.config(Protocol::gossip);
    cfg.time_budget_ms = 4000.0;
    MetricsLog log = run_gossip(cfg);
    check_log_shape(log);
    CHECK(log.total_hops() > 0);
    CHECK(log.final_accuracy() > log.rows[0].accuracy);
}

TEST_CASE("etree conservation: leaf updates per round follow the frequencies") {
    World w = small_world(20, 45, 11);
    w.build_tree({4}, {3});
    SimConfig cfg = w.config(Protocol::etree);
    cfg.time_budget_ms = 60000.0;
    MetricsLog log = run_etree(cfg);
    REQUIRE_FALSE(log.rows.empty());
    for (long n : log.leaf_updates_per_round) CHECK(n == 3 * 20);
    check_log_shape(log);

    // With one public node every aggregator also trains it.
    ETree with = attach_public_nodes(w.tree, {5});
    SimConfig pcfg = cfg;
    pcfg.tree = &with;
    MetricsLog plog = run_etree(pcfg);
    REQUIRE_FALSE(plog.rows.empty());
    for (long n : plog.leaf_updates_per_round) CHECK(n == 3 * (20 + 3));
    // Rounds get longer with the extra public traffic, so compare hop cost
    // per round rather than per budget.
    CHECK(static_cast<double>(plog.total_hops()) / plog.rows.size() >
          static_cast<double>(log.total_hops()) / log.rows.size());
}

TEST_CASE("etree uses fewer hops than federated at equal budget") {
    World w = small_world(30, 80, 12);
    w.build_tree({6}, {5});
    SimConfig et = w.config(Protocol::etree);
    et.time_budget_ms = 30000.0;
    SimConfig fe = w.config(Protocol::federated);
    fe.time_budget_ms = 30000.0;
    MetricsLog e = run_etree(et);
    MetricsLog f = run_federated(fe);
    REQUIRE_FALSE(e.rows.empty());
    REQUIRE_FALSE(f.rows.empty());
    CHECK(e.total_hops() < f.total_hops());
}

TEST_CASE("client fraction subsets the per-round participants") {
    World w = small_world(10, 20, 13);
    SimConfig cfg = w.config(Protocol::federated);
    cfg.client_fraction = 0.3;
    cfg.time_budget_ms = 5000.0;
    MetricsLog log = run_federated(cfg);
    REQUIRE_FALSE(log.rows.empty());
    for (long n : log.leaf_updates_per_round) CHECK(n == 3);
}

TEST_CASE("identical configs give byte-identical logs") {
    World w = small_world(12, 25, 14);
    w.build_tree({3}, {5});
    for (Protocol p : {Protocol::etree, Protocol::federated, Protocol::gossip,
                       Protocol::individual, Protocol::grouped}) {
        SimConfig cfg = w.config(p);
        cfg.time_budget_ms = 5000.0;
        cfg.seed = 21;
        std::string a = csv_of(run_simulation(cfg));
        std::string b = csv_of(run_simulation(cfg));
        CHECK(a == b);
        CHECK_FALSE(a.empty());
        // The seed feeds every leaf's batch shuffle, so traces should move.
        SimConfig other = cfg;
        other.seed = 22;
        std::string c = csv_of(run_simulation(other));
        CHECK(a != c);
    }
}

TEST_CASE("single-node etree behaves like individual training") {
    SyntheticSpec spec = har_like_spec(15);
    spec.train_size = 80;
    spec.test_size = 60;
    spec.feature_count = 6;
    auto [train, test] = make_synthetic_dataset(spec);
    NodePartition p;
    p.shards.resize(1);
    p.shards[0].resize(train.size());
    std::iota(p.shards[0].begin(), p.shards[0].end(), 0);
    World w(TopologyGraph(1, {}), std::move(train), std::move(test), p);
    w.build_tree({1}, {1});
    SimConfig et = w.config(Protocol::etree);
    et.time_budget_ms = 5000.0;
    SimConfig in = w.config(Protocol::individual);
    in.time_budget_ms = 5000.0;
    MetricsLog e = run_etree(et);
    MetricsLog i = run_individual(in);
    REQUIRE(e.rows.size() + 1 == i.rows.size());  // individual logs round 0
    for (size_t k = 0; k < e.rows.size(); ++k) {
        CHECK(e.rows[k].accuracy == i.rows[k + 1].accuracy);
        CHECK(e.rows[k].loss == i.rows[k + 1].loss);
    }
    CHECK(e.total_hops() == 0);
}
