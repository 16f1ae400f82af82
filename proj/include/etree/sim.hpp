#ifndef ETREE_SIM_HPP
#define ETREE_SIM_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "etree/dataset.hpp"
#include "etree/model.hpp"
#include "etree/topology.hpp"
#include "etree/tree.hpp"

namespace etree {

enum class Protocol { etree, federated, gossip, individual, grouped };

std::string protocol_name(Protocol p);
Protocol protocol_from_name(const std::string& name);

struct SimConfig {
    Protocol protocol = Protocol::federated;
    const TopologyGraph* graph = nullptr;
    const DelayMatrix* delays = nullptr;
    const LabeledDataset* train = nullptr;
    const LabeledDataset* test = nullptr;
    const NodePartition* partition = nullptr;
    const ETree* tree = nullptr;  // etree / grouped only

    TrainConfig train_cfg;
    double client_fraction = 1.0;    // federated
    double compute_time_ms = 0.0;    // per local update
    double time_budget_ms = 30000.0;
    double sample_interval_ms = 1000.0;  // async metric sampling
    double gossip_cycle_ms = 500.0;      // gossip train/send cadence
    // Per-model ingress cost at an aggregating node: receiving each child
    // model from a *different* node occupies the aggregator for this long,
    // so wide fan-ins (an FL master with 100 clients) serialize while
    // small parallel groups do not. Default off.
    double serialize_ms = 0.0;
    uint64_t seed = 1;
};

struct RoundRecord {
    int round = 0;
    double sim_time_ms = 0.0;
    double accuracy = 0.0;
    double loss = 0.0;
    long cum_hops = 0;
};

struct MetricsLog {
    std::vector<RoundRecord> rows;
    std::vector<long> leaf_updates_per_round;  // tree/federated bookkeeping

    double final_accuracy() const;
    long total_hops() const;
    void write_csv(std::ostream& out) const;
};

/// Cumulative shortest-path hop count over all messages of a finished run.
long communication_cost(const MetricsLog& log);

MetricsLog run_simulation(const SimConfig& cfg);

MetricsLog run_etree(const SimConfig& cfg);
MetricsLog run_federated(const SimConfig& cfg);
MetricsLog run_gossip(const SimConfig& cfg);
MetricsLog run_individual(const SimConfig& cfg);
MetricsLog run_grouped(const SimConfig& cfg);

}  // namespace etree

#endif
