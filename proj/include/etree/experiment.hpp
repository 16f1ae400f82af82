#ifndef ETREE_EXPERIMENT_HPP
#define ETREE_EXPERIMENT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "etree/sim.hpp"

namespace etree {

/// One experiment: dataset + distribution + topology + tree + protocol
/// sweep, executed per seed. Serialized as JSON (see parse/serialize).
struct ExperimentConfig {
    // dataset
    std::string train_path;
    std::string test_path;
    int feature_count = 561;
    bool skip_header = false;

    // distribution: iid | noniid-k | noniid-sorted
    std::string distribution = "iid";
    int classes_per_node = 4;

    // topology: random | class-centered | file
    std::string topology_kind = "random";
    int nodes = 100;
    int links = 300;
    double delay_mean_ms = 50.0;
    double delay_std_ms = 50.0;
    std::string topology_path;

    // tree
    std::vector<int> layer_ks{20};
    std::vector<int> frequencies{5};
    std::string cluster_algo = "kmeans";  // kmeans | kma | ununiform-kma
    double kma_delta = 0.05;
    int pretrain_rounds = 5;
    double gamma = 0.0;  // public-node candidate fraction; 0 disables

    // skewed probe set
    int dtes_size = 1000;
    std::vector<double> dtes_weights;  // empty -> default_skew_weights

    // runs
    std::vector<std::string> protocols;
    double learning_rate = 0.02;
    int local_epochs = 1;
    int batch_size = 10;
    double time_budget_ms = 30000.0;
    double client_fraction = 1.0;
    double compute_time_ms = 0.0;
    double serialize_ms = 0.0;
    double gossip_cycle_ms = 500.0;
    double sample_interval_ms = 1000.0;
    std::vector<uint64_t> seeds{1, 2, 3};
    std::string output_dir = "out";

    bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& json_text);
std::string serialize_config(const ExperimentConfig& cfg);
ExperimentConfig load_config_file(const std::string& path);

/// Throws std::invalid_argument naming the offending field. Checks ranges
/// and that every referenced file exists; nothing is written on failure.
void validate_config(const ExperimentConfig& cfg);

struct RunSummary {
    std::string protocol;
    std::string distribution;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    double mean_hops = 0.0;
};

/// Pre-built world for one seed (topology, partition, profile, tree).
struct SeedWorld {
    TopologyGraph graph;
    DelayMatrix delays;
    NodePartition partition;
    AccuracyProfile profile;  // empty unless needed
    ETree tree;
    bool has_tree = false;
};

SeedWorld build_world(const ExperimentConfig& cfg, const LabeledDataset& train,
                      const LabeledDataset& test, uint64_t seed);

/// Run every (protocol x seed), write one CSV per run plus summary.csv.
std::vector<RunSummary> run_experiment(const ExperimentConfig& cfg);

/// Five-protocol comparison under IID and NonIID(4 classes) at the desk
/// scale; prints a comparison table and returns its rows.
std::vector<RunSummary> replicate_table3(const std::string& data_dir,
                                         const std::vector<uint64_t>& seeds,
                                         const std::string& output_dir);

struct ClusterEvalRow {
    std::string algo;  // kma | kmeans | ununiform-kma
    double delta = 0.0;
    uint64_t seed = 0;
    double final_accuracy = 0.0;
};

/// KMA delta sweep against the K-Means and Ununiform-KMA baselines for the
/// configured topology; writes cluster_eval.csv into the output dir.
std::vector<ClusterEvalRow> cluster_eval(const ExperimentConfig& cfg);

}  // namespace etree

#endif
