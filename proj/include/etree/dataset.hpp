#ifndef ETREE_DATASET_HPP
#define ETREE_DATASET_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace etree {

/// Feature matrix (row-major, S x F) plus dense 0..C-1 class labels.
struct LabeledDataset {
    int feature_count = 0;
    int class_count = 0;
    std::vector<double> features;  // size() == samples * feature_count
    std::vector<int> labels;
    std::vector<int> label_map;  // original label for each dense class id

    int size() const { return static_cast<int>(labels.size()); }
    const double* row(int i) const { return features.data() + static_cast<size_t>(i) * feature_count; }

    LabeledDataset subset(const std::vector<int>& indices) const;
    std::vector<int> class_counts() const;
};

/// Per-device shards as sample indices into one LabeledDataset. Shards are
/// pairwise disjoint, non-empty, and together cover every sample.
struct NodePartition {
    std::vector<std::vector<int>> shards;

    int node_count() const { return static_cast<int>(shards.size()); }
};

/// CSV rows: feature_count numeric fields then an integer label. Labels are
/// remapped to a dense 0..C-1 range; the mapping is kept in label_map.
LabeledDataset load_csv_dataset(const std::string& path, int feature_count,
                                bool skip_header = false);

void write_csv_dataset(const LabeledDataset& ds, const std::string& path);

/// Within each class, shuffle and deal round-robin across nodes.
NodePartition partition_iid(const LabeledDataset& ds, int n_nodes, uint64_t seed);

/// Assign each node `classes_per_node` random class labels and split each
/// class's samples evenly among the nodes that were assigned it.
NodePartition partition_noniid_classes_per_node(const LabeledDataset& ds, int n_nodes,
                                                int classes_per_node, uint64_t seed);

/// Sort samples by (label, index) and cut into n contiguous blocks, so each
/// device ends up with samples of only one or two class labels.
NodePartition partition_noniid_sorted(const LabeledDataset& ds, int n_nodes);

/// Class labels present in each node's shard (for class-centered topologies).
std::vector<std::vector<int>> shard_class_sets(const LabeledDataset& ds,
                                               const NodePartition& part);

/// Skewed probe set D_tes: per-class counts from largest-remainder rounding
/// of `class_weights * size`, drawn without replacement.
LabeledDataset sample_skewed_test_set(const LabeledDataset& test, int size,
                                      const std::vector<double>& class_weights,
                                      uint64_t seed);

/// Normalized geometric sequence: clearly skewed, reproducible default.
std::vector<double> default_skew_weights(int class_count);

}  // namespace etree

#endif
