#ifndef ETREE_CLUSTERING_HPP
#define ETREE_CLUSTERING_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "etree/dataset.hpp"
#include "etree/model.hpp"
#include "etree/topology.hpp"

namespace etree {

/// Assignment of a node set into K non-empty clusters, each with a center
/// that is the delay medoid of its members.
struct ClusterSet {
    int K = 0;
    std::vector<int> nodes;       // the clustered node ids, ascending
    std::vector<int> assignment;  // parallel to nodes: cluster index
    std::vector<int> centers;     // per-cluster center node id

    std::vector<std::vector<int>> members() const;
    int cluster_of(int node) const;

    void save(std::ostream& out) const;
};

/// Per-node accuracy of a model pre-trained on the node's own shard,
/// measured on the skewed probe set D_tes.
struct AccuracyProfile {
    std::vector<double> acc;  // indexed by node id
    double acc_avg = 0.0;
    int rounds = 0;
};

struct KmaConfig {
    double delta = 0.05;
    int max_iters = 50;
    uint64_t seed = 0;
};

/// Eq.-style delay medoid: member minimizing the sum of delays to the other
/// members, ties to the smallest node id.
int center_node(std::span<const int> cluster, const DelayMatrix& d);

/// Train a fresh model on every shard for r epochs and score it on d_tes.
/// Nodes are independent; training runs in parallel.
AccuracyProfile pretrain_profile(const NodePartition& partition, const LabeledDataset& ds,
                                 const LabeledDataset& d_tes, int rounds,
                                 const TrainConfig& cfg);

/// Delay-only medoid clustering; structurally the KMA sweep with the
/// accuracy test disabled, so KMA at large delta reproduces it exactly.
ClusterSet kmeans_cluster(const std::vector<int>& nodes, int K, const DelayMatrix& d,
                          uint64_t seed, int max_iters = 50);

/// KMA: per-node sweep over the nearest ceil(K/2) centers, accepting the
/// first cluster whose mean pre-trained accuracy stays within delta of the
/// global mean, with fall-back to the nearest center; centers are updated
/// after every assignment and sweeps repeat until they are stable.
ClusterSet kma_cluster(const std::vector<int>& nodes, int K, const DelayMatrix& d,
                       const AccuracyProfile& profile, const KmaConfig& cfg);

/// Deliberately skewed baseline: nodes sorted by pre-trained accuracy cut
/// into K contiguous blocks, maximizing per-cluster accuracy deviation.
ClusterSet ununiform_kma_cluster(const std::vector<int>& nodes, int K, const DelayMatrix& d,
                                 const AccuracyProfile& profile, const KmaConfig& cfg);

}  // namespace etree

#endif
