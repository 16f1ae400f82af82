#ifndef ETREE_TOPOLOGY_HPP
#define ETREE_TOPOLOGY_HPP

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace etree {

struct Edge {
    int u = 0;
    int v = 0;
    double delay_ms = 0.0;
};

/// Undirected weighted graph of edge devices. Link weight is the
/// transmission delay in milliseconds. Always connected by construction.
class TopologyGraph {
  public:
    TopologyGraph(int node_count, std::vector<Edge> edges);

    int node_count() const { return node_count_; }
    const std::vector<Edge>& edges() const { return edges_; }

    /// Neighbors of u as (node, delay) pairs, sorted by node id.
    const std::vector<std::pair<int, double>>& neighbors(int u) const;

    bool is_connected() const;

    void save(std::ostream& out) const;
    static TopologyGraph load(std::istream& in);

  private:
    int node_count_;
    std::vector<Edge> edges_;
    std::vector<std::vector<std::pair<int, double>>> adj_;
};

/// N x N matrix of minimum path delays. Symmetric, zero diagonal.
class DelayMatrix {
  public:
    DelayMatrix() = default;
    explicit DelayMatrix(int n) : n_(n), d_(static_cast<size_t>(n) * n, 0.0) {}

    int size() const { return n_; }
    double operator()(int i, int j) const { return d_[static_cast<size_t>(i) * n_ + j]; }
    double& at(int i, int j) { return d_[static_cast<size_t>(i) * n_ + j]; }

  private:
    int n_ = 0;
    std::vector<double> d_;
};

/// Random connected topology: a random spanning tree plus m-(n-1) extra
/// links. Delays are uniform with the given mean/std, clamped at 1 ms.
TopologyGraph generate_random_topology(int n, int m, double delay_mean_ms,
                                       double delay_std_ms, uint64_t seed);

/// One star per class label: a randomly chosen owner becomes the hub and is
/// linked to every other owner of that class. Duplicate links keep the
/// smaller delay. Throws if the resulting graph is disconnected.
TopologyGraph generate_class_centered_topology(
    const std::vector<std::set<int>>& node_classes, double delay_mean_ms,
    double delay_std_ms, uint64_t seed);

DelayMatrix all_pairs_min_delay(const TopologyGraph& g);

/// Minimum-delay path from src to dst; among equal-delay paths, the
/// lexicographically smallest node sequence. Hops = path length - 1.
std::vector<int> shortest_path(const TopologyGraph& g, int src, int dst);

int path_hops(const TopologyGraph& g, int src, int dst);

}  // namespace etree

#endif
