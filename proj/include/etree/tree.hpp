#ifndef ETREE_TREE_HPP
#define ETREE_TREE_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <vector>

#include "etree/clustering.hpp"
#include "etree/topology.hpp"

namespace etree {

/// Layered aggregation structure. layers[0] holds every device id; each
/// layer above holds the centers of the previous layer's clusters; the top
/// layer is the single root. frequencies[l] is the number of child
/// aggregations a node of layer l+1 performs per upward send (the root's
/// own cadence is one global aggregation per round).
struct ETree {
    std::vector<std::vector<int>> layers;
    std::vector<ClusterSet> clusters;  // clusters[l] groups layers[l] into layers[l+1]
    std::vector<int> frequencies;      // parallel to clusters
    std::set<int> public_nodes;        // leaves attached to every layer-1 aggregator
    int root = -1;

    int layer_count() const { return static_cast<int>(layers.size()); }

    /// Parents of `node` at layer `layer` (0-based). A public leaf has all
    /// layer-1 aggregators as parents; anyone else exactly one.
    std::vector<int> parents(int layer, int node) const;

    /// Children of aggregator `node` at layer `layer` >= 1, ascending ids.
    /// Includes every public leaf when layer == 1.
    std::vector<int> children(int layer, int node) const;

    void save(std::ostream& out) const;
};

enum class ClusterAlgo { kmeans, kma, ununiform_kma };

struct TreeBuildOptions {
    ClusterAlgo algo = ClusterAlgo::kmeans;
    KmaConfig kma;                               // delta / max_iters / seed
    const AccuracyProfile* profile = nullptr;    // required for kma / ununiform
    uint64_t seed = 0;
    std::optional<ClusterSet> explicit_leaf_clusters;  // bypass layer-1 clustering
};

/// Bottom-up construction: cluster all devices into layer_ks[0] groups,
/// their centers into layer_ks[1] groups, and so on; the medoid of the last
/// center set becomes the root. Upper layers always use delay-only
/// clustering (profiles exist only for leaves).
ETree build_etree(const TopologyGraph& g, const DelayMatrix& d,
                  const std::vector<int>& layer_ks, const std::vector<int>& frequencies,
                  const TreeBuildOptions& opts);

struct PublicNodeConfig {
    double gamma = 0.1;  // candidate fraction, in (0,1)
    double delta = 0.05;
};

/// Public-node selection: candidates are the ceil(gamma*N) nodes with the
/// smallest mean delay to the cluster centers; a candidate is accepted iff,
/// after tentatively joining every cluster it is absent from, all K cluster
/// accuracy means stay within delta of the global mean. Accepted joins
/// persist for later candidates.
std::set<int> select_public_nodes(const ClusterSet& clusters, const AccuracyProfile& profile,
                                  const DelayMatrix& d, const PublicNodeConfig& cfg);

/// Give each public leaf every layer-1 aggregator as a parent.
ETree attach_public_nodes(const ETree& tree, const std::set<int>& publics);

}  // namespace etree

#endif
