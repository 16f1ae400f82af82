#include "etree/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace etree {

std::vector<int> ETree::parents(int layer, int node) const {
    if (layer < 0 || layer >= layer_count() - 1)
        throw std::invalid_argument("ETree::parents: layer out of range");
    if (layer == 0 && public_nodes.count(node)) {
        return layers[1];
    }
    const ClusterSet& cs = clusters[layer];
    return {cs.centers[cs.cluster_of(node)]};
}

std::vector<int> ETree::children(int layer, int node) const {
    if (layer < 1 || layer >= layer_count())
        throw std::invalid_argument("ETree::children: layer out of range");
    const ClusterSet& cs = clusters[layer - 1];
    auto mem = cs.members();
    int k = -1;
    for (int j = 0; j < cs.K; ++j)
        if (cs.centers[j] == node) k = j;
    if (k < 0) throw std::invalid_argument("ETree::children: node is not a layer center");
    std::vector<int> out = mem[k];
    if (layer == 1) {
        for (int p : public_nodes)
            if (!std::binary_search(out.begin(), out.end(), p)) out.push_back(p);
    }
    std::sort(out.begin(), out.end());
    return out;
}

void ETree::save(std::ostream& out) const {
    for (int l = 0; l < layer_count(); ++l) {
        out << "layer " << l;
        if (l > 0 && l - 1 < static_cast<int>(frequencies.size()))
            out << " a=" << frequencies[l - 1];
        out << "\n";
        for (int n : layers[l]) {
            out << "  " << n;
            if (l + 1 < layer_count()) {
                out << " ->";
                for (int p : parents(l, n)) out << " " << p;
            }
            out << "\n";
        }
    }
    if (!public_nodes.empty()) {
        out << "public:";
        for (int p : public_nodes) out << " " << p;
        out << "\n";
    }
}

ETree build_etree(const TopologyGraph& g, const DelayMatrix& d,
                  const std::vector<int>& layer_ks, const std::vector<int>& frequencies,
                  const TreeBuildOptions& opts) {
    if (layer_ks.empty()) throw std::invalid_argument("build_etree: need at least one K");
    if (frequencies.size() != layer_ks.size())
        throw std::invalid_argument("build_etree: frequencies size must match layer_ks");
    for (int a : frequencies)
        if (a < 1) throw std::invalid_argument("build_etree: frequencies must be >= 1");
    int prev = g.node_count();
    for (int k : layer_ks) {
        if (k < 1 || k > prev)
            throw std::invalid_argument("build_etree: infeasible K sequence");
        prev = k;
    }

    ETree tree;
    tree.frequencies = frequencies;
    std::vector<int> current(g.node_count());
    std::iota(current.begin(), current.end(), 0);
    tree.layers.push_back(current);

    for (size_t l = 0; l < layer_ks.size(); ++l) {
        ClusterSet cs;
        if (l == 0 && opts.explicit_leaf_clusters) {
            cs = *opts.explicit_leaf_clusters;
            if (cs.nodes.size() != current.size())
                throw std::invalid_argument("build_etree: explicit clusters node set mismatch");
        } else if (l == 0 && opts.algo == ClusterAlgo::kma) {
            if (!opts.profile) throw std::invalid_argument("build_etree: kma needs a profile");
            KmaConfig kc = opts.kma;
            kc.seed = opts.seed;
            cs = kma_cluster(current, layer_ks[l], d, *opts.profile, kc);
        } else if (l == 0 && opts.algo == ClusterAlgo::ununiform_kma) {
            if (!opts.profile)
                throw std::invalid_argument("build_etree: ununiform kma needs a profile");
            cs = ununiform_kma_cluster(current, layer_ks[l], d, *opts.profile, opts.kma);
        } else {
            cs = kmeans_cluster(current, layer_ks[l], d, opts.seed + l);
        }
        tree.clusters.push_back(cs);
        current = cs.centers;
        std::sort(current.begin(), current.end());
        tree.layers.push_back(current);
    }

    // Collapse the final center set to a single root via the delay medoid.
    if (current.size() > 1) {
        ClusterSet top;
        top.K = 1;
        top.nodes = current;
        top.assignment.assign(current.size(), 0);
        top.centers = {center_node(current, d)};
        tree.clusters.push_back(top);
        tree.frequencies.push_back(1);
        tree.layers.push_back(top.centers);
        current = top.centers;
    }
    tree.root = current.front();
    return tree;
}

std::set<int> select_public_nodes(const ClusterSet& clusters, const AccuracyProfile& profile,
                                  const DelayMatrix& d, const PublicNodeConfig& cfg) {
    if (cfg.gamma <= 0 || cfg.gamma >= 1)
        throw std::invalid_argument("public nodes: gamma must be in (0,1)");
    const int K = clusters.K;
    const int N = static_cast<int>(clusters.nodes.size());
    for (int n : clusters.nodes)
        if (n < 0 || n >= static_cast<int>(profile.acc.size()))
            throw std::invalid_argument("public nodes: profile missing node");

    // r_j = mean delay to the cluster centers.
    std::vector<std::pair<double, int>> ranked;
    ranked.reserve(N);
    for (int node : clusters.nodes) {
        double r = 0.0;
        for (int k = 0; k < K; ++k) r += d(node, clusters.centers[k]);
        ranked.emplace_back(r / K, node);
    }
    std::sort(ranked.begin(), ranked.end());
    int candidates = static_cast<int>(std::ceil(cfg.gamma * N));
    candidates = std::min(candidates, N);

    auto mem = clusters.members();
    std::vector<double> acc_sum(K, 0.0);
    std::vector<int> count(K, 0);
    for (int k = 0; k < K; ++k) {
        count[k] = static_cast<int>(mem[k].size());
        for (int n : mem[k]) acc_sum[k] += profile.acc[n];
    }

    std::set<int> publics;
    for (int c = 0; c < candidates; ++c) {
        int node = ranked[c].second;
        int home = clusters.cluster_of(node);
        bool ok = true;
        for (int k = 0; k < K; ++k) {
            double s = acc_sum[k], cnt = count[k];
            if (k != home) {
                s += profile.acc[node];
                cnt += 1;
            }
            if (std::abs(s / cnt - profile.acc_avg) >= cfg.delta) {
                ok = false;
                break;
            }
        }
        if (ok) {
            publics.insert(node);
            for (int k = 0; k < K; ++k) {
                if (k == home) continue;
                acc_sum[k] += profile.acc[node];
                count[k] += 1;
            }
        }
    }
    return publics;
}

ETree attach_public_nodes(const ETree& tree, const std::set<int>& publics) {
    const auto& leaves = tree.layers.front();
    for (int p : publics)
        if (!std::binary_search(leaves.begin(), leaves.end(), p))
            throw std::invalid_argument("attach_public_nodes: not a leaf node");
    ETree out = tree;
    out.public_nodes.insert(publics.begin(), publics.end());
    return out;
}

}  // namespace etree
