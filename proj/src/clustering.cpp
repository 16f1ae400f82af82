#include "etree/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

namespace etree {

std::vector<std::vector<int>> ClusterSet::members() const {
    std::vector<std::vector<int>> out(K);
    for (size_t i = 0; i < nodes.size(); ++i) out[assignment[i]].push_back(nodes[i]);
    return out;
}

int ClusterSet::cluster_of(int node) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), node);
    if (it == nodes.end() || *it != node)
        throw std::invalid_argument("cluster_of: node not in cluster set");
    return assignment[it - nodes.begin()];
}

void ClusterSet::save(std::ostream& out) const {
    auto mem = members();
    for (int k = 0; k < K; ++k) {
        out << k << ":";
        for (int n : mem[k]) out << " " << n;
        out << "; center=" << centers[k] << "\n";
    }
}

int center_node(std::span<const int> cluster, const DelayMatrix& d) {
    if (cluster.empty()) throw std::invalid_argument("center_node: empty cluster");
    int best = -1;
    double best_sum = std::numeric_limits<double>::infinity();
    for (int i : cluster) {
        double sum = 0.0;
        for (int j : cluster)
            if (j != i) sum += d(i, j);
        if (sum < best_sum || (sum == best_sum && i < best)) {
            best = i;
            best_sum = sum;
        }
    }
    return best;
}

AccuracyProfile pretrain_profile(const NodePartition& partition, const LabeledDataset& ds,
                                 const LabeledDataset& d_tes, int rounds,
                                 const TrainConfig& cfg) {
    if (d_tes.size() == 0) throw std::invalid_argument("pretrain_profile: empty D_tes");
    const int n = partition.node_count();
    for (const auto& shard : partition.shards)
        if (shard.empty()) throw std::invalid_argument("pretrain_profile: empty shard");

    AccuracyProfile profile;
    profile.rounds = rounds;
    profile.acc.resize(n);
    TrainConfig node_cfg = cfg;
    node_cfg.local_epochs = rounds;
#pragma omp parallel for schedule(dynamic)
    for (int node = 0; node < n; ++node) {
        ModelParams m = init_model(ds.feature_count, ds.class_count);
        m = sgd_train(m, ds, partition.shards[node], node_cfg);
        profile.acc[node] = evaluate_serial(m, d_tes).accuracy;
    }
    profile.acc_avg = std::accumulate(profile.acc.begin(), profile.acc.end(), 0.0) / n;
    return profile;
}

namespace {

struct SweepState {
    std::vector<int> nodes;                  // sorted node ids
    std::vector<int> assignment;             // parallel to nodes, -1 = unassigned
    std::vector<std::vector<int>> members;   // per cluster, node ids
    std::vector<int> centers;                // per cluster, node id
    std::vector<double> acc_sum;             // per cluster

    int index_of(int node) const {
        return static_cast<int>(std::lower_bound(nodes.begin(), nodes.end(), node) -
                                nodes.begin());
    }
};

void refresh_center(SweepState& st, int k, const DelayMatrix& d) {
    if (!st.members[k].empty()) st.centers[k] = center_node(st.members[k], d);
}

void assign_node(SweepState& st, int idx, int k, const AccuracyProfile* profile,
                 const DelayMatrix& d) {
    st.members[k].push_back(st.nodes[idx]);
    st.assignment[idx] = k;
    if (profile) st.acc_sum[k] += profile->acc[st.nodes[idx]];
    refresh_center(st, k, d);
}

void unassign_node(SweepState& st, int idx, const AccuracyProfile* profile,
                   const DelayMatrix& d) {
    int k = st.assignment[idx];
    if (k < 0) return;
    auto& mem = st.members[k];
    mem.erase(std::find(mem.begin(), mem.end(), st.nodes[idx]));
    if (profile) st.acc_sum[k] -= profile->acc[st.nodes[idx]];
    st.assignment[idx] = -1;
    refresh_center(st, k, d);
}

// Shared sweep: KMA when profile != nullptr, plain delay medoid clustering
// otherwise. Node order is ascending id; centers update after every
// assignment; sweeps repeat until the center set is stable.
ClusterSet sweep_cluster(const std::vector<int>& input_nodes, int K, const DelayMatrix& d,
                         const AccuracyProfile* profile, double delta, uint64_t seed,
                         int max_iters) {
    if (K < 1) throw std::invalid_argument("clustering: K must be >= 1");
    if (K > static_cast<int>(input_nodes.size()))
        throw std::invalid_argument("clustering: K exceeds node count");
    if (profile)
        for (int n : input_nodes)
            if (n < 0 || n >= static_cast<int>(profile->acc.size()))
                throw std::invalid_argument("clustering: profile missing node");

    SweepState st;
    st.nodes = input_nodes;
    std::sort(st.nodes.begin(), st.nodes.end());
    st.assignment.assign(st.nodes.size(), -1);
    st.members.resize(K);
    st.acc_sum.assign(K, 0.0);

    std::mt19937_64 rng(seed);
    std::vector<int> pool = st.nodes;
    std::shuffle(pool.begin(), pool.end(), rng);
    st.centers.assign(pool.begin(), pool.begin() + K);
    // Each cluster starts holding its own center node; the sweep re-places
    // every node (centers included) from there.
    for (int k = 0; k < K; ++k) assign_node(st, st.index_of(st.centers[k]), k, profile, d);

    const int half = (K + 1) / 2;  // ceil(K/2) candidate centers per node
    for (int iter = 0; iter < max_iters; ++iter) {
        std::vector<int> centers_before = st.centers;
        for (size_t idx = 0; idx < st.nodes.size(); ++idx) {
            int node = st.nodes[idx];
            unassign_node(st, static_cast<int>(idx), profile, d);
            std::vector<int> order(K);
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                double da = d(node, st.centers[a]), db = d(node, st.centers[b]);
                if (da != db) return da < db;
                return st.centers[a] < st.centers[b];
            });
            // Candidates are the nearest ceil(K/2) centers, extended through
            // delay ties at the boundary so equal-delay centers are treated
            // alike.
            int cand = half;
            while (cand < K &&
                   d(node, st.centers[order[cand]]) == d(node, st.centers[order[cand - 1]]))
                ++cand;
            int chosen = -1;
            if (profile) {
                for (int c = 0; c < cand; ++c) {
                    int k = order[c];
                    double acc_k = (st.acc_sum[k] + profile->acc[node]) /
                                   (st.members[k].size() + 1);
                    if (std::abs(acc_k - profile->acc_avg) < delta) {
                        chosen = k;
                        break;
                    }
                }
            }
            if (chosen < 0) chosen = order[0];  // nearest center fallback
            assign_node(st, static_cast<int>(idx), chosen, profile, d);
        }
        if (st.centers == centers_before) break;
    }

    // Repair empty clusters: steal the member farthest from the center of
    // the largest cluster.
    for (int k = 0; k < K; ++k) {
        while (st.members[k].empty()) {
            int biggest = 0;
            for (int j = 1; j < K; ++j)
                if (st.members[j].size() > st.members[biggest].size()) biggest = j;
            if (st.members[biggest].size() < 2)
                throw std::runtime_error("clustering: cannot repair empty cluster");
            int victim = st.members[biggest].front();
            for (int n : st.members[biggest])
                if (d(n, st.centers[biggest]) > d(victim, st.centers[biggest]) ||
                    (d(n, st.centers[biggest]) == d(victim, st.centers[biggest]) && n < victim))
                    victim = n;
            unassign_node(st, st.index_of(victim), profile, d);
            assign_node(st, st.index_of(victim), k, profile, d);
        }
    }

    ClusterSet cs;
    cs.K = K;
    cs.nodes = std::move(st.nodes);
    cs.assignment = std::move(st.assignment);
    cs.centers = std::move(st.centers);
    return cs;
}

}  // namespace

ClusterSet kmeans_cluster(const std::vector<int>& nodes, int K, const DelayMatrix& d,
                          uint64_t seed, int max_iters) {
    return sweep_cluster(nodes, K, d, nullptr, 0.0, seed, max_iters);
}

ClusterSet kma_cluster(const std::vector<int>& nodes, int K, const DelayMatrix& d,
                       const AccuracyProfile& profile, const KmaConfig& cfg) {
    if (cfg.delta <= 0) throw std::invalid_argument("kma: delta must be > 0");
    return sweep_cluster(nodes, K, d, &profile, cfg.delta, cfg.seed, cfg.max_iters);
}

ClusterSet ununiform_kma_cluster(const std::vector<int>& nodes, int K, const DelayMatrix& d,
                                 const AccuracyProfile& profile, const KmaConfig& cfg) {
    (void)cfg;
    if (K < 1 || K > static_cast<int>(nodes.size()))
        throw std::invalid_argument("ununiform kma: bad K");
    std::vector<int> sorted = nodes;
    std::sort(sorted.begin(), sorted.end());
    for (int n : sorted)
        if (n < 0 || n >= static_cast<int>(profile.acc.size()))
            throw std::invalid_argument("ununiform kma: profile missing node");
    std::vector<int> by_acc = sorted;
    std::stable_sort(by_acc.begin(), by_acc.end(), [&](int a, int b) {
        if (profile.acc[a] != profile.acc[b]) return profile.acc[a] < profile.acc[b];
        return a < b;
    });

    ClusterSet cs;
    cs.K = K;
    cs.nodes = sorted;
    cs.assignment.assign(sorted.size(), -1);
    cs.centers.resize(K);
    int n = static_cast<int>(sorted.size());
    int base = n / K, rem = n % K, pos = 0;
    for (int k = 0; k < K; ++k) {
        int take = base + (k < rem ? 1 : 0);
        std::vector<int> block(by_acc.begin() + pos, by_acc.begin() + pos + take);
        pos += take;
        for (int node : block) {
            int idx = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), node) -
                                       sorted.begin());
            cs.assignment[idx] = k;
        }
        cs.centers[k] = center_node(block, d);
    }
    return cs;
}

}  // namespace etree
