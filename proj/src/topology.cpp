#include "etree/topology.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>

namespace etree {

namespace {

// Delays are quantized to 1/1024 ms so that path sums are exact in double
// arithmetic; shortest-path ties and matrix/oracle comparisons stay exact.
double quantize_delay(double ms) {
    double q = std::round(ms * 1024.0) / 1024.0;
    return std::max(q, 1.0);
}

// Log-normal with the requested mean and standard deviation. Unlike a
// symmetric distribution, its support is strictly positive, so a wide
// spread never produces (clamped) near-zero links whose free multi-hop
// paths would distort routing and hop counts.
double sample_delay(std::mt19937_64& rng, double mean, double std_dev) {
    if (std_dev <= 0.0) return quantize_delay(mean);
    double half_width = std_dev * std::sqrt(3.0);
    std::uniform_real_distribution<double> dist(mean - half_width, mean + half_width);
    return quantize_delay(std::max(1.0, dist(rng)));
}

}  // namespace

TopologyGraph::TopologyGraph(int node_count, std::vector<Edge> edges)
    : node_count_(node_count), edges_(std::move(edges)) {
    if (node_count_ < 1) throw std::invalid_argument("topology: node count must be >= 1");
    adj_.resize(node_count_);
    std::set<std::pair<int, int>> seen;
    for (const Edge& e : edges_) {
        if (e.u < 0 || e.u >= node_count_ || e.v < 0 || e.v >= node_count_)
            throw std::invalid_argument("topology: edge endpoint out of range");
        if (e.u == e.v) throw std::invalid_argument("topology: self-loop");
        if (e.delay_ms < 0) throw std::invalid_argument("topology: negative delay");
        auto key = std::minmax(e.u, e.v);
        if (!seen.insert(key).second)
            throw std::invalid_argument("topology: duplicate edge " + std::to_string(e.u) +
                                        "-" + std::to_string(e.v));
        adj_[e.u].emplace_back(e.v, e.delay_ms);
        adj_[e.v].emplace_back(e.u, e.delay_ms);
    }
    for (auto& nbrs : adj_) std::sort(nbrs.begin(), nbrs.end());
}

const std::vector<std::pair<int, double>>& TopologyGraph::neighbors(int u) const {
    return adj_.at(u);
}

bool TopologyGraph::is_connected() const {
    std::vector<char> vis(node_count_, 0);
    std::vector<int> stack{0};
    vis[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (auto [v, w] : adj_[u]) {
            (void)w;
            if (!vis[v]) {
                vis[v] = 1;
                ++count;
                stack.push_back(v);
            }
        }
    }
    return count == node_count_;
}

void TopologyGraph::save(std::ostream& out) const {
    out << "nodes " << node_count_ << "\n";
    out.precision(std::numeric_limits<double>::max_digits10);
    for (const Edge& e : edges_) out << e.u << " " << e.v << " " << e.delay_ms << "\n";
}

TopologyGraph TopologyGraph::load(std::istream& in) {
    std::string header;
    int n = 0;
    if (!(in >> header >> n) || header != "nodes")
        throw std::runtime_error("topology load: expected 'nodes N' header");
    std::vector<Edge> edges;
    Edge e;
    while (in >> e.u >> e.v >> e.delay_ms) edges.push_back(e);
    return TopologyGraph(n, std::move(edges));
}

TopologyGraph generate_random_topology(int n, int m, double delay_mean_ms,
                                       double delay_std_ms, uint64_t seed) {
    if (n < 2) throw std::invalid_argument("random topology: need n >= 2");
    long long max_m = static_cast<long long>(n) * (n - 1) / 2;
    if (m < n - 1) throw std::invalid_argument("random topology: m < n-1 cannot be connected");
    if (m > max_m) throw std::invalid_argument("random topology: m exceeds n(n-1)/2");

    std::mt19937_64 rng(seed);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    std::vector<Edge> edges;
    std::set<std::pair<int, int>> used;
    // Random spanning tree over a shuffled node order.
    for (int i = 1; i < n; ++i) {
        std::uniform_int_distribution<int> pick(0, i - 1);
        int u = perm[i];
        int v = perm[pick(rng)];
        edges.push_back({u, v, sample_delay(rng, delay_mean_ms, delay_std_ms)});
        used.insert(std::minmax(u, v));
    }
    int extra = m - (n - 1);
    if (extra > 0) {
        std::vector<std::pair<int, int>> pool;
        pool.reserve(static_cast<size_t>(max_m) - used.size());
        for (int u = 0; u < n; ++u)
            for (int v = u + 1; v < n; ++v)
                if (!used.count({u, v})) pool.emplace_back(u, v);
        std::shuffle(pool.begin(), pool.end(), rng);
        for (int i = 0; i < extra; ++i)
            edges.push_back({pool[i].first, pool[i].second,
                             sample_delay(rng, delay_mean_ms, delay_std_ms)});
    }
    return TopologyGraph(n, std::move(edges));
}

TopologyGraph generate_class_centered_topology(
    const std::vector<std::set<int>>& node_classes, double delay_mean_ms,
    double delay_std_ms, uint64_t seed) {
    int n = static_cast<int>(node_classes.size());
    if (n < 2) throw std::invalid_argument("class-centered topology: need >= 2 nodes");

    std::map<int, std::vector<int>> owners;
    for (int i = 0; i < n; ++i)
        for (int c : node_classes[i]) owners[c].push_back(i);

    std::mt19937_64 rng(seed);
    std::map<std::pair<int, int>, double> links;
    for (auto& [cls, own] : owners) {
        (void)cls;
        if (own.size() < 2) continue;
        std::uniform_int_distribution<size_t> pick(0, own.size() - 1);
        int hub = own[pick(rng)];
        for (int other : own) {
            if (other == hub) continue;
            double delay = sample_delay(rng, delay_mean_ms, delay_std_ms);
            auto key = std::minmax(hub, other);
            auto it = links.find(key);
            if (it == links.end())
                links[key] = delay;
            else
                it->second = std::min(it->second, delay);
        }
    }
    std::vector<Edge> edges;
    edges.reserve(links.size());
    for (auto& [key, delay] : links) edges.push_back({key.first, key.second, delay});
    TopologyGraph g(n, std::move(edges));
    if (!g.is_connected())
        throw std::invalid_argument(
            "class-centered topology: per-class stars do not form a connected graph");
    return g;
}

namespace {

std::vector<double> dijkstra(const TopologyGraph& g, int src) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(g.node_count(), inf);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[src] = 0.0;
    pq.emplace(0.0, src);
    while (!pq.empty()) {
        auto [du, u] = pq.top();
        pq.pop();
        if (du > dist[u]) continue;
        for (auto [v, w] : g.neighbors(u)) {
            double nd = du + w;
            if (nd < dist[v]) {
                dist[v] = nd;
                pq.emplace(nd, v);
            }
        }
    }
    return dist;
}

}  // namespace

DelayMatrix all_pairs_min_delay(const TopologyGraph& g) {
    int n = g.node_count();
    DelayMatrix d(n);
    for (int s = 0; s < n; ++s) {
        std::vector<double> dist = dijkstra(g, s);
        for (int t = 0; t < n; ++t) {
            if (!std::isfinite(dist[t]))
                throw std::runtime_error("all_pairs_min_delay: node " + std::to_string(t) +
                                         " unreachable from " + std::to_string(s));
            d.at(s, t) = dist[t];
        }
    }
    return d;
}

std::vector<int> shortest_path(const TopologyGraph& g, int src, int dst) {
    if (src < 0 || src >= g.node_count() || dst < 0 || dst >= g.node_count())
        throw std::invalid_argument("shortest_path: node out of range");
    if (src == dst) return {src};
    std::vector<double> to_dst = dijkstra(g, dst);
    if (!std::isfinite(to_dst[src]))
        throw std::runtime_error("shortest_path: dst unreachable");

    // Walk forward greedily; delays are dyadic so the on-path test is exact.
    // Taking the smallest qualifying neighbor at each step yields the
    // lexicographically smallest minimum-delay node sequence.
    std::vector<int> path{src};
    int u = src;
    while (u != dst) {
        int next = -1;
        for (auto [v, w] : g.neighbors(u)) {
            if (w + to_dst[v] == to_dst[u]) {
                next = v;
                break;  // neighbors sorted by id
            }
        }
        if (next < 0) throw std::runtime_error("shortest_path: no on-path neighbor");
        path.push_back(next);
        u = next;
    }
    return path;
}

int path_hops(const TopologyGraph& g, int src, int dst) {
    return static_cast<int>(shortest_path(g, src, dst).size()) - 1;
}

}  // namespace etree
