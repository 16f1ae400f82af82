#include "etree/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include "etree/clustering.hpp"

namespace etree {

std::string protocol_name(Protocol p) {
    switch (p) {
        case Protocol::etree: return "etree";
        case Protocol::federated: return "federated";
        case Protocol::gossip: return "gossip";
        case Protocol::individual: return "individual";
        case Protocol::grouped: return "grouped";
    }
    return "unknown";
}

Protocol protocol_from_name(const std::string& name) {
    if (name == "etree") return Protocol::etree;
    if (name == "federated") return Protocol::federated;
    if (name == "gossip") return Protocol::gossip;
    if (name == "individual") return Protocol::individual;
    if (name == "grouped") return Protocol::grouped;
    throw std::invalid_argument("unknown protocol: " + name);
}

double MetricsLog::final_accuracy() const {
    return rows.empty() ? 0.0 : rows.back().accuracy;
}

long MetricsLog::total_hops() const { return rows.empty() ? 0 : rows.back().cum_hops; }

void MetricsLog::write_csv(std::ostream& out) const {
    out << "round,sim_time_ms,accuracy,loss,cum_hops\n";
    char buf[160];
    for (const RoundRecord& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.10f,%.10f,%ld\n", r.round, r.sim_time_ms,
                      r.accuracy, r.loss, r.cum_hops);
        out << buf;
    }
}

long communication_cost(const MetricsLog& log) { return log.total_hops(); }

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t node, uint64_t step) {
    uint64_t z = seed ^ (node * 0x9E3779B97F4A7C15ULL) ^ (step * 0xBF58476D1CE4E5B9ULL);
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Shared per-run state: hop accounting and deterministic per-leaf seeds.
struct Engine {
    const SimConfig& cfg;
    std::unordered_map<long long, int> hop_cache;
    long cum_hops = 0;
    long leaf_updates = 0;
    std::vector<long> train_count;

    explicit Engine(const SimConfig& c)
        : cfg(c), train_count(c.graph ? c.graph->node_count() : 0, 0) {}

    double delay(int u, int v) const { return u == v ? 0.0 : (*cfg.delays)(u, v); }

    void count_message(int u, int v) {
        if (u == v) return;
        long long key = static_cast<long long>(u) * cfg.graph->node_count() + v;
        auto it = hop_cache.find(key);
        int h;
        if (it != hop_cache.end()) {
            h = it->second;
        } else {
            h = path_hops(*cfg.graph, u, v);
            hop_cache[key] = h;
            hop_cache[static_cast<long long>(v) * cfg.graph->node_count() + u] = h;
        }
        cum_hops += h;
    }

    ModelDelta leaf_train(int node, const ModelParams& m) {
        TrainConfig tc = cfg.train_cfg;
        tc.seed = mix_seed(cfg.seed, static_cast<uint64_t>(node),
                           static_cast<uint64_t>(train_count[node]++));
        ModelParams trained = sgd_train(m, *cfg.train, cfg.partition->shards[node], tc);
        ++leaf_updates;
        return delta(trained, m);
    }
};

void validate_common(const SimConfig& cfg, bool needs_tree) {
    if (!cfg.graph || !cfg.delays || !cfg.train || !cfg.test || !cfg.partition)
        throw std::invalid_argument("sim: missing graph/delays/datasets/partition");
    if (needs_tree && !cfg.tree) throw std::invalid_argument("sim: protocol needs a tree");
    if (cfg.partition->node_count() != cfg.graph->node_count())
        throw std::invalid_argument("sim: partition size != node count");
    for (const auto& s : cfg.partition->shards)
        if (s.empty()) throw std::invalid_argument("sim: empty shard");
    if (cfg.client_fraction <= 0 || cfg.client_fraction > 1)
        throw std::invalid_argument("sim: client fraction must be in (0,1]");
}

/// One full cycle of the aggregator `v` at `layer`: a_l child aggregations,
/// redistributing the running model between them. Returns the completion
/// time and the aggregator's model after its last aggregation.
// Number of leaves under node v of the given layer (v itself when layer == 0).
long subtree_leaf_count(const ETree& tree, int layer, int v) {
    if (layer == 0) return 1;
    long n = 0;
    for (int c : tree.children(layer, v)) n += subtree_leaf_count(tree, layer - 1, c);
    return n;
}

// Average deltas weighted by the leaf population each child aggregates, so the
// round result equals the plain average over all contributing leaf updates
// even when clusters have unequal sizes.
ModelParams apply_weighted_deltas(const ModelParams& m, const std::vector<ModelDelta>& deltas,
                                  const std::vector<long>& weights) {
    ModelParams out = m;
    double total = 0.0;
    for (long w : weights) total += static_cast<double>(w);
    for (size_t k = 0; k < deltas.size(); ++k) {
        const ModelDelta& d = deltas[k];
        const double f = static_cast<double>(weights[k]) / total;
        for (size_t i = 0; i < out.weights.size(); ++i) out.weights[i] += f * d.weights[i];
        for (size_t i = 0; i < out.bias.size(); ++i) out.bias[i] += f * d.bias[i];
    }
    return out;
}

std::pair<double, ModelParams> aggregator_cycle(Engine& eng, const ETree& tree, int layer,
                                                int v, const ModelParams& received,
                                                double t0) {
    const int freq = tree.frequencies[layer - 1];
    ModelParams m = received;
    double t = t0;
    const std::vector<int> kids = tree.children(layer, v);
    int remote_kids = 0;
    for (int c : kids)
        if (c != v) ++remote_kids;
    std::vector<long> kid_weights;
    kid_weights.reserve(kids.size());
    for (int c : kids) kid_weights.push_back(subtree_leaf_count(tree, layer - 1, c));
    for (int it = 0; it < freq; ++it) {
        std::vector<ModelDelta> deltas;
        deltas.reserve(kids.size());
        double done = t;
        for (int c : kids) {
            double arrive = t + eng.delay(v, c);
            eng.count_message(v, c);
            double back;
            if (layer == 1) {
                deltas.push_back(eng.leaf_train(c, m));
                back = arrive + eng.cfg.compute_time_ms + eng.delay(c, v);
            } else {
                auto [tc, mc] = aggregator_cycle(eng, tree, layer - 1, c, m, arrive);
                deltas.push_back(delta(mc, m));
                back = tc + eng.delay(c, v);
            }
            eng.count_message(c, v);
            done = std::max(done, back);
        }
        m = apply_weighted_deltas(m, deltas, kid_weights);
        t = done + eng.cfg.serialize_ms * remote_kids;
    }
    return {t, std::move(m)};
}

}  // namespace

MetricsLog run_etree(const SimConfig& cfg) {
    validate_common(cfg, true);
    const ETree& tree = *cfg.tree;
    Engine eng(cfg);
    ModelParams model = init_model(cfg.train->feature_count, cfg.train->class_count);
    MetricsLog log;
    double t = 0.0;
    int round = 0;
    while (true) {
        long leaf0 = eng.leaf_updates;
        auto [tend, newm] = aggregator_cycle(eng, tree, tree.layer_count() - 1, tree.root,
                                             model, t);
        // A communication-free round (single node, zero delays and compute)
        // is paced by the sampling interval, like individual training.
        if (tend <= t) tend = t + cfg.sample_interval_ms;
        if (tend > cfg.time_budget_ms) break;
        model = std::move(newm);
        t = tend;
        ++round;
        EvalResult ev = evaluate(model, *cfg.test);
        log.rows.push_back({round, t, ev.accuracy, ev.loss, eng.cum_hops});
        log.leaf_updates_per_round.push_back(eng.leaf_updates - leaf0);
    }
    return log;
}

MetricsLog run_federated(const SimConfig& cfg) {
    validate_common(cfg, false);
    const int n = cfg.graph->node_count();
    std::vector<int> all_nodes(n);
    std::iota(all_nodes.begin(), all_nodes.end(), 0);
    const int master = center_node(all_nodes, *cfg.delays);

    Engine eng(cfg);
    std::mt19937_64 select_rng(cfg.seed);
    ModelParams model = init_model(cfg.train->feature_count, cfg.train->class_count);
    MetricsLog log;
    double t = 0.0;
    int round = 0;
    while (true) {
        std::vector<int> clients = all_nodes;
        if (cfg.client_fraction < 1.0) {
            std::shuffle(clients.begin(), clients.end(), select_rng);
            int take = std::max<int>(1, static_cast<int>(std::lround(cfg.client_fraction * n)));
            clients.resize(take);
            std::sort(clients.begin(), clients.end());
        }
        long leaf0 = eng.leaf_updates;
        std::vector<ModelDelta> deltas;
        deltas.reserve(clients.size());
        double done = t;
        for (int c : clients) {
            double arrive = t + eng.delay(master, c);
            eng.count_message(master, c);
            deltas.push_back(eng.leaf_train(c, model));
            done = std::max(done, arrive + cfg.compute_time_ms + eng.delay(c, master));
            eng.count_message(c, master);
        }
        int remote = 0;
        for (int c : clients)
            if (c != master) ++remote;
        done += cfg.serialize_ms * remote;
        if (done <= t) done = t + cfg.sample_interval_ms;  // communication-free round
        if (done > cfg.time_budget_ms) break;
        model = apply_averaged_deltas(model, deltas);
        t = done;
        ++round;
        EvalResult ev = evaluate(model, *cfg.test);
        log.rows.push_back({round, t, ev.accuracy, ev.loss, eng.cum_hops});
        log.leaf_updates_per_round.push_back(eng.leaf_updates - leaf0);
    }
    return log;
}

namespace {

/// Mean accuracy/loss over one model per device; deterministic reduction.
EvalResult mean_eval(const std::vector<ModelParams>& models, const LabeledDataset& test) {
    const int n = static_cast<int>(models.size());
    std::vector<EvalResult> per(n);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) per[i] = evaluate_serial(models[i], test);
    EvalResult out;
    for (const EvalResult& e : per) {
        out.accuracy += e.accuracy;
        out.loss += e.loss;
    }
    out.accuracy /= n;
    out.loss /= n;
    return out;
}

}  // namespace

MetricsLog run_gossip(const SimConfig& cfg) {
    validate_common(cfg, false);
    if (cfg.gossip_cycle_ms <= 0 && cfg.compute_time_ms <= 0)
        throw std::invalid_argument("gossip: cycle interval and compute time both zero");
    const int n = cfg.graph->node_count();
    Engine eng(cfg);

    struct Event {
        double t;
        long seq;
        int kind;  // 0 = cycle start, 1 = model arrival
        int node;
        ModelParams model;  // arrival payload
    };
    auto later = [](const Event& a, const Event& b) {
        if (a.t != b.t) return a.t > b.t;
        return a.seq > b.seq;
    };
    std::priority_queue<Event, std::vector<Event>, decltype(later)> queue(later);
    long seq = 0;

    std::vector<ModelParams> models(
        n, init_model(cfg.train->feature_count, cfg.train->class_count));
    for (int u = 0; u < n; ++u) queue.push({0.0, seq++, 0, u, {}});

    MetricsLog log;
    EvalResult ev0 = mean_eval(models, *cfg.test);
    log.rows.push_back({0, 0.0, ev0.accuracy, ev0.loss, 0});

    const double cycle = std::max(cfg.gossip_cycle_ms, cfg.compute_time_ms);
    int tick = 1;
    double tick_time = cfg.sample_interval_ms;
    auto flush_ticks_until = [&](double t) {
        while (tick_time <= cfg.time_budget_ms && tick_time < t) {
            EvalResult ev = mean_eval(models, *cfg.test);
            log.rows.push_back({tick, tick_time, ev.accuracy, ev.loss, eng.cum_hops});
            ++tick;
            tick_time += cfg.sample_interval_ms;
        }
    };

    while (!queue.empty()) {
        Event e = queue.top();
        queue.pop();
        if (e.t > cfg.time_budget_ms) break;
        flush_ticks_until(e.t);
        if (e.kind == 0) {
            // The device trains back-to-back for the whole exchange cycle and
            // shares whatever model it holds when the cycle ends; with zero
            // compute time that is a single update per cycle.
            int reps = 1;
            if (cfg.compute_time_ms > 0 && cycle > cfg.compute_time_ms)
                reps = static_cast<int>(cycle / cfg.compute_time_ms);
            for (int r = 0; r < reps; ++r) {
                ModelDelta d = eng.leaf_train(e.node, models[e.node]);
                models[e.node] = apply_averaged_deltas(models[e.node], {d});
            }
            double sent = e.t + cfg.compute_time_ms * reps;
            for (auto [v, w] : cfg.graph->neighbors(e.node)) {
                eng.cum_hops += 1;  // physical 1-hop link
                queue.push({sent + w, seq++, 1, v, models[e.node]});
            }
            queue.push({e.t + cycle, seq++, 0, e.node, {}});
        } else {
            models[e.node] = average_models({models[e.node], e.model});
        }
    }
    flush_ticks_until(cfg.time_budget_ms + 1.0);
    return log;
}

MetricsLog run_individual(const SimConfig& cfg) {
    validate_common(cfg, false);
    const int n = cfg.graph->node_count();
    Engine eng(cfg);
    std::vector<ModelParams> models(
        n, init_model(cfg.train->feature_count, cfg.train->class_count));

    MetricsLog log;
    EvalResult ev0 = mean_eval(models, *cfg.test);
    log.rows.push_back({0, 0.0, ev0.accuracy, ev0.loss, 0});

    // Devices train continuously at the local-update cadence; with zero
    // compute time there is nothing to pace them, so the metric interval
    // sets the cadence instead. Metrics are sampled on the metric interval.
    const double step = cfg.compute_time_ms > 0 ? cfg.compute_time_ms : cfg.sample_interval_ms;
    int ticks = static_cast<int>(std::floor(cfg.time_budget_ms / cfg.sample_interval_ms));
    double next_update = step;
    for (int k = 1; k <= ticks; ++k) {
        const double tick_time = k * cfg.sample_interval_ms;
        while (next_update <= tick_time) {
            for (int u = 0; u < n; ++u) {
                ModelDelta d = eng.leaf_train(u, models[u]);
                models[u] = apply_averaged_deltas(models[u], {d});
            }
            next_update += step;
        }
        EvalResult ev = mean_eval(models, *cfg.test);
        log.rows.push_back({k, tick_time, ev.accuracy, ev.loss, 0});
    }
    return log;
}

MetricsLog run_grouped(const SimConfig& cfg) {
    validate_common(cfg, true);
    const ETree& tree = *cfg.tree;
    if (tree.layer_count() < 2) throw std::invalid_argument("grouped: tree has no groups");
    Engine eng(cfg);

    struct Group {
        int center;
        std::vector<int> members;
        ModelParams model;
        double t = 0.0;
    };
    std::vector<Group> groups;
    for (int c : tree.layers[1]) {
        Group g;
        g.center = c;
        g.members = tree.children(1, c);
        g.model = init_model(cfg.train->feature_count, cfg.train->class_count);
        groups.push_back(std::move(g));
    }

    auto cycle_duration = [&](const Group& g) {
        double dur = 0.0;
        int remote = 0;
        for (int m : g.members) {
            dur = std::max(dur, 2.0 * eng.delay(g.center, m) + cfg.compute_time_ms);
            if (m != g.center) ++remote;
        }
        if (dur > 0.0) dur += cfg.serialize_ms * remote;
        // A purely local group (singleton, zero compute) is paced by the
        // sampling interval, matching individual training.
        return dur > 0.0 ? dur : cfg.sample_interval_ms;
    };

    MetricsLog log;
    {
        std::vector<ModelParams> ms;
        for (auto& g : groups) ms.push_back(g.model);
        EvalResult ev0 = mean_eval(ms, *cfg.test);
        log.rows.push_back({0, 0.0, ev0.accuracy, ev0.loss, 0});
    }

    int ticks = static_cast<int>(std::floor(cfg.time_budget_ms / cfg.sample_interval_ms));
    for (int k = 1; k <= ticks; ++k) {
        double tick_time = k * cfg.sample_interval_ms;
        for (auto& g : groups) {
            while (g.t + cycle_duration(g) <= tick_time) {
                std::vector<ModelDelta> deltas;
                deltas.reserve(g.members.size());
                for (int m : g.members) {
                    eng.count_message(g.center, m);
                    deltas.push_back(eng.leaf_train(m, g.model));
                    eng.count_message(m, g.center);
                }
                g.model = apply_averaged_deltas(g.model, deltas);
                g.t += cycle_duration(g);
            }
        }
        std::vector<ModelParams> ms;
        for (auto& g : groups) ms.push_back(g.model);
        EvalResult ev = mean_eval(ms, *cfg.test);
        log.rows.push_back({k, tick_time, ev.accuracy, ev.loss, eng.cum_hops});
    }
    return log;
}

MetricsLog run_simulation(const SimConfig& cfg) {
    switch (cfg.protocol) {
        case Protocol::etree: return run_etree(cfg);
        case Protocol::federated: return run_federated(cfg);
        case Protocol::gossip: return run_gossip(cfg);
        case Protocol::individual: return run_individual(cfg);
        case Protocol::grouped: return run_grouped(cfg);
    }
    throw std::invalid_argument("unknown protocol");
}

}  // namespace etree
