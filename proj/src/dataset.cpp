#include "etree/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace etree {

LabeledDataset LabeledDataset::subset(const std::vector<int>& indices) const {
    LabeledDataset out;
    out.feature_count = feature_count;
    out.class_count = class_count;
    out.label_map = label_map;
    out.features.reserve(indices.size() * static_cast<size_t>(feature_count));
    out.labels.reserve(indices.size());
    for (int i : indices) {
        const double* r = row(i);
        out.features.insert(out.features.end(), r, r + feature_count);
        out.labels.push_back(labels[i]);
    }
    return out;
}

std::vector<int> LabeledDataset::class_counts() const {
    std::vector<int> counts(class_count, 0);
    for (int l : labels) ++counts[l];
    return counts;
}

LabeledDataset load_csv_dataset(const std::string& path, int feature_count,
                                bool skip_header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("dataset: cannot open " + path);

    std::vector<double> features;
    std::vector<int> raw_labels;
    std::string line;
    int line_no = 0;
    if (skip_header && std::getline(in, line)) ++line_no;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (static_cast<int>(fields.size()) != feature_count + 1)
            throw std::runtime_error("dataset: line " + std::to_string(line_no) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(feature_count + 1));
        for (int f = 0; f < feature_count; ++f) {
            try {
                size_t pos = 0;
                double v = std::stod(fields[f], &pos);
                features.push_back(v);
            } catch (const std::exception&) {
                throw std::runtime_error("dataset: non-numeric feature at line " +
                                         std::to_string(line_no));
            }
        }
        try {
            raw_labels.push_back(std::stoi(fields.back()));
        } catch (const std::exception&) {
            throw std::runtime_error("dataset: non-integer label at line " +
                                     std::to_string(line_no));
        }
    }
    if (raw_labels.empty()) throw std::runtime_error("dataset: " + path + " has no samples");

    // Remap labels to a dense 0..C-1 range, ordered by original value.
    std::map<int, int> dense;
    for (int l : raw_labels) dense.emplace(l, 0);
    LabeledDataset ds;
    ds.feature_count = feature_count;
    ds.class_count = static_cast<int>(dense.size());
    for (auto& [orig, id] : dense) {
        id = static_cast<int>(ds.label_map.size());
        ds.label_map.push_back(orig);
    }
    ds.features = std::move(features);
    ds.labels.reserve(raw_labels.size());
    for (int l : raw_labels) ds.labels.push_back(dense[l]);
    return ds;
}

void write_csv_dataset(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("dataset: cannot write " + path);
    out.precision(9);
    for (int i = 0; i < ds.size(); ++i) {
        const double* r = ds.row(i);
        for (int f = 0; f < ds.feature_count; ++f) out << r[f] << ",";
        int label = ds.labels[i];
        out << (label < static_cast<int>(ds.label_map.size()) ? ds.label_map[label] : label)
            << "\n";
    }
}

namespace {

void check_partition_pre(const LabeledDataset& ds, int n_nodes) {
    if (n_nodes < 1) throw std::invalid_argument("partition: need >= 1 node");
    if (n_nodes > ds.size())
        throw std::invalid_argument("partition: more nodes than samples");
}

std::vector<std::vector<int>> indices_by_class(const LabeledDataset& ds) {
    std::vector<std::vector<int>> by_class(ds.class_count);
    for (int i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
    return by_class;
}

}  // namespace

NodePartition partition_iid(const LabeledDataset& ds, int n_nodes, uint64_t seed) {
    check_partition_pre(ds, n_nodes);
    std::mt19937_64 rng(seed);
    auto by_class = indices_by_class(ds);
    NodePartition part;
    part.shards.resize(n_nodes);
    // One dealing cursor shared across classes keeps shard sizes within 1.
    int cursor = 0;
    for (auto& idx : by_class) {
        std::shuffle(idx.begin(), idx.end(), rng);
        for (int i : idx) {
            part.shards[cursor].push_back(i);
            cursor = (cursor + 1) % n_nodes;
        }
    }
    return part;
}

NodePartition partition_noniid_classes_per_node(const LabeledDataset& ds, int n_nodes,
                                                int classes_per_node, uint64_t seed) {
    check_partition_pre(ds, n_nodes);
    if (classes_per_node < 1 || classes_per_node > ds.class_count)
        throw std::invalid_argument("partition: classes_per_node out of range");

    auto by_class = indices_by_class(ds);
    std::mt19937_64 rng(seed);
    const int C = ds.class_count;

    for (int attempt = 0; attempt < 1000; ++attempt) {
        // Assign each node a random set of classes; retry until every class
        // is held by someone and no shard comes out empty.
        std::vector<std::vector<int>> node_classes(n_nodes);
        std::vector<std::vector<int>> class_nodes(C);
        std::vector<int> all_classes(C);
        std::iota(all_classes.begin(), all_classes.end(), 0);
        for (int node = 0; node < n_nodes; ++node) {
            std::vector<int> pool = all_classes;
            std::shuffle(pool.begin(), pool.end(), rng);
            pool.resize(classes_per_node);
            std::sort(pool.begin(), pool.end());
            node_classes[node] = pool;
            for (int c : pool) class_nodes[c].push_back(node);
        }
        bool covered = true;
        for (int c = 0; c < C; ++c)
            if (class_nodes[c].empty() && !by_class[c].empty()) covered = false;
        if (!covered) continue;

        NodePartition part;
        part.shards.resize(n_nodes);
        for (int c = 0; c < C; ++c) {
            if (class_nodes[c].empty()) continue;
            std::vector<int> idx = by_class[c];
            std::shuffle(idx.begin(), idx.end(), rng);
            size_t holders = class_nodes[c].size();
            for (size_t i = 0; i < idx.size(); ++i)
                part.shards[class_nodes[c][i % holders]].push_back(idx[i]);
        }
        bool ok = true;
        for (auto& s : part.shards)
            if (s.empty()) ok = false;
        if (!ok) continue;
        for (auto& s : part.shards) std::sort(s.begin(), s.end());
        return part;
    }
    throw std::runtime_error("partition: failed to find a covering class assignment");
}

NodePartition partition_noniid_sorted(const LabeledDataset& ds, int n_nodes) {
    check_partition_pre(ds, n_nodes);
    std::vector<int> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return ds.labels[a] < ds.labels[b]; });
    NodePartition part;
    part.shards.resize(n_nodes);
    int base = ds.size() / n_nodes;
    int rem = ds.size() % n_nodes;
    int pos = 0;
    for (int node = 0; node < n_nodes; ++node) {
        int take = base + (node < rem ? 1 : 0);
        part.shards[node].assign(order.begin() + pos, order.begin() + pos + take);
        pos += take;
    }
    return part;
}

std::vector<std::vector<int>> shard_class_sets(const LabeledDataset& ds,
                                               const NodePartition& part) {
    std::vector<std::vector<int>> out(part.shards.size());
    for (size_t node = 0; node < part.shards.size(); ++node) {
        std::vector<char> has(ds.class_count, 0);
        for (int i : part.shards[node]) has[ds.labels[i]] = 1;
        for (int c = 0; c < ds.class_count; ++c)
            if (has[c]) out[node].push_back(c);
    }
    return out;
}

LabeledDataset sample_skewed_test_set(const LabeledDataset& test, int size,
                                      const std::vector<double>& class_weights,
                                      uint64_t seed) {
    if (size < 1) throw std::invalid_argument("skewed test set: size must be >= 1");
    if (size > test.size()) throw std::invalid_argument("skewed test set: size exceeds test set");
    if (static_cast<int>(class_weights.size()) != test.class_count)
        throw std::invalid_argument("skewed test set: weights length != class count");
    double wsum = 0;
    for (double w : class_weights) {
        if (w <= 0) throw std::invalid_argument("skewed test set: weights must be positive");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-6)
        throw std::invalid_argument("skewed test set: weights must sum to 1");

    const int C = test.class_count;
    // Largest-remainder rounding of size * weight.
    std::vector<int> counts(C);
    std::vector<std::pair<double, int>> rema(C);
    int assigned = 0;
    for (int c = 0; c < C; ++c) {
        double target = size * class_weights[c];
        counts[c] = static_cast<int>(std::floor(target));
        assigned += counts[c];
        rema[c] = {-(target - counts[c]), c};  // sort ascending = largest remainder first
    }
    std::sort(rema.begin(), rema.end());
    for (int i = 0; i < size - assigned; ++i) ++counts[rema[i].second];

    auto by_class = indices_by_class(test);
    std::mt19937_64 rng(seed);
    std::vector<int> chosen;
    for (int c = 0; c < C; ++c) {
        if (counts[c] > static_cast<int>(by_class[c].size()))
            throw std::runtime_error("skewed test set: class " + std::to_string(c) +
                                     " needs " + std::to_string(counts[c]) + " but only " +
                                     std::to_string(by_class[c].size()) + " available");
        std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
        chosen.insert(chosen.end(), by_class[c].begin(), by_class[c].begin() + counts[c]);
    }
    return test.subset(chosen);
}

std::vector<double> default_skew_weights(int class_count) {
    if (class_count < 1) throw std::invalid_argument("skew weights: class count must be >= 1");
    if (class_count == 6) return {0.30, 0.25, 0.18, 0.12, 0.09, 0.06};
    std::vector<double> w(class_count);
    double v = 1.0, total = 0.0;
    for (int c = 0; c < class_count; ++c, v *= 0.8) {
        w[c] = v;
        total += v;
    }
    for (double& x : w) x /= total;
    return w;
}

}  // namespace etree
