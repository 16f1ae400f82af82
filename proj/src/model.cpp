#include "etree/model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace etree {

namespace {

void check_shapes(const ModelParams& a, const ModelParams& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("model: shape mismatch");
}

// logits -> probabilities, max-subtracted for stability. Returns log-sum-exp
// offset so callers can form the log-likelihood without re-exponentiating.
void softmax_inplace(std::vector<double>& z) {
    double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

void logits(const ModelParams& m, const double* x, std::vector<double>& z) {
    const int C = m.class_count, F = m.feature_count;
    z.resize(C);
    for (int c = 0; c < C; ++c) {
        const double* w = m.weights.data() + static_cast<size_t>(c) * F;
        double acc = m.bias[c];
        for (int f = 0; f < F; ++f) acc += w[f] * x[f];
        z[c] = acc;
    }
}

int argmax_lowest(const std::vector<double>& z) {
    int best = 0;
    for (int c = 1; c < static_cast<int>(z.size()); ++c)
        if (z[c] > z[best]) best = c;
    return best;
}

double sample_nll(const std::vector<double>& z, int label) {
    double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    return -(z[label] - mx - std::log(sum));
}

}  // namespace

void ModelParams::save(std::ostream& out) const {
    out << class_count << " " << feature_count << "\n";
    out.precision(17);
    for (int c = 0; c < class_count; ++c) {
        for (int f = 0; f < feature_count; ++f)
            out << weights[static_cast<size_t>(c) * feature_count + f]
                << (f + 1 == feature_count ? "" : " ");
        out << "\n";
    }
    for (int c = 0; c < class_count; ++c) out << bias[c] << (c + 1 == class_count ? "" : " ");
    out << "\n";
}

ModelParams ModelParams::load(std::istream& in) {
    ModelParams m;
    if (!(in >> m.class_count >> m.feature_count))
        throw std::runtime_error("model load: bad header");
    size_t n = static_cast<size_t>(m.class_count) * m.feature_count;
    m.weights.resize(n);
    m.bias.resize(m.class_count);
    for (double& w : m.weights)
        if (!(in >> w)) throw std::runtime_error("model load: truncated weights");
    for (double& b : m.bias)
        if (!(in >> b)) throw std::runtime_error("model load: truncated bias");
    return m;
}

ModelParams init_model(int feature_count, int class_count, uint64_t /*seed*/) {
    if (feature_count < 1 || class_count < 1)
        throw std::invalid_argument("init_model: dimensions must be >= 1");
    ModelParams m;
    m.class_count = class_count;
    m.feature_count = feature_count;
    m.weights.assign(static_cast<size_t>(class_count) * feature_count, 0.0);
    m.bias.assign(class_count, 0.0);
    return m;
}

ModelDelta gradient(const ModelParams& m, const LabeledDataset& ds,
                    std::span<const int> batch) {
    if (batch.empty()) throw std::invalid_argument("gradient: empty batch");
    if (ds.feature_count != m.feature_count)
        throw std::invalid_argument("gradient: feature dimension mismatch");
    const int C = m.class_count, F = m.feature_count;
    ModelDelta g;
    g.class_count = C;
    g.feature_count = F;
    g.weights.assign(static_cast<size_t>(C) * F, 0.0);
    g.bias.assign(C, 0.0);

    std::vector<double> z;
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (int i : batch) {
        const double* x = ds.row(i);
        logits(m, x, z);
        softmax_inplace(z);
        z[ds.labels[i]] -= 1.0;  // dL/dz = p - one_hot
        for (int c = 0; c < C; ++c) {
            double gc = z[c] * inv;
            g.bias[c] += gc;
            double* gw = g.weights.data() + static_cast<size_t>(c) * F;
            for (int f = 0; f < F; ++f) gw[f] += gc * x[f];
        }
    }
    return g;
}

double batch_loss(const ModelParams& m, const LabeledDataset& ds,
                  std::span<const int> batch) {
    if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
    std::vector<double> z;
    double total = 0.0;
    for (int i : batch) {
        logits(m, ds.row(i), z);
        total += sample_nll(z, ds.labels[i]);
    }
    return total / static_cast<double>(batch.size());
}

ModelParams sgd_train(const ModelParams& m, const LabeledDataset& ds,
                      std::span<const int> shard, const TrainConfig& cfg) {
    if (shard.empty()) throw std::invalid_argument("sgd_train: empty shard");
    if (cfg.learning_rate < 0) throw std::invalid_argument("sgd_train: negative learning rate");
    if (cfg.batch_size < 1 || cfg.local_epochs < 0)
        throw std::invalid_argument("sgd_train: bad config");
    ModelParams out = m;
    std::vector<int> order(shard.begin(), shard.end());
    std::mt19937_64 rng(cfg.seed);
    for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            size_t end = std::min(order.size(), start + cfg.batch_size);
            ModelDelta g = gradient(out, ds,
                                    std::span<const int>(order.data() + start, end - start));
            for (size_t i = 0; i < out.weights.size(); ++i)
                out.weights[i] -= cfg.learning_rate * g.weights[i];
            for (size_t i = 0; i < out.bias.size(); ++i)
                out.bias[i] -= cfg.learning_rate * g.bias[i];
        }
    }
    return out;
}

ModelDelta delta(const ModelParams& newer, const ModelParams& ref) {
    check_shapes(newer, ref);
    ModelDelta d;
    d.class_count = newer.class_count;
    d.feature_count = newer.feature_count;
    d.weights.resize(newer.weights.size());
    d.bias.resize(newer.bias.size());
    for (size_t i = 0; i < d.weights.size(); ++i) d.weights[i] = newer.weights[i] - ref.weights[i];
    for (size_t i = 0; i < d.bias.size(); ++i) d.bias[i] = newer.bias[i] - ref.bias[i];
    return d;
}

ModelParams apply_delta(const ModelParams& m, const ModelDelta& d) {
    if (m.class_count != d.class_count || m.feature_count != d.feature_count)
        throw std::invalid_argument("apply_delta: shape mismatch");
    ModelParams out = m;
    for (size_t i = 0; i < out.weights.size(); ++i) out.weights[i] += d.weights[i];
    for (size_t i = 0; i < out.bias.size(); ++i) out.bias[i] += d.bias[i];
    return out;
}

ModelParams apply_averaged_deltas(const ModelParams& m, const std::vector<ModelDelta>& deltas) {
    if (deltas.empty()) throw std::invalid_argument("apply_averaged_deltas: empty delta list");
    ModelParams out = m;
    const double inv = 1.0 / static_cast<double>(deltas.size());
    for (const ModelDelta& d : deltas) {
        if (d.class_count != m.class_count || d.feature_count != m.feature_count)
            throw std::invalid_argument("apply_averaged_deltas: shape mismatch");
        for (size_t i = 0; i < out.weights.size(); ++i) out.weights[i] += inv * d.weights[i];
        for (size_t i = 0; i < out.bias.size(); ++i) out.bias[i] += inv * d.bias[i];
    }
    return out;
}

ModelParams average_models(const std::vector<ModelParams>& models) {
    if (models.empty()) throw std::invalid_argument("average_models: empty list");
    ModelParams out = models.front();
    for (size_t k = 1; k < models.size(); ++k) {
        check_shapes(out, models[k]);
        for (size_t i = 0; i < out.weights.size(); ++i) out.weights[i] += models[k].weights[i];
        for (size_t i = 0; i < out.bias.size(); ++i) out.bias[i] += models[k].bias[i];
    }
    const double inv = 1.0 / static_cast<double>(models.size());
    for (double& w : out.weights) w *= inv;
    for (double& b : out.bias) b *= inv;
    return out;
}

EvalResult evaluate_serial(const ModelParams& m, const LabeledDataset& ds) {
    if (ds.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
    if (ds.feature_count != m.feature_count)
        throw std::invalid_argument("evaluate: feature dimension mismatch");
    long correct = 0;
    double loss = 0.0;
    std::vector<double> z;
    for (int i = 0; i < ds.size(); ++i) {
        logits(m, ds.row(i), z);
        if (argmax_lowest(z) == ds.labels[i]) ++correct;
        loss += sample_nll(z, ds.labels[i]);
    }
    return {static_cast<double>(correct) / ds.size(), loss / ds.size()};
}

EvalResult evaluate(const ModelParams& m, const LabeledDataset& ds) {
    if (ds.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
    if (ds.feature_count != m.feature_count)
        throw std::invalid_argument("evaluate: feature dimension mismatch");
    const int n = ds.size();
    std::vector<char> correct(n, 0);
    std::vector<double> losses(n, 0.0);
#pragma omp parallel
    {
        std::vector<double> z;
#pragma omp for schedule(static)
        for (int i = 0; i < n; ++i) {
            logits(m, ds.row(i), z);
            correct[i] = argmax_lowest(z) == ds.labels[i];
            losses[i] = sample_nll(z, ds.labels[i]);
        }
    }
    long hits = 0;
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        hits += correct[i];
        loss += losses[i];
    }
    return {static_cast<double>(hits) / n, loss / n};
}

}  // namespace etree
