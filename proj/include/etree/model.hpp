#ifndef ETREE_MODEL_HPP
#define ETREE_MODEL_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "etree/dataset.hpp"

namespace etree {

/// Softmax-regression parameters: C x F weight matrix (row-major) plus a
/// length-C bias vector.
struct ModelParams {
    int class_count = 0;
    int feature_count = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    bool same_shape(const ModelParams& o) const {
        return class_count == o.class_count && feature_count == o.feature_count;
    }
    void save(std::ostream& out) const;
    static ModelParams load(std::istream& in);
};

/// Parameter difference (new - reference); same shape as its model.
struct ModelDelta {
    int class_count = 0;
    int feature_count = 0;
    std::vector<double> weights;
    std::vector<double> bias;
};

struct TrainConfig {
    double learning_rate = 0.02;
    int local_epochs = 1;
    int batch_size = 10;
    uint64_t seed = 0;
};

struct EvalResult {
    double accuracy = 0.0;
    double loss = 0.0;
};

/// Deterministic all-zeros initialization.
ModelParams init_model(int feature_count, int class_count, uint64_t seed = 0);

/// Mini-batch SGD on the cross-entropy loss over the given shard. Pure:
/// returns the trained copy, leaving the input untouched.
ModelParams sgd_train(const ModelParams& m, const LabeledDataset& ds,
                      std::span<const int> shard, const TrainConfig& cfg);

ModelDelta delta(const ModelParams& newer, const ModelParams& ref);
ModelParams apply_delta(const ModelParams& m, const ModelDelta& d);
ModelParams apply_averaged_deltas(const ModelParams& m, const std::vector<ModelDelta>& deltas);
ModelParams average_models(const std::vector<ModelParams>& models);

/// Accuracy (argmax, ties to the lowest class id) and mean cross-entropy
/// with max-subtracted softmax. OpenMP over samples; per-sample results are
/// buffered and reduced serially, so the output is thread-count independent.
EvalResult evaluate(const ModelParams& m, const LabeledDataset& ds);

/// Single-threaded reference used by tests and the kernel benchmark.
EvalResult evaluate_serial(const ModelParams& m, const LabeledDataset& ds);

/// Exact analytic gradient of the mean cross-entropy over a batch.
ModelDelta gradient(const ModelParams& m, const LabeledDataset& ds,
                    std::span<const int> batch);

/// Mean cross-entropy over a batch (finite-difference oracle support).
double batch_loss(const ModelParams& m, const LabeledDataset& ds,
                  std::span<const int> batch);

}  // namespace etree

#endif
