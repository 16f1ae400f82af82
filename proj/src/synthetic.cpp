#include "etree/synthetic.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace etree {

SyntheticSpec har_like_spec(uint64_t seed) {
    SyntheticSpec s;
    s.seed = seed;
    return s;
}

SyntheticSpec pendigits_like_spec(uint64_t seed) {
    SyntheticSpec s;
    s.train_size = 7494;
    s.test_size = 3498;
    s.feature_count = 16;
    s.class_count = 10;
    s.seed = seed;
    return s;
}

namespace {

LabeledDataset draw(const SyntheticSpec& spec, const std::vector<double>& means,
                    const std::vector<double>& dim_scale, int count, std::mt19937_64& rng) {
    const int F = spec.feature_count;
    const int C = spec.class_count;
    std::normal_distribution<double> noise(0.0, spec.noise);
    std::uniform_int_distribution<int> pick_class(0, C - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    LabeledDataset ds;
    ds.feature_count = F;
    ds.class_count = C;
    ds.label_map.resize(C);
    for (int c = 0; c < C; ++c) ds.label_map[c] = c;
    ds.features.resize(static_cast<size_t>(count) * F);
    ds.labels.resize(count);
    for (int i = 0; i < count; ++i) {
        int c = i % C;  // balanced classes
        double* row = ds.features.data() + static_cast<size_t>(i) * F;
        const double* mu = means.data() + static_cast<size_t>(c) * F;
        for (int f = 0; f < F; ++f) row[f] = dim_scale[f] * (mu[f] + noise(rng));
        int label = c;
        if (spec.label_noise > 0 && unit(rng) < spec.label_noise) label = pick_class(rng);
        ds.labels[i] = label;
    }
    return ds;
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> make_synthetic_dataset(const SyntheticSpec& spec) {
    if (spec.feature_count < 1 || spec.class_count < 2)
        throw std::invalid_argument("synthetic: need >= 1 feature and >= 2 classes");
    if (spec.train_size < spec.class_count || spec.test_size < spec.class_count)
        throw std::invalid_argument("synthetic: split smaller than class count");

    const int F = spec.feature_count;
    const int C = spec.class_count;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Class means on a sphere of radius `separation`.
    std::vector<double> means(static_cast<size_t>(C) * F);
    for (int c = 0; c < C; ++c) {
        double* mu = means.data() + static_cast<size_t>(c) * F;
        double norm2 = 0.0;
        for (int f = 0; f < F; ++f) {
            mu[f] = gauss(rng);
            norm2 += mu[f] * mu[f];
        }
        double scale = spec.separation / std::sqrt(norm2);
        for (int f = 0; f < F; ++f) mu[f] *= scale;
    }

    // Ill-conditioning: scale every dimension (signal and noise alike) by a
    // fixed factor log-spaced across [1/sqrt(spread), sqrt(spread)].
    // Per-dimension SNR is unchanged, but the Bayes weights pick up a
    // 1/scale factor while the first gradient steps pick up +scale, so the
    // one-step direction is misaligned and SGD needs many passes — like
    // real, unnormalized sensor features.
    if (spec.condition_spread < 1.0)
        throw std::invalid_argument("synthetic: condition_spread must be >= 1");
    std::vector<double> dim_scale(F, 1.0);
    if (spec.condition_spread > 1.0) {
        const double hi = std::sqrt(spec.condition_spread);
        for (int f = 0; f < F; ++f) {
            double u = F > 1 ? static_cast<double>(f) / (F - 1) : 0.5;
            dim_scale[f] = std::pow(hi, 2.0 * u - 1.0);
        }
    }

    LabeledDataset train = draw(spec, means, dim_scale, spec.train_size, rng);
    LabeledDataset test = draw(spec, means, dim_scale, spec.test_size, rng);
    return {std::move(train), std::move(test)};
}

}  // namespace etree
