#ifndef ETREE_SYNTHETIC_HPP
#define ETREE_SYNTHETIC_HPP

#include <cstdint>
#include <utility>

#include "etree/dataset.hpp"

namespace etree {

/// Class-conditional Gaussian generator. Class means are drawn on a sphere
/// of radius `separation`; samples add isotropic noise of the given scale.
/// `label_noise` relabels that fraction of samples uniformly at random.
/// `condition_spread` rescales each feature by a fixed per-dimension factor
/// log-spaced in [1/sqrt(spread), sqrt(spread)]; 1.0 leaves features
/// isotropic (learnable in a step or two), larger values ill-condition the
/// problem so SGD needs many epochs, as on real sensor data.
struct SyntheticSpec {
    int train_size = 7352;
    int test_size = 2947;
    int feature_count = 561;
    int class_count = 6;
    double separation = 1.0;
    double noise = 1.0;
    double label_noise = 0.0;
    double condition_spread = 1.0;
    uint64_t seed = 42;
};

/// HAR-shaped default: 6 classes, 561 features, 7352/2947 split.
SyntheticSpec har_like_spec(uint64_t seed = 42);

/// Pendigits-shaped default: 10 classes, 16 features, 7494/3498 split.
SyntheticSpec pendigits_like_spec(uint64_t seed = 42);

std::pair<LabeledDataset, LabeledDataset> make_synthetic_dataset(const SyntheticSpec& spec);

}  // namespace etree

#endif
