// Benchmark of the OpenMP evaluation kernels against the serial reference:
// single-model evaluation over a large sample batch, and per-device mean
// evaluation as used by the gossip/individual metric sampling.

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "etree/model.hpp"
#include "etree/synthetic.hpp"

using namespace etree;

namespace {

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

ModelParams random_model(int F, int C, uint64_t seed) {
    ModelParams m = init_model(F, C);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.1);
    for (double& w : m.weights) w = g(rng);
    for (double& b : m.bias) b = g(rng);
    return m;
}

}  // namespace

int main() {
    SyntheticSpec spec = har_like_spec(7);
    spec.train_size = 20000;
    auto [train, test] = make_synthetic_dataset(spec);

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (OpenMP disabled)\n");
#endif

    ModelParams m = random_model(spec.feature_count, spec.class_count, 11);

    const int reps = 10;
    double t0 = now_ms();
    EvalResult serial{};
    for (int r = 0; r < reps; ++r) serial = evaluate_serial(m, train);
    double t_serial = (now_ms() - t0) / reps;

    t0 = now_ms();
    EvalResult parallel{};
    for (int r = 0; r < reps; ++r) parallel = evaluate(m, train);
    double t_parallel = (now_ms() - t0) / reps;

    std::printf("evaluate %d samples: serial %.2f ms, openmp %.2f ms, speedup %.2fx\n",
                train.size(), t_serial, t_parallel, t_serial / t_parallel);
    std::printf("  serial acc=%.6f loss=%.6f | openmp acc=%.6f loss=%.6f | max|diff|=%.3g\n",
                serial.accuracy, serial.loss, parallel.accuracy, parallel.loss,
                std::max(std::abs(serial.accuracy - parallel.accuracy),
                         std::abs(serial.loss - parallel.loss)));

    // Mean evaluation over many device models (the async-metric hot path).
    const int devices = 100;
    std::vector<ModelParams> models;
    models.reserve(devices);
    for (int i = 0; i < devices; ++i)
        models.push_back(random_model(spec.feature_count, spec.class_count, 100 + i));

    t0 = now_ms();
    double mean_serial = 0.0;
    for (const auto& dm : models) mean_serial += evaluate_serial(dm, test).accuracy;
    mean_serial /= devices;
    double t_mean_serial = now_ms() - t0;

    t0 = now_ms();
    std::vector<double> acc(devices);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < devices; ++i) acc[i] = evaluate_serial(models[i], test).accuracy;
    double mean_parallel = 0.0;
    for (double a : acc) mean_parallel += a;
    mean_parallel /= devices;
    double t_mean_parallel = now_ms() - t0;

    std::printf("mean over %d device models: serial %.2f ms, openmp %.2f ms, speedup %.2fx\n",
                devices, t_mean_serial, t_mean_parallel, t_mean_serial / t_mean_parallel);
    std::printf("  serial mean=%.6f openmp mean=%.6f\n", mean_serial, mean_parallel);
    return 0;
}
