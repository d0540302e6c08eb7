#pragma once

#include <cstdint>
#include <vector>

#include "msdyn/model.hpp"
#include "msdyn/multistep.hpp"
#include "msdyn/optimizer.hpp"

namespace msdyn {

/// Two-step loss ablation on the two-parameter sigmoid system: for each
/// weight alpha on the one-step term, train the sigmoid model across
/// optimizers, initialization distributions, initial points, noise levels
/// and Monte Carlo dataset draws, and record final validation errors.
struct SigmoidAblationConfig {
    std::vector<double> alphas{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> noise_percents{0.0, 0.2, 0.4};
    std::vector<OptimizerKind> optimizers{OptimizerKind::Adam, OptimizerKind::SGD};
    std::vector<InitDist> inits{InitDist::Default, InitDist::Uniform, InitDist::XavierUniform};
    std::size_t n_starts = 10;
    std::size_t n_mc = 10;
    std::size_t epochs = 60;
    std::size_t batch_size = 64;
    double lr_adam = 0.05;
    double lr_sgd = 0.2;
    double theta1_true = 2.0;
    double theta2_true = 1.0;
    std::size_t episodes = 5;  // last one held out for validation
    std::size_t horizon = 25;
    std::uint64_t seed = 42;
};

struct SigmoidAblationRow {
    double alpha = 0.0;
    OptimizerKind optimizer = OptimizerKind::Adam;
    InitDist init = InitDist::Default;
    double noise_percent = 0.0;
    std::size_t start = 0;
    std::size_t mc = 0;
    double valid_one_step = 0.0;
    double valid_two_step = 0.0;
    double theta1 = 0.0, theta2 = 0.0;  // final parameters
};

struct SigmoidAblationResult {
    std::vector<SigmoidAblationRow> rows;
    // aggregates, aligned with alphas; medians are the headline statistic
    // since a small fraction of runs diverges and dominates the means
    std::vector<double> alphas;
    std::vector<double> mean_one_step;
    std::vector<double> mean_two_step;
    std::vector<double> mean_combined;  // (one-step + two-step) / 2
    std::vector<double> median_one_step;
    std::vector<double> median_two_step;
    std::vector<double> median_combined;
};

SigmoidAblationResult sigmoid_ablation(const SigmoidAblationConfig& cfg);

}  // namespace msdyn
