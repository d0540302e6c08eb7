#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msdyn/dataset.hpp"
#include "msdyn/model.hpp"
#include "msdyn/multistep.hpp"

namespace msdyn {

/// Per-horizon explained variance of recursive rollouts with ground-truth
/// actions, over every stride-1 sub-trajectory of the given episodes.
struct EvalReport {
    std::size_t H = 0;
    std::vector<double> r2;                    // R2(h), h = 1..H
    std::vector<std::vector<double>> r2_dims;  // per h, per state dimension
    std::vector<std::size_t> counts;           // sub-trajectories per h
    double r2_bar = 0.0;                       // mean of r2[0..H-1]
    std::vector<std::string> warnings;         // zero-variance dimensions etc.
    std::string config_digest;
};

/// Sentinel for a zero-variance target dimension with nonzero residuals;
/// such dimensions are excluded from the per-horizon average.
inline constexpr double kDegenerateR2 = -std::numeric_limits<double>::infinity();

EvalReport evaluate(const DynamicsModel& model, const TrajectoryDataset& ds,
                    std::span<const std::size_t> episodes, std::size_t H,
                    bool use_observations = true);

double r2_at_horizon(const DynamicsModel& model, const TrajectoryDataset& ds,
                     std::span<const std::size_t> episodes, std::size_t h,
                     bool use_observations = true);

double r2_bar(const DynamicsModel& model, const TrajectoryDataset& ds,
              std::span<const std::size_t> episodes, std::size_t H,
              bool use_observations = true);

/// 100 * (R2bar_multi - R2bar_base) / |R2bar_base|.
double relative_improvement(const EvalReport& multi, const EvalReport& baseline);

/// Paper-style rendering: x1000, rounded to the nearest integer.
long millesimal(double r2);

struct GridCell {
    double beta = 0.0;
    std::size_t fold = 0;
    double r2bar = 0.0;
    bool failed = false;
    std::string error;
};

struct GridSearchRecord {
    std::size_t h = 0;
    std::size_t folds = 0;
    std::size_t H = 0;
    std::vector<double> grid;
    std::vector<GridCell> cells;        // folds entries per grid value
    std::vector<double> mean_r2bar;     // per beta, over non-failed folds
    std::vector<double> std_r2bar;      // per beta, population std over folds
    double selected_beta = 0.0;
    double selected_r2bar = 0.0;
    double effective_horizon = 0.0;     // of the selected profile
    std::vector<std::string> warnings;
};

const std::vector<double>& default_beta_grid();

using ModelFactory = std::function<std::unique_ptr<DynamicsModel>(
    const TrajectoryDataset&, std::span<const std::size_t> train_eps, Rng&)>;

/// Trains one model per (beta, fold) on episode-level folds and selects the
/// beta maximizing the fold-mean R2bar(H) on the held-out fold. Ties within
/// 1e-6 resolve toward the smaller beta. The prototype config supplies
/// epochs, batch size, optimizer and base loss; its profile is replaced per
/// grid value and its seed reseeds each cell independently.
GridSearchRecord grid_search_beta(const TrajectoryDataset& ds,
                                  std::span<const std::size_t> episodes, std::size_t h,
                                  std::span<const double> grid, std::size_t folds, std::size_t H,
                                  std::uint64_t seed, const ModelFactory& factory,
                                  const TrainConfig& proto);

/// Two-step loss surface of the two-parameter sigmoid model around the true
/// parameters, averaged over noise draws, plus each draw's grid argmin.
struct LandscapeConfig {
    double theta1_true = 2.0;
    double theta2_true = 1.0;
    double alpha = 0.5;   // weight on the one-step term
    double sigma = 0.0;   // observation noise std
    double t1_lo = 1.0, t1_hi = 3.0;
    double t2_lo = 0.0, t2_hi = 2.0;
    std::size_t n1 = 41, n2 = 41;
    std::size_t n_draws = 10;
    std::size_t n_samples = 100;  // initial states per draw
    std::uint64_t seed = 42;
};

struct LandscapeResult {
    std::vector<double> t1_axis, t2_axis;
    std::vector<double> mean_loss;  // n1 x n2 row-major (t1 major)
    std::vector<std::pair<double, double>> argmins;  // per draw
    std::pair<double, double> mean_argmin{0.0, 0.0};
};

LandscapeResult loss_landscape_scan(const LandscapeConfig& cfg);

}  // namespace msdyn
