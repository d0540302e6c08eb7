#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msdyn/rng.hpp"

namespace msdyn {

/// One two-step transition (s0, o1, o2) from the linear system.
struct TwoStepSample {
    double s0;
    double o1;
    double o2;
};

/// alpha * (theta*s - o1)^2 + (1-alpha) * (theta^2*s - o2)^2, averaged over
/// samples in the dataset form.
double two_step_loss(double theta, double alpha, const TwoStepSample& sample);
double two_step_loss(double theta, double alpha, std::span<const TwoStepSample> samples);

/// All real roots of d(two_step_loss)/d(theta), sorted ascending, each
/// polished by one Newton step. Degree 1 for alpha = 1, degree 3 otherwise;
/// the cubic is solved in depressed form (trigonometric method for the
/// three-real-root case).
std::vector<double> loss_derivative_roots(double alpha, std::span<const TwoStepSample> samples);

/// Generic real-cubic helper: roots of c3 x^3 + c2 x^2 + c1 x + c0.
std::vector<double> solve_cubic_real(double c3, double c2, double c1, double c0);

enum class RootSelection { ClosedFormAlphaOne, ClosedFormAlphaZero, GlobalMinimum };

struct EstimatorResult {
    double alpha = 0.0;
    double theta_hat = 0.0;
    std::vector<double> roots;
    RootSelection selected = RootSelection::GlobalMinimum;
};

/// Minimizer of the empirical two-step loss. Closed forms for alpha in
/// {0, 1}; Cardano roots plus global-minimum selection otherwise. Ties are
/// broken by sign_hint, then by smaller |theta|. Throws when the alpha = 0
/// estimator does not exist (sum o2*s <= 0).
EstimatorResult estimate_theta(double alpha, std::span<const TwoStepSample> samples,
                               int sign_hint = +1);

struct BiasVarianceEntry {
    std::string variant;  // "multistep", "augmented", "averaging"
    double alpha = 0.0;
    double sigma = 0.0;
    double bias = 0.0, bias_ci_lo = 0.0, bias_ci_hi = 0.0;
    double variance = 0.0, var_ci_lo = 0.0, var_ci_hi = 0.0;
    std::size_t n_samples = 0;
    std::size_t n_dropped = 0;
};

struct BiasVarianceReport {
    std::vector<BiasVarianceEntry> entries;
    const BiasVarianceEntry& find(const std::string& variant, double alpha, double sigma) const;
};

struct BiasVarianceConfig {
    std::vector<double> theta_true_list;
    std::vector<double> sigma_list;
    std::vector<double> alpha_list;
    std::size_t n_mc = 100;
    std::uint64_t seed = 42;
    double s0 = 1.0;
    // dataset-sized draws: n_states initial states per Monte Carlo draw,
    // uniform on [s0_lo, s0_hi] when the interval is nonempty, else fixed s0
    std::size_t n_states = 1;
    double s0_lo = 0.0, s0_hi = 0.0;
    std::size_t bootstrap_resamples = 1000;
};

/// Monte Carlo bias/variance study of the two-step estimators, with 95%
/// bootstrap confidence intervals pooled across theta_true values.
BiasVarianceReport bias_variance_study(const BiasVarianceConfig& cfg);

/// Appendix-style baselines: the alpha = 1 estimator fit on the augmented
/// pair set {(s0 -> o1), (o1 -> o2)}, and on noise-averaged targets
/// (o1 + o1') / 2.
BiasVarianceReport augmented_baseline_study(const BiasVarianceConfig& cfg);
BiasVarianceReport averaging_baseline_study(const BiasVarianceConfig& cfg);

struct TaylorVarianceResult {
    double approx = 0.0;     // sigma^2 / (4 theta^2 s^2)
    double empirical = 0.0;  // Monte Carlo Var[theta_hat_0]
    double relative_error = 0.0;
    bool in_validity_regime = false;  // sigma / (theta^2 |s|) < 0.1
    std::size_t n_dropped = 0;
};

TaylorVarianceResult taylor_variance_check(double theta_true, double s0, double sigma,
                                           std::size_t n_mc, std::uint64_t seed = 42);

/// Percentile bootstrap 95% CI of `statistic` over `values`.
std::pair<double, double> bootstrap_ci(std::span<const double> values,
                                       double (*statistic)(std::span<const double>),
                                       std::size_t resamples, Rng& rng);

double sample_mean(std::span<const double> values);
double sample_variance(std::span<const double> values);

}  // namespace msdyn
