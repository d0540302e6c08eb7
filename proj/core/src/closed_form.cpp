#include "msdyn/closed_form.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace msdyn {

namespace {

// Kahan-compensated sum; the Monte Carlo aggregations are order-independent
// up to this compensation.
struct KahanSum {
    double sum = 0.0, c = 0.0;
    void add(double x) {
        const double y = x - c;
        const double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
};

struct LossMoments {
    double a = 0.0;  // mean s^2
    double b = 0.0;  // mean s*o1
    double cc = 0.0; // mean s*o2
};

LossMoments moments(std::span<const TwoStepSample> samples) {
    if (samples.empty()) throw std::invalid_argument("two-step estimator: empty dataset");
    KahanSum a, b, c;
    for (const auto& s : samples) {
        a.add(s.s0 * s.s0);
        b.add(s.s0 * s.o1);
        c.add(s.s0 * s.o2);
    }
    const double n = static_cast<double>(samples.size());
    return {a.sum / n, b.sum / n, c.sum / n};
}

void check_alpha(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("alpha must be in [0,1], got " + std::to_string(alpha));
}

// Derivative of the mean two-step loss as a cubic in theta:
// dL/dtheta = 4(1-a)A theta^3 + (2aA - 4(1-a)C) theta - 2aB.
void derivative_coeffs(double alpha, const LossMoments& m, double& c3, double& c1, double& c0) {
    c3 = 4.0 * (1.0 - alpha) * m.a;
    c1 = 2.0 * alpha * m.a - 4.0 * (1.0 - alpha) * m.cc;
    c0 = -2.0 * alpha * m.b;
}

double derivative_value(double alpha, const LossMoments& m, double theta) {
    double c3, c1, c0;
    derivative_coeffs(alpha, m, c3, c1, c0);
    return ((c3 * theta) * theta + c1) * theta + c0;
}

double derivative_slope(double alpha, const LossMoments& m, double theta) {
    double c3, c1, c0;
    derivative_coeffs(alpha, m, c3, c1, c0);
    return 3.0 * c3 * theta * theta + c1;
}

}  // namespace

double two_step_loss(double theta, double alpha, const TwoStepSample& sample) {
    check_alpha(alpha);
    const double e1 = theta * sample.s0 - sample.o1;
    const double e2 = theta * theta * sample.s0 - sample.o2;
    return alpha * e1 * e1 + (1.0 - alpha) * e2 * e2;
}

double two_step_loss(double theta, double alpha, std::span<const TwoStepSample> samples) {
    check_alpha(alpha);
    KahanSum acc;
    for (const auto& s : samples) acc.add(two_step_loss(theta, alpha, s));
    return acc.sum / static_cast<double>(samples.size());
}

std::vector<double> solve_cubic_real(double c3, double c2, double c1, double c0) {
    constexpr double kTiny = 1e-14;
    if (std::abs(c3) < kTiny) {
        if (std::abs(c2) < kTiny) {
            if (std::abs(c1) < kTiny) return {};
            return {-c0 / c1};
        }
        const double disc = c1 * c1 - 4.0 * c2 * c0;
        if (disc < 0.0) return {};
        const double r = std::sqrt(disc);
        std::vector<double> roots = {(-c1 - r) / (2.0 * c2), (-c1 + r) / (2.0 * c2)};
        std::sort(roots.begin(), roots.end());
        return roots;
    }

    // Depressed form t^3 + p t + q, theta = t - c2/(3 c3).
    const double shift = c2 / (3.0 * c3);
    const double b = c2 / c3, c = c1 / c3, d = c0 / c3;
    const double pp = c - b * b / 3.0;
    const double qq = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    const double disc = -4.0 * pp * pp * pp - 27.0 * qq * qq;

    std::vector<double> roots;
    if (disc > 0.0) {
        // Three distinct real roots; trigonometric method (pp < 0 here).
        const double m = 2.0 * std::sqrt(-pp / 3.0);
        const double arg = std::clamp(3.0 * qq / (pp * m), -1.0, 1.0);
        const double phi = std::acos(arg) / 3.0;
        for (int k = 0; k < 3; ++k)
            roots.push_back(m * std::cos(phi - 2.0 * M_PI * static_cast<double>(k) / 3.0) - shift);
    } else if (std::abs(pp) < kTiny && std::abs(qq) < kTiny) {
        roots.push_back(-shift);  // triple root
    } else if (disc == 0.0) {
        // Repeated root boundary.
        const double u = 3.0 * qq / pp;
        roots.push_back(u - shift);
        roots.push_back(-u / 2.0 - shift);
    } else {
        // One real root (Cardano).
        const double r = std::sqrt(qq * qq / 4.0 + pp * pp * pp / 27.0);
        const double t = std::cbrt(-qq / 2.0 + r) + std::cbrt(-qq / 2.0 - r);
        roots.push_back(t - shift);
    }
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [](double x, double y) { return std::abs(x - y) < 1e-12; }),
                roots.end());
    return roots;
}

std::vector<double> loss_derivative_roots(double alpha, std::span<const TwoStepSample> samples) {
    check_alpha(alpha);
    const LossMoments m = moments(samples);
    double c3, c1, c0;
    derivative_coeffs(alpha, m, c3, c1, c0);
    std::vector<double> roots = solve_cubic_real(c3, 0.0, c1, c0);
    // One Newton polish per root on the actual derivative.
    for (double& r : roots) {
        const double f = derivative_value(alpha, m, r);
        const double fp = derivative_slope(alpha, m, r);
        if (std::abs(fp) > 1e-14) r -= f / fp;
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

EstimatorResult estimate_theta(double alpha, std::span<const TwoStepSample> samples, int sign_hint) {
    check_alpha(alpha);
    const LossMoments m = moments(samples);
    EstimatorResult res;
    res.alpha = alpha;

    if (alpha == 1.0) {
        res.theta_hat = m.b / m.a;
        res.roots = {res.theta_hat};
        res.selected = RootSelection::ClosedFormAlphaOne;
        return res;
    }
    if (alpha == 0.0) {
        const double ratio = m.cc / m.a;
        if (ratio <= 0.0)
            throw std::domain_error("alpha=0 estimator does not exist (sum o2*s <= 0)");
        res.theta_hat = (sign_hint < 0 ? -1.0 : 1.0) * std::sqrt(ratio);
        res.roots = {-std::sqrt(ratio), 0.0, std::sqrt(ratio)};
        res.selected = RootSelection::ClosedFormAlphaZero;
        return res;
    }

    res.roots = loss_derivative_roots(alpha, samples);
    res.selected = RootSelection::GlobalMinimum;
    double best = std::numeric_limits<double>::infinity();
    for (double r : res.roots) best = std::min(best, two_step_loss(r, alpha, samples));

    // Candidates within a relative tie band of the global minimum; break
    // ties by sign hint, then by smaller |theta|.
    const double tie = best + 1e-12 * (1.0 + std::abs(best));
    std::vector<double> cands;
    for (double r : res.roots)
        if (two_step_loss(r, alpha, samples) <= tie) cands.push_back(r);
    if (cands.size() > 1) {
        std::vector<double> hinted;
        for (double r : cands)
            if ((sign_hint >= 0 && r >= 0.0) || (sign_hint < 0 && r < 0.0)) hinted.push_back(r);
        if (!hinted.empty()) cands = hinted;
        std::sort(cands.begin(), cands.end(),
                  [](double x, double y) { return std::abs(x) < std::abs(y); });
    }
    res.theta_hat = cands.front();
    return res;
}

double sample_mean(std::span<const double> values) {
    KahanSum s;
    for (double v : values) s.add(v);
    return s.sum / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
    const double mu = sample_mean(values);
    KahanSum s;
    for (double v : values) s.add((v - mu) * (v - mu));
    return s.sum / static_cast<double>(values.size() > 1 ? values.size() - 1 : 1);
}

std::pair<double, double> bootstrap_ci(std::span<const double> values,
                                       double (*statistic)(std::span<const double>),
                                       std::size_t resamples, Rng& rng) {
    std::vector<double> stats(resamples);
    std::vector<double> draw(values.size());
    for (std::size_t b = 0; b < resamples; ++b) {
        for (auto& d : draw) d = values[rng.index(values.size())];
        stats[b] = statistic(draw);
    }
    std::sort(stats.begin(), stats.end());
    const auto q = [&](double p) {
        const double idx = p * static_cast<double>(stats.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(idx);
        const std::size_t hi = std::min(lo + 1, stats.size() - 1);
        const double w = idx - static_cast<double>(lo);
        return stats[lo] * (1.0 - w) + stats[hi] * w;
    };
    return {q(0.025), q(0.975)};
}

namespace {

enum class Variant { MultiStep, Augmented, Averaging };

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::MultiStep: return "multistep";
        case Variant::Augmented: return "augmented";
        case Variant::Averaging: return "averaging";
    }
    return "?";
}

// One Monte Carlo draw of theta_hat - theta_true, or nullopt when the
// estimator does not exist for the drawn noise.
std::optional<double> draw_error(Variant variant, double alpha, double theta_true, double sigma,
                                 const BiasVarianceConfig& cfg, Rng& rng) {
    std::vector<TwoStepSample> samples(cfg.n_states);
    std::vector<double> o1b(cfg.n_states);  // second noise realization (averaging)
    for (std::size_t i = 0; i < cfg.n_states; ++i) {
        const double s0 = cfg.s0_hi > cfg.s0_lo ? rng.uniform(cfg.s0_lo, cfg.s0_hi) : cfg.s0;
        const double s1 = theta_true * s0;
        samples[i] = {s0, s1 + sigma * rng.normal(), theta_true * s1 + sigma * rng.normal()};
        o1b[i] = s1 + sigma * rng.normal();
    }
    switch (variant) {
        case Variant::MultiStep: {
            try {
                return estimate_theta(alpha, samples, theta_true >= 0 ? +1 : -1).theta_hat -
                       theta_true;
            } catch (const std::domain_error&) {
                return std::nullopt;
            }
        }
        case Variant::Augmented: {
            // Least-squares alpha=1 fit on pairs {(s0 -> o1), (o1 -> o2)}.
            double num = 0.0, den = 0.0;
            for (const auto& sm : samples) {
                num += sm.s0 * sm.o1 + sm.o1 * sm.o2;
                den += sm.s0 * sm.s0 + sm.o1 * sm.o1;
            }
            return num / den - theta_true;
        }
        case Variant::Averaging: {
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < cfg.n_states; ++i) {
                num += 0.5 * (samples[i].o1 + o1b[i]) * samples[i].s0;
                den += samples[i].s0 * samples[i].s0;
            }
            return num / den - theta_true;
        }
    }
    return std::nullopt;
}

BiasVarianceReport run_study(const BiasVarianceConfig& cfg, Variant variant) {
    if (cfg.n_mc < 2) throw std::invalid_argument("bias_variance_study: n_mc must be >= 2");
    BiasVarianceReport report;
    const Rng master(cfg.seed);
    std::uint64_t stream = 0;
    for (double alpha : cfg.alpha_list) {
        for (double sigma : cfg.sigma_list) {
            std::vector<double> errors;
            std::size_t dropped = 0;
            for (double theta_true : cfg.theta_true_list) {
                Rng rng = master.child(stream++);
                for (std::size_t k = 0; k < cfg.n_mc; ++k) {
                    auto e = draw_error(variant, alpha, theta_true, sigma, cfg, rng);
                    if (e)
                        errors.push_back(*e);
                    else
                        ++dropped;
                }
            }
            BiasVarianceEntry entry;
            entry.variant = variant_name(variant);
            entry.alpha = alpha;
            entry.sigma = sigma;
            entry.n_samples = errors.size();
            entry.n_dropped = dropped;
            entry.bias = sample_mean(errors);
            entry.variance = sample_variance(errors);
            Rng boot = master.child(0xb007u + stream);
            std::tie(entry.bias_ci_lo, entry.bias_ci_hi) =
                bootstrap_ci(errors, &sample_mean, cfg.bootstrap_resamples, boot);
            std::tie(entry.var_ci_lo, entry.var_ci_hi) =
                bootstrap_ci(errors, &sample_variance, cfg.bootstrap_resamples, boot);
            report.entries.push_back(std::move(entry));
        }
    }
    return report;
}

}  // namespace

const BiasVarianceEntry& BiasVarianceReport::find(const std::string& variant, double alpha,
                                                  double sigma) const {
    for (const auto& e : entries)
        if (e.variant == variant && e.alpha == alpha && e.sigma == sigma) return e;
    throw std::out_of_range("BiasVarianceReport: no entry for alpha=" + std::to_string(alpha) +
                            " sigma=" + std::to_string(sigma));
}

BiasVarianceReport bias_variance_study(const BiasVarianceConfig& cfg) {
    return run_study(cfg, Variant::MultiStep);
}

BiasVarianceReport augmented_baseline_study(const BiasVarianceConfig& cfg) {
    return run_study(cfg, Variant::Augmented);
}

BiasVarianceReport averaging_baseline_study(const BiasVarianceConfig& cfg) {
    return run_study(cfg, Variant::Averaging);
}

TaylorVarianceResult taylor_variance_check(double theta_true, double s0, double sigma,
                                           std::size_t n_mc, std::uint64_t seed) {
    TaylorVarianceResult res;
    res.approx = sigma * sigma / (4.0 * theta_true * theta_true * s0 * s0);
    res.in_validity_regime = sigma < 0.1 * theta_true * theta_true * std::abs(s0);
    if (sigma == 0.0) {
        res.empirical = 0.0;
        res.relative_error = 0.0;
        return res;
    }
    Rng rng(seed);
    std::vector<double> draws;
    draws.reserve(n_mc);
    const double s2 = theta_true * theta_true * s0;
    for (std::size_t k = 0; k < n_mc; ++k) {
        const double o2 = s2 + sigma * rng.normal();
        const double ratio = o2 / s0;
        if (ratio <= 0.0) {
            ++res.n_dropped;
            continue;
        }
        draws.push_back((theta_true >= 0 ? 1.0 : -1.0) * std::sqrt(ratio));
    }
    res.empirical = sample_variance(draws);
    res.relative_error = std::abs(res.empirical - res.approx) / res.approx;
    return res;
}

}  // namespace msdyn
