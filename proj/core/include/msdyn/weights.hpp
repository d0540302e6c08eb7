#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace msdyn {

/// Normalized per-horizon loss weights alpha_1..alpha_h.
struct WeightProfile {
    std::size_t h = 1;
    std::vector<double> alphas;
    std::optional<double> beta;  // set when exponentially parameterized
};

inline void validate(const WeightProfile& p) {
    if (p.h < 1 || p.alphas.size() != p.h)
        throw std::invalid_argument("WeightProfile: horizon/weights mismatch");
    double sum = 0.0;
    for (double a : p.alphas) {
        if (a < 0.0) throw std::invalid_argument("WeightProfile: negative weight");
        sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("WeightProfile: weights sum to " + std::to_string(sum));
}

/// Explicit weights, normalized to sum exactly to 1.
inline WeightProfile explicit_weights(std::vector<double> alphas) {
    WeightProfile p;
    p.h = alphas.size();
    double sum = 0.0;
    for (double a : alphas) sum += a;
    if (sum <= 0.0) throw std::invalid_argument("explicit_weights: weights must have positive sum");
    for (double& a : alphas) a /= sum;
    p.alphas = std::move(alphas);
    validate(p);
    return p;
}

/// alpha_i proportional to beta^i, normalized by sum_{j=1..h} beta^j.
/// beta = 1 is the uniform profile.
inline WeightProfile exp_weights(std::size_t h, double beta) {
    if (beta <= 0.0) throw std::invalid_argument("exp_weights: beta must be > 0");
    if (h < 1) throw std::invalid_argument("exp_weights: horizon must be >= 1");
    std::vector<double> w(h);
    if (beta == 1.0) {
        for (auto& x : w) x = 1.0 / static_cast<double>(h);
    } else {
        double sum = 0.0, p = 1.0;
        for (std::size_t i = 0; i < h; ++i) {
            p *= beta;
            w[i] = p;
            sum += p;
        }
        for (auto& x : w) x /= sum;
    }
    WeightProfile prof;
    prof.h = h;
    prof.alphas = std::move(w);
    prof.beta = beta;
    validate(prof);
    return prof;
}

/// h_e = sum_i alpha_i * i; the weight-averaged horizon index.
inline double effective_horizon(const WeightProfile& p) {
    validate(p);
    double he = 0.0;
    for (std::size_t i = 0; i < p.h; ++i) he += p.alphas[i] * static_cast<double>(i + 1);
    return he;
}

}  // namespace msdyn
