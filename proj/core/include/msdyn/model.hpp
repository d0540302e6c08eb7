#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "msdyn/dataset.hpp"
#include "msdyn/tape.hpp"
#include "msdyn/tensor.hpp"

namespace msdyn {

enum class InitDist { Default, Uniform, XavierUniform };

InitDist parse_init_dist(const std::string& name);
std::string init_dist_name(InitDist d);

/// Per-dimension affine standardization of model inputs (s, a) and delta
/// targets. Zero-variance dimensions keep scale 1 and only shift the mean.
struct Normalizer {
    std::vector<double> in_mean, in_std;        // state_dim + action_dim
    std::vector<double> delta_mean, delta_std;  // state_dim

    static Normalizer identity(std::size_t state_dim, std::size_t action_dim);
    static Normalizer fit(const TrajectoryDataset& ds, std::span<const std::size_t> episodes,
                          bool use_observations);
};

/// Learnable one-step predictor. The tape path (`forward`) is used for
/// training; `predict` runs a throwaway tape for evaluation.
class DynamicsModel {
public:
    virtual ~DynamicsModel() = default;

    virtual std::string kind() const = 0;
    virtual std::size_t state_dim() const = 0;
    virtual std::size_t action_dim() const = 0;
    virtual bool gaussian_head() const { return false; }

    virtual std::vector<Tensor*> parameters() = 0;
    std::vector<const Tensor*> parameters() const {
        auto ps = const_cast<DynamicsModel*>(this)->parameters();
        return {ps.begin(), ps.end()};
    }

    /// One-step prediction on a tape for a batch of states (B x d_s) and
    /// actions (B x d_a; ignored when action_dim() == 0). Returns the mean
    /// prediction; for Gaussian heads also fills *sigma_out. `training`
    /// enables dropout (seeded from rng).
    virtual Val forward(Tape& tape, std::span<const Val> params, Val states, Val actions,
                        Val* sigma_out, bool training, Rng* rng) const = 0;

    /// Eval-mode batch prediction (deterministic, no dropout).
    Tensor predict(const Tensor& states, const Tensor& actions = {}) const;
    std::pair<Tensor, Tensor> predict_gaussian(const Tensor& states, const Tensor& actions = {}) const;

    virtual void save(const std::string& path) const = 0;
};

/// s_hat = theta * s.
class LinearModel final : public DynamicsModel {
public:
    explicit LinearModel(double theta = 0.0) : theta_(Tensor::scalar(theta)) {}
    std::string kind() const override { return "linear"; }
    std::size_t state_dim() const override { return 1; }
    std::size_t action_dim() const override { return 0; }
    std::vector<Tensor*> parameters() override { return {&theta_}; }
    Val forward(Tape& tape, std::span<const Val> params, Val states, Val, Val*, bool,
                Rng*) const override;
    double theta() const { return theta_.item(); }
    void set_theta(double t) { theta_ = Tensor::scalar(t); }
    void save(const std::string& path) const override;

private:
    Tensor theta_;
};

/// s_hat = theta1 * sigmoid(theta2 * s); the two-parameter network.
class SigmoidModel final : public DynamicsModel {
public:
    SigmoidModel(double theta1 = 0.0, double theta2 = 0.0)
        : theta1_(Tensor::scalar(theta1)), theta2_(Tensor::scalar(theta2)) {}
    static SigmoidModel init(InitDist dist, Rng& rng);
    std::string kind() const override { return "sigmoid"; }
    std::size_t state_dim() const override { return 1; }
    std::size_t action_dim() const override { return 0; }
    std::vector<Tensor*> parameters() override { return {&theta1_, &theta2_}; }
    Val forward(Tape& tape, std::span<const Val> params, Val states, Val, Val*, bool,
                Rng*) const override;
    double theta1() const { return theta1_.item(); }
    double theta2() const { return theta2_.item(); }
    void save(const std::string& path) const override;

private:
    Tensor theta1_, theta2_;
};

/// Two-hidden-layer tanh MLP predicting the normalized state delta, with a
/// Tanh-scaled mean head and optional Tanh-bounded sigma head.
class MlpDeltaModel final : public DynamicsModel {
public:
    struct Config {
        std::size_t state_dim = 1;
        std::size_t action_dim = 0;
        std::size_t width = 64;
        double dropout = 0.1;
        bool gaussian = false;
        double tanh_range = 3.0;   // mean head range in normalized-delta stds
        double sigma_max = 2.0;    // sigma head upper bound (normalized units)
        double sigma_min = 1e-4;
    };

    MlpDeltaModel(Config cfg, InitDist dist, Rng& rng);

    std::string kind() const override { return "mlp"; }
    std::size_t state_dim() const override { return cfg_.state_dim; }
    std::size_t action_dim() const override { return cfg_.action_dim; }
    bool gaussian_head() const override { return cfg_.gaussian; }
    std::vector<Tensor*> parameters() override;
    Val forward(Tape& tape, std::span<const Val> params, Val states, Val actions, Val* sigma_out,
                bool training, Rng* rng) const override;

    const Config& config() const { return cfg_; }
    Normalizer& normalizer() { return norm_; }
    const Normalizer& normalizer() const { return norm_; }

    void save(const std::string& path) const override;
    void zero_output_heads();

private:
    Config cfg_;
    Normalizer norm_;
    // [W1s, W1a?, b1, W2, b2, Wm, bm, (Ws, bs)]
    std::vector<Tensor> params_;
};

std::unique_ptr<DynamicsModel> load_model(const std::string& path);

}  // namespace msdyn
