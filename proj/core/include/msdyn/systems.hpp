#pragma once

#include <memory>
#include <string>
#include <vector>

#include "msdyn/rng.hpp"

namespace msdyn {

using StateVec = std::vector<double>;

/// Ground-truth dynamical system. step() is the deterministic transition on
/// true states; observation noise is layered on top by the dataset generator.
class System {
public:
    virtual ~System() = default;
    virtual std::string name() const = 0;
    virtual std::size_t state_dim() const = 0;
    virtual std::size_t action_dim() const = 0;
    virtual StateVec step(const StateVec& state, const StateVec& action) const = 0;
    virtual StateVec initial_state(Rng& rng) const = 0;
    /// Per-step reward, when the system defines one (cart-pole only).
    virtual bool has_reward() const { return false; }
    virtual double reward(const StateVec&, const StateVec&) const { return 0.0; }
};

/// s_{t+1} = theta_true * s_t, |theta_true| < 1 for stability.
class LinearSystem final : public System {
public:
    LinearSystem(double theta_true, double sigma);
    std::string name() const override { return "linear"; }
    std::size_t state_dim() const override { return 1; }
    std::size_t action_dim() const override { return 0; }
    StateVec step(const StateVec& state, const StateVec& action) const override;
    StateVec initial_state(Rng& rng) const override;
    double theta_true() const { return theta_true_; }
    double sigma() const { return sigma_; }

private:
    double theta_true_;
    double sigma_;
};

/// s_{t+1} = theta1_true * sigmoid(theta2_true * s_t).
class SigmoidSystem final : public System {
public:
    SigmoidSystem(double theta1_true, double theta2_true, double sigma);
    std::string name() const override { return "sigmoid"; }
    std::size_t state_dim() const override { return 1; }
    std::size_t action_dim() const override { return 0; }
    StateVec step(const StateVec& state, const StateVec& action) const override;
    StateVec initial_state(Rng& rng) const override;
    double theta1_true() const { return theta1_; }
    double theta2_true() const { return theta2_; }
    double sigma() const { return sigma_; }

private:
    double theta1_, theta2_, sigma_;
};

/// Frictionless cart-pole in swing-up encoding. State is
/// (x, cos(theta), sin(theta), xdot, thetadot) with theta = 0 upright and the
/// pole starting hanging down. Action is a 1-dim force in [-1, 1], integrated
/// with semi-implicit Euler, dt = 0.01, 10 substeps per control step.
class CartpoleSwingup final : public System {
public:
    struct Params {
        double cart_mass = 1.0;
        double pole_mass = 0.1;
        double pole_half_length = 0.5;
        double gravity = 9.81;
        double force_mag = 10.0;
        double dt = 0.01;
        int substeps = 10;
    };

    CartpoleSwingup() : p_() {}
    explicit CartpoleSwingup(Params p) : p_(p) {}
    std::string name() const override { return "cartpole"; }
    std::size_t state_dim() const override { return 5; }
    std::size_t action_dim() const override { return 1; }
    StateVec step(const StateVec& state, const StateVec& action) const override;
    StateVec initial_state(Rng& rng) const override;
    bool has_reward() const override { return true; }
    double reward(const StateVec& state, const StateVec& action) const override;
    const Params& params() const { return p_; }

private:
    Params p_;
};

std::unique_ptr<System> make_system(const std::string& name, double theta = 0.78,
                                    double theta1 = 2.0, double theta2 = 1.0);

}  // namespace msdyn
