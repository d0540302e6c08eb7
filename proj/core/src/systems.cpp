#include "msdyn/systems.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace msdyn {

namespace {

void check_finite(const StateVec& s, const char* who) {
    for (double x : s)
        if (!std::isfinite(x)) throw std::runtime_error(std::string(who) + ": non-finite state");
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

LinearSystem::LinearSystem(double theta_true, double sigma) : theta_true_(theta_true), sigma_(sigma) {
    if (std::abs(theta_true) >= 1.0)
        throw std::invalid_argument("LinearSystem: |theta_true| must be < 1 for stability");
    if (sigma < 0.0) throw std::invalid_argument("LinearSystem: sigma must be >= 0");
}

StateVec LinearSystem::step(const StateVec& state, const StateVec&) const {
    if (state.size() != 1) throw std::invalid_argument("LinearSystem: state must be 1-dim");
    check_finite(state, "LinearSystem::step");
    return {theta_true_ * state[0]};
}

StateVec LinearSystem::initial_state(Rng& rng) const {
    const double mag = rng.uniform(0.5, 2.0);
    return {rng.uniform() < 0.5 ? -mag : mag};
}

SigmoidSystem::SigmoidSystem(double theta1_true, double theta2_true, double sigma)
    : theta1_(theta1_true), theta2_(theta2_true), sigma_(sigma) {
    if (!std::isfinite(theta1_true) || !std::isfinite(theta2_true) || !std::isfinite(sigma))
        throw std::invalid_argument("SigmoidSystem: parameters must be finite");
    if (sigma < 0.0) throw std::invalid_argument("SigmoidSystem: sigma must be >= 0");
}

StateVec SigmoidSystem::step(const StateVec& state, const StateVec&) const {
    if (state.size() != 1) throw std::invalid_argument("SigmoidSystem: state must be 1-dim");
    check_finite(state, "SigmoidSystem::step");
    return {theta1_ * sigmoid(theta2_ * state[0])};
}

StateVec SigmoidSystem::initial_state(Rng& rng) const { return {rng.uniform(-3.0, 3.0)}; }

StateVec CartpoleSwingup::step(const StateVec& state, const StateVec& action) const {
    if (state.size() != 5) throw std::invalid_argument("CartpoleSwingup: state must be 5-dim");
    if (action.size() != 1) throw std::invalid_argument("CartpoleSwingup: action must be 1-dim");
    check_finite(state, "CartpoleSwingup::step");

    double x = state[0];
    double theta = std::atan2(state[2], state[1]);
    double xdot = state[3];
    double thetadot = state[4];
    const double a = std::clamp(action[0], -1.0, 1.0);
    const double force = p_.force_mag * a;
    const double total_mass = p_.cart_mass + p_.pole_mass;
    const double ml = p_.pole_mass * p_.pole_half_length;

    for (int i = 0; i < p_.substeps; ++i) {
        const double c = std::cos(theta), s = std::sin(theta);
        const double temp = (force + ml * thetadot * thetadot * s) / total_mass;
        const double theta_acc = (p_.gravity * s - c * temp) /
                                 (p_.pole_half_length * (4.0 / 3.0 - p_.pole_mass * c * c / total_mass));
        const double x_acc = temp - ml * theta_acc * c / total_mass;
        // Semi-implicit Euler: velocities first, then positions.
        thetadot += p_.dt * theta_acc;
        xdot += p_.dt * x_acc;
        theta += p_.dt * thetadot;
        x += p_.dt * xdot;
    }
    return {x, std::cos(theta), std::sin(theta), xdot, thetadot};
}

StateVec CartpoleSwingup::initial_state(Rng& rng) const {
    const double theta = M_PI + rng.uniform(-0.1, 0.1);
    return {0.0, std::cos(theta), std::sin(theta), 0.0, 0.0};
}

double CartpoleSwingup::reward(const StateVec& state, const StateVec& action) const {
    const double x = state[0], cos_theta = state[1], xdot = state[3];
    const double a = action.empty() ? 0.0 : action[0];
    const double ln10 = std::log(10.0);
    const double upright = (1.0 + cos_theta) / 2.0;
    const double centered = (1.0 + std::exp(-0.25 * ln10 * x * x)) / 2.0;
    const double small_control = 1.0 - a * a / 5.0;
    const double small_velocity = (1.0 + std::exp(-0.04 * ln10 * xdot * xdot)) / 2.0;
    return upright * centered * small_control * small_velocity;
}

std::unique_ptr<System> make_system(const std::string& name, double theta, double theta1,
                                    double theta2) {
    if (name == "linear") return std::make_unique<LinearSystem>(theta, 0.0);
    if (name == "sigmoid") return std::make_unique<SigmoidSystem>(theta1, theta2, 0.0);
    if (name == "cartpole") return std::make_unique<CartpoleSwingup>();
    throw std::invalid_argument("unknown system '" + name + "'");
}

}  // namespace msdyn
