#include "msdyn/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace msdyn {

OptimizerKind Optimizer::parse_kind(const std::string& name) {
    if (name == "sgd" || name == "SGD") return OptimizerKind::SGD;
    if (name == "adam" || name == "Adam") return OptimizerKind::Adam;
    throw std::invalid_argument("unknown optimizer '" + name + "' (expected sgd or adam)");
}

void Optimizer::step(std::vector<Tensor*> params, const std::vector<Tensor>& grads) {
    if (params.size() != grads.size())
        throw std::invalid_argument("optimizer step: " + std::to_string(params.size()) +
                                    " params vs " + std::to_string(grads.size()) + " grads");
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (!params[p]->same_shape(grads[p]))
            throw std::invalid_argument("optimizer step: shape mismatch on parameter " +
                                        std::to_string(p));
        for (double g : grads[p].values())
            if (!std::isfinite(g))
                throw std::runtime_error("optimizer step: non-finite gradient on parameter " +
                                         std::to_string(p));
    }

    if (kind_ == OptimizerKind::Adam && m_.empty()) {
        for (auto* t : params) {
            m_.push_back(Tensor::zeros(t->shape()));
            v_.push_back(Tensor::zeros(t->shape()));
        }
    }

    ++step_;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& w = *params[p];
        const Tensor& g = grads[p];
        if (kind_ == OptimizerKind::SGD) {
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr_ * g[i];
        } else {
            const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
            const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
            for (std::size_t i = 0; i < w.size(); ++i) {
                m_[p][i] = beta1_ * m_[p][i] + (1.0 - beta1_) * g[i];
                v_[p][i] = beta2_ * v_[p][i] + (1.0 - beta2_) * g[i] * g[i];
                const double mhat = m_[p][i] / bc1;
                const double vhat = v_[p][i] / bc2;
                w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }
}

}  // namespace msdyn
