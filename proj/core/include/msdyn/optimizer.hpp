#pragma once

#include <string>
#include <vector>

#include "msdyn/tensor.hpp"

namespace msdyn {

enum class OptimizerKind { SGD, Adam };

/// SGD or bias-corrected Adam over a fixed list of parameter tensors.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, double lr, double beta1 = 0.9, double beta2 = 0.999,
              double eps = 1e-8)
        : kind_(kind), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    OptimizerKind kind() const { return kind_; }
    double learning_rate() const { return lr_; }
    long step_count() const { return step_; }

    /// In-place update. Throws on non-finite gradients, naming the parameter
    /// by index.
    void step(std::vector<Tensor*> params, const std::vector<Tensor>& grads);

    static OptimizerKind parse_kind(const std::string& name);

private:
    OptimizerKind kind_;
    double lr_, beta1_, beta2_, eps_;
    long step_ = 0;
    std::vector<Tensor> m_, v_;
};

}  // namespace msdyn
