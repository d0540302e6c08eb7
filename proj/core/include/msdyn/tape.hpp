#pragma once

#include <cstdint>
#include <vector>

#include "msdyn/rng.hpp"
#include "msdyn/tensor.hpp"

namespace msdyn {

enum class OpKind {
    Leaf,
    Constant,
    Add,
    Sub,
    Mul,      // elementwise, with scalar / row broadcast
    Div,      // elementwise, with scalar / row broadcast
    Scale,    // multiply by a compile-time constant
    MatMul,
    Tanh,
    Sigmoid,
    Square,
    Sqrt,
    Log,
    Exp,
    Softplus,
    Sum,
    Mean,
    Dropout,
};

/// Handle to a node on a Tape.
struct Val {
    std::int32_t idx = -1;
};

/// Reverse-mode autodiff tape. Nodes are appended in topological order
/// (parents always precede children); backward walks them in decreasing
/// index order. Single-threaded by contract; use one tape per worker.
class Tape {
public:
    struct Node {
        OpKind kind;
        std::int32_t a = -1;
        std::int32_t b = -1;
        double scale = 0.0;  // Scale factor / dropout rate
        Tensor value;
        Tensor aux;  // dropout mask
    };

    Val input(Tensor t) { return push({OpKind::Leaf, -1, -1, 0.0, std::move(t), {}}); }
    Val constant(Tensor t) { return push({OpKind::Constant, -1, -1, 0.0, std::move(t), {}}); }
    Val constant(double v) { return constant(Tensor::scalar(v)); }

    Val add(Val a, Val b);
    Val sub(Val a, Val b);
    Val mul(Val a, Val b);
    Val div(Val a, Val b);
    Val scale(Val a, double k);
    Val matmul(Val a, Val b);
    Val tanh(Val a);
    Val sigmoid(Val a);
    Val square(Val a);
    Val sqrt(Val a);
    Val log(Val a);
    Val exp(Val a);
    Val softplus(Val a);
    Val sum(Val a);
    Val mean(Val a);
    /// Seeded dropout mask; kept entries are scaled by 1/(1-rate).
    Val dropout(Val a, double rate, Rng& rng);

    /// mu + sigma * xi with xi ~ N(0, I) drawn once at forward time, so the
    /// sample is differentiable in (mu, sigma).
    Val gaussian_reparam(Val mu, Val sigma, Rng& rng);

    const Tensor& value(Val v) const { return nodes_[v.idx].value; }

    /// Gradient of the last backward() root w.r.t. node v.
    const Tensor& grad(Val v) const { return grads_[v.idx]; }

    /// Accumulates d(root)/d(node) for every node. Root must be scalar.
    void backward(Val root);

    std::size_t size() const { return nodes_.size(); }
    void clear() {
        nodes_.clear();
        grads_.clear();
    }

private:
    Val push(Node n) {
        nodes_.push_back(std::move(n));
        return {static_cast<std::int32_t>(nodes_.size() - 1)};
    }

    Val binary(OpKind kind, Val a, Val b, const char* name);
    Val unary(OpKind kind, Val a);

    // Adds `contrib` (shaped like the op output) into grads_[target],
    // reducing over broadcast dimensions when the operand was broadcast.
    void accumulate(std::int32_t target, const Tensor& contrib);

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

}  // namespace msdyn
