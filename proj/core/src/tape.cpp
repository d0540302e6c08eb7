#include "msdyn/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace msdyn {

namespace {

bool is_scalar(const Tensor& t) { return t.size() == 1; }

// Row-vector broadcast: b is (n) or (1,n) against a (m,n) matrix.
bool row_broadcast(const Tensor& a, const Tensor& b) {
    return a.rank() == 2 && b.size() == a.shape()[1] &&
           (b.rank() == 1 || (b.rank() == 2 && b.shape()[0] == 1));
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + a.shape_str() +
                                " and " + b.shape_str());
}

// Elementwise apply with scalar / row broadcast on either side.
template <typename F>
Tensor broadcast_apply(const char* op, const Tensor& a, const Tensor& b, F f) {
    if (a.same_shape(b)) {
        Tensor out = a;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i]);
        return out;
    }
    if (is_scalar(b)) {
        Tensor out = a;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[0]);
        return out;
    }
    if (is_scalar(a)) {
        Tensor out = b;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[0], b[i]);
        return out;
    }
    if (row_broadcast(a, b)) {
        Tensor out = a;
        const std::size_t n = a.shape()[1];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i % n]);
        return out;
    }
    shape_error(op, a, b);
}

}  // namespace

Val Tape::binary(OpKind kind, Val a, Val b, const char* name) {
    const Tensor& ta = nodes_[a.idx].value;
    const Tensor& tb = nodes_[b.idx].value;
    Tensor out;
    switch (kind) {
        case OpKind::Add:
            out = broadcast_apply(name, ta, tb, [](double x, double y) { return x + y; });
            break;
        case OpKind::Sub:
            out = broadcast_apply(name, ta, tb, [](double x, double y) { return x - y; });
            break;
        case OpKind::Mul:
            out = broadcast_apply(name, ta, tb, [](double x, double y) { return x * y; });
            break;
        case OpKind::Div:
            out = broadcast_apply(name, ta, tb, [](double x, double y) { return x / y; });
            break;
        default:
            throw std::logic_error("binary: bad op");
    }
    return push({kind, a.idx, b.idx, 0.0, std::move(out), {}});
}

Val Tape::add(Val a, Val b) { return binary(OpKind::Add, a, b, "add"); }
Val Tape::sub(Val a, Val b) { return binary(OpKind::Sub, a, b, "sub"); }
Val Tape::mul(Val a, Val b) { return binary(OpKind::Mul, a, b, "mul"); }
Val Tape::div(Val a, Val b) { return binary(OpKind::Div, a, b, "div"); }

Val Tape::scale(Val a, double k) {
    Tensor out = nodes_[a.idx].value;
    for (auto& x : out.values()) x *= k;
    return push({OpKind::Scale, a.idx, -1, k, std::move(out), {}});
}

Val Tape::matmul(Val a, Val b) {
    const Tensor& A = nodes_[a.idx].value;
    const Tensor& B = nodes_[b.idx].value;
    if (A.rank() != 2 || (B.rank() != 1 && B.rank() != 2)) shape_error("matmul", A, B);
    const std::size_t m = A.shape()[0], k = A.shape()[1];
    const std::size_t kb = B.rank() == 2 ? B.shape()[0] : B.shape()[0];
    const std::size_t n = B.rank() == 2 ? B.shape()[1] : 1;
    if (k != kb) shape_error("matmul", A, B);
    Tensor out = B.rank() == 2 ? Tensor({m, n}) : Tensor({m});
    // ikj ordering; good enough at the matrix sizes this project uses.
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out.data() + i * n;
        const double* arow = A.data() + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = B.data() + kk * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return push({OpKind::MatMul, a.idx, b.idx, 0.0, std::move(out), {}});
}

Val Tape::unary(OpKind kind, Val a) {
    Tensor out = nodes_[a.idx].value;
    switch (kind) {
        case OpKind::Tanh:
            for (auto& x : out.values()) x = std::tanh(x);
            break;
        case OpKind::Sigmoid:
            for (auto& x : out.values()) x = 1.0 / (1.0 + std::exp(-x));
            break;
        case OpKind::Square:
            for (auto& x : out.values()) x = x * x;
            break;
        case OpKind::Sqrt:
            for (auto& x : out.values()) x = std::sqrt(x);
            break;
        case OpKind::Log:
            for (auto& x : out.values()) x = std::log(x);
            break;
        case OpKind::Exp:
            for (auto& x : out.values()) x = std::exp(x);
            break;
        case OpKind::Softplus:
            for (auto& x : out.values()) x = x > 30.0 ? x : std::log1p(std::exp(x));
            break;
        default:
            throw std::logic_error("unary: bad op");
    }
    return push({kind, a.idx, -1, 0.0, std::move(out), {}});
}

Val Tape::tanh(Val a) { return unary(OpKind::Tanh, a); }
Val Tape::sigmoid(Val a) { return unary(OpKind::Sigmoid, a); }
Val Tape::square(Val a) { return unary(OpKind::Square, a); }
Val Tape::sqrt(Val a) { return unary(OpKind::Sqrt, a); }
Val Tape::log(Val a) { return unary(OpKind::Log, a); }
Val Tape::exp(Val a) { return unary(OpKind::Exp, a); }
Val Tape::softplus(Val a) { return unary(OpKind::Softplus, a); }

Val Tape::sum(Val a) {
    double s = 0.0;
    for (double x : nodes_[a.idx].value.values()) s += x;
    return push({OpKind::Sum, a.idx, -1, 0.0, Tensor::scalar(s), {}});
}

Val Tape::mean(Val a) {
    const Tensor& t = nodes_[a.idx].value;
    double s = 0.0;
    for (double x : t.values()) s += x;
    return push({OpKind::Mean, a.idx, -1, 0.0, Tensor::scalar(s / static_cast<double>(t.size())), {}});
}

Val Tape::dropout(Val a, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
    const Tensor& t = nodes_[a.idx].value;
    Tensor mask = t;
    const double keep = 1.0 / (1.0 - rate);
    for (auto& m : mask.values()) m = rng.uniform() < rate ? 0.0 : keep;
    Tensor out = t;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    return push({OpKind::Dropout, a.idx, -1, rate, std::move(out), std::move(mask)});
}

Val Tape::gaussian_reparam(Val mu, Val sigma, Rng& rng) {
    Tensor xi = nodes_[mu.idx].value;
    for (auto& x : xi.values()) x = rng.normal();
    Val noise = constant(std::move(xi));
    return add(mu, mul(sigma, noise));
}

void Tape::accumulate(std::int32_t target, const Tensor& contrib) {
    Tensor& g = grads_[target];
    if (g.same_shape(contrib)) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += contrib[i];
        return;
    }
    if (is_scalar(g)) {
        for (double x : contrib.values()) g[0] += x;
        return;
    }
    if (row_broadcast(contrib, g)) {
        const std::size_t n = g.size();
        for (std::size_t i = 0; i < contrib.size(); ++i) g[i % n] += contrib[i];
        return;
    }
    throw std::logic_error("accumulate: gradient shape mismatch " + g.shape_str() + " vs " +
                           contrib.shape_str());
}

void Tape::backward(Val root) {
    if (nodes_[root.idx].value.size() != 1)
        throw std::invalid_argument("backward: root must be scalar, got shape " +
                                    nodes_[root.idx].value.shape_str());
    grads_.assign(nodes_.size(), {});
    for (std::size_t i = 0; i < nodes_.size(); ++i) grads_[i] = Tensor::zeros(nodes_[i].value.shape());
    grads_[root.idx][0] = 1.0;

    for (std::int32_t i = static_cast<std::int32_t>(nodes_.size()) - 1; i >= 0; --i) {
        const Node& n = nodes_[i];
        const Tensor& g = grads_[i];
        switch (n.kind) {
            case OpKind::Leaf:
            case OpKind::Constant:
                break;
            case OpKind::Add:
                accumulate(n.a, g);
                accumulate(n.b, g);
                break;
            case OpKind::Sub: {
                accumulate(n.a, g);
                Tensor neg = g;
                for (auto& x : neg.values()) x = -x;
                accumulate(n.b, neg);
                break;
            }
            case OpKind::Mul: {
                accumulate(n.a, broadcast_apply("mul.bwd", g, nodes_[n.b].value,
                                                [](double gv, double bv) { return gv * bv; }));
                accumulate(n.b, broadcast_apply("mul.bwd", g, nodes_[n.a].value,
                                                [](double gv, double av) { return gv * av; }));
                break;
            }
            case OpKind::Div: {
                // c = a / b: da = g / b, db = -g * c / b
                accumulate(n.a, broadcast_apply("div.bwd", g, nodes_[n.b].value,
                                                [](double gv, double bv) { return gv / bv; }));
                Tensor gc = broadcast_apply("div.bwd", g, n.value,
                                            [](double gv, double cv) { return gv * cv; });
                accumulate(n.b, broadcast_apply("div.bwd", gc, nodes_[n.b].value,
                                                [](double x, double bv) { return -x / bv; }));
                break;
            }
            case OpKind::Scale: {
                Tensor da = g;
                for (auto& x : da.values()) x *= n.scale;
                accumulate(n.a, da);
                break;
            }
            case OpKind::MatMul: {
                const Tensor& A = nodes_[n.a].value;
                const Tensor& B = nodes_[n.b].value;
                const std::size_t m = A.shape()[0], k = A.shape()[1];
                const std::size_t nc = B.rank() == 2 ? B.shape()[1] : 1;
                Tensor dA = Tensor::zeros(A.shape());
                Tensor dB = Tensor::zeros(B.shape());
                // dA = g * B^T, dB = A^T * g
                for (std::size_t i2 = 0; i2 < m; ++i2)
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < nc; ++j) s += g[i2 * nc + j] * B[kk * nc + j];
                        dA[i2 * k + kk] = s;
                    }
                for (std::size_t kk = 0; kk < k; ++kk)
                    for (std::size_t j = 0; j < nc; ++j) {
                        double s = 0.0;
                        for (std::size_t i2 = 0; i2 < m; ++i2) s += A[i2 * k + kk] * g[i2 * nc + j];
                        dB[kk * nc + j] = s;
                    }
                accumulate(n.a, dA);
                accumulate(n.b, dB);
                break;
            }
            case OpKind::Tanh: {
                Tensor da = g;
                for (std::size_t j = 0; j < da.size(); ++j) da[j] *= 1.0 - n.value[j] * n.value[j];
                accumulate(n.a, da);
                break;
            }
            case OpKind::Sigmoid: {
                Tensor da = g;
                for (std::size_t j = 0; j < da.size(); ++j) da[j] *= n.value[j] * (1.0 - n.value[j]);
                accumulate(n.a, da);
                break;
            }
            case OpKind::Square: {
                Tensor da = g;
                for (std::size_t j = 0; j < da.size(); ++j) da[j] *= 2.0 * nodes_[n.a].value[j];
                accumulate(n.a, da);
                break;
            }
            case OpKind::Sqrt: {
                Tensor da = g;
                for (std::size_t j = 0; j < da.size(); ++j) da[j] *= 0.5 / n.value[j];
                accumulate(n.a, da);
                break;
            }
            case OpKind::Log: {
                Tensor da = g;
                for (std::size_t j = 0; j < da.size(); ++j) da[j] /= nodes_[n.a].value[j];
                accumulate(n.a, da);
                break;
            }
            case OpKind::Exp: {
                Tensor da = g;
                for (std::size_t j = 0; j < da.size(); ++j) da[j] *= n.value[j];
                accumulate(n.a, da);
                break;
            }
            case OpKind::Softplus: {
                Tensor da = g;
                const Tensor& a = nodes_[n.a].value;
                for (std::size_t j = 0; j < da.size(); ++j) da[j] *= 1.0 / (1.0 + std::exp(-a[j]));
                accumulate(n.a, da);
                break;
            }
            case OpKind::Sum: {
                Tensor da = Tensor::full(nodes_[n.a].value.shape(), g[0]);
                accumulate(n.a, da);
                break;
            }
            case OpKind::Mean: {
                const double gv = g[0] / static_cast<double>(nodes_[n.a].value.size());
                accumulate(n.a, Tensor::full(nodes_[n.a].value.shape(), gv));
                break;
            }
            case OpKind::Dropout: {
                Tensor da = g;
                for (std::size_t j = 0; j < da.size(); ++j) da[j] *= n.aux[j];
                accumulate(n.a, da);
                break;
            }
        }
    }
}

}  // namespace msdyn
