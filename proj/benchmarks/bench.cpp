#include <benchmark/benchmark.h>

#include "msdyn/closed_form.hpp"
#include "msdyn/model.hpp"
#include "msdyn/multistep.hpp"
#include "msdyn/rng.hpp"
#include "msdyn/tape.hpp"
#include "msdyn/weights.hpp"

using namespace msdyn;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.values()) v = rng.normal();
    return t;
}

void bm_matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    Tensor a = random_tensor({n, n}, rng), b = random_tensor({n, n}, rng);
    for (auto _ : state) {
        Tape tape;
        Val r = tape.matmul(tape.constant(a), tape.constant(b));
        benchmark::DoNotOptimize(tape.value(r).data());
    }
}
BENCHMARK(bm_matmul)->Arg(16)->Arg(64)->Arg(128);

void bm_tape_backward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    Tensor x = random_tensor({n, n}, rng), w = random_tensor({n, n}, rng);
    for (auto _ : state) {
        Tape tape;
        Val wv = tape.input(w);
        Val h = tape.tanh(tape.matmul(tape.constant(x), wv));
        Val loss = tape.mean(tape.square(h));
        tape.backward(loss);
        benchmark::DoNotOptimize(tape.grad(wv).data());
    }
}
BENCHMARK(bm_tape_backward)->Arg(16)->Arg(64);

void bm_rollout(benchmark::State& state) {
    const auto h = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    MlpDeltaModel::Config cfg;
    cfg.state_dim = 5;
    cfg.action_dim = 1;
    cfg.dropout = 0.0;
    MlpDeltaModel model(cfg, InitDist::Default, rng);
    Tensor s0 = random_tensor({64, 5}, rng);
    std::vector<Tensor> actions(h, random_tensor({64, 1}, rng));
    for (auto _ : state) {
        auto states = rollout_states(model, s0, actions);
        benchmark::DoNotOptimize(states.back().data());
    }
}
BENCHMARK(bm_rollout)->Arg(1)->Arg(4)->Arg(16);

void bm_cubic_solve(benchmark::State& state) {
    Rng rng(4);
    std::vector<std::array<double, 4>> coeffs(1000);
    for (auto& c : coeffs)
        c = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    std::size_t i = 0;
    for (auto _ : state) {
        const auto& c = coeffs[i++ % coeffs.size()];
        auto roots = solve_cubic_real(c[0], c[1], c[2], c[3]);
        benchmark::DoNotOptimize(roots.data());
    }
}
BENCHMARK(bm_cubic_solve);

}  // namespace

BENCHMARK_MAIN();
