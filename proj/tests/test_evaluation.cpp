#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "msdyn/evaluation.hpp"
#include "msdyn/systems.hpp"

using namespace msdyn;

namespace {

// Always predicts a fixed vector, regardless of the input.
class ConstantModel final : public DynamicsModel {
public:
    explicit ConstantModel(std::vector<double> c) : c_(std::move(c)) {}
    std::string kind() const override { return "constant"; }
    std::size_t state_dim() const override { return c_.size(); }
    std::size_t action_dim() const override { return 0; }
    std::vector<Tensor*> parameters() override { return {}; }
    Val forward(Tape& tape, std::span<const Val>, Val states, Val, Val*, bool,
                Rng*) const override {
        const Tensor& s = tape.value(states);
        Tensor out(s.shape());
        for (std::size_t i = 0; i < s.rows(); ++i)
            for (std::size_t j = 0; j < c_.size(); ++j) out.at(i, j) = c_[j];
        return tape.constant(out);
    }
    void save(const std::string&) const override { throw std::runtime_error("not persistable"); }

private:
    std::vector<double> c_;
};

// True linear dynamics wrapped as a model: the perfect predictor for
// noiseless linear data.
class OracleLinear final : public DynamicsModel {
public:
    explicit OracleLinear(double theta) : theta_(theta) {}
    std::string kind() const override { return "oracle"; }
    std::size_t state_dim() const override { return 1; }
    std::size_t action_dim() const override { return 0; }
    std::vector<Tensor*> parameters() override { return {}; }
    Val forward(Tape& tape, std::span<const Val>, Val states, Val, Val*, bool,
                Rng*) const override {
        return tape.scale(states, theta_);
    }
    void save(const std::string&) const override { throw std::runtime_error("not persistable"); }

private:
    double theta_;
};

// Brute-force R2 oracle: explicit two-pass computation over all rollouts.
double r2_oracle(const DynamicsModel& model, const TrajectoryDataset& ds,
                 std::span<const std::size_t> episodes, std::size_t h, std::size_t dim) {
    std::vector<double> y, yhat;
    for (std::size_t e : episodes) {
        const auto& tr = ds.trajectories[e];
        for (std::size_t t = 0; t + h < tr.length(); ++t) {
            Tensor s({1, ds.meta.state_dim});
            for (std::size_t j = 0; j < ds.meta.state_dim; ++j) s.at(0, j) = tr.observations[t][j];
            std::vector<Tensor> acts;
            for (std::size_t k = 0; k < h; ++k) {
                Tensor a({1, ds.meta.action_dim});
                if (ds.meta.action_dim)
                    for (std::size_t j = 0; j < ds.meta.action_dim; ++j)
                        a.at(0, j) = tr.actions[t + k][j];
                acts.push_back(a);
            }
            auto states = rollout_states(model, s, acts);
            y.push_back(tr.observations[t + h][dim]);
            yhat.push_back(states.back().at(0, dim));
        }
    }
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double sse = 0.0, tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sse += (y[i] - yhat[i]) * (y[i] - yhat[i]);
        tot += (y[i] - mean) * (y[i] - mean);
    }
    return 1.0 - sse / tot;
}

TrajectoryDataset cartpole_data(std::uint64_t seed, double noise, std::size_t episodes = 6,
                                std::size_t horizon = 25) {
    CartpoleSwingup sys;
    return generate_dataset(sys, PolicyKind::RandomUniform, episodes, horizon, seed, noise);
}

}  // namespace

TEST_CASE("perfect model scores R2 = 1 at every horizon") {
    LinearSystem sys(0.78, 0.0);
    TrajectoryDataset ds = generate_dataset(sys, PolicyKind::RandomUniform, 5, 15, 3, 0.0);
    OracleLinear m(0.78);
    std::vector<std::size_t> eps{0, 1, 2, 3, 4};
    EvalReport rep = evaluate(m, ds, eps, 5);
    REQUIRE(rep.r2.size() == 5);
    for (double r : rep.r2) CHECK(r == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rep.r2_bar == doctest::Approx(1.0).epsilon(1e-9));
    for (std::size_t h = 1; h <= 5; ++h) CHECK(rep.counts[h - 1] == 5 * (16 - h));
}

TEST_CASE("predicting the mean scores R2 = 0 at h = 1") {
    LinearSystem sys(0.9, 0.0);
    TrajectoryDataset ds = generate_dataset(sys, PolicyKind::RandomUniform, 8, 10, 7, 0.0);
    // target mean of the h=1 targets
    double mean = 0.0;
    std::size_t n = 0;
    for (const auto& tr : ds.trajectories)
        for (std::size_t t = 1; t < tr.length(); ++t) {
            mean += tr.observations[t][0];
            ++n;
        }
    mean /= static_cast<double>(n);
    ConstantModel m({mean});
    std::vector<std::size_t> eps{0, 1, 2, 3, 4, 5, 6, 7};
    CHECK(r2_at_horizon(m, ds, eps, 1) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("streaming evaluation matches the brute-force oracle") {
    TrajectoryDataset ds = cartpole_data(5, 0.02);
    Rng rng(8);
    MlpDeltaModel::Config cfg;
    cfg.state_dim = 5;
    cfg.action_dim = 1;
    cfg.width = 8;
    MlpDeltaModel m(cfg, InitDist::Default, rng);
    std::vector<std::size_t> eps{0, 2, 4};
    m.normalizer() = Normalizer::fit(ds, eps, true);
    EvalReport rep = evaluate(m, ds, eps, 4);
    for (std::size_t h = 1; h <= 4; ++h)
        for (std::size_t d = 0; d < 5; ++d)
            CHECK(rep.r2_dims[h - 1][d] == doctest::Approx(r2_oracle(m, ds, eps, h, d)).epsilon(1e-10));
}

TEST_CASE("episode order does not change the result") {
    TrajectoryDataset ds = cartpole_data(9, 0.01);
    Rng rng(10);
    MlpDeltaModel::Config cfg;
    cfg.state_dim = 5;
    cfg.action_dim = 1;
    cfg.width = 8;
    MlpDeltaModel m(cfg, InitDist::Default, rng);
    std::vector<std::size_t> a{0, 1, 2, 3};
    std::vector<std::size_t> b{3, 1, 0, 2};
    m.normalizer() = Normalizer::fit(ds, a, true);
    EvalReport ra = evaluate(m, ds, a, 3);
    EvalReport rb = evaluate(m, ds, b, 3);
    for (std::size_t h = 0; h < 3; ++h) CHECK(ra.r2[h] == doctest::Approx(rb.r2[h]).epsilon(1e-12));
}

TEST_CASE("zero-variance target dimensions get the sentinel and a warning") {
    TrajectoryDataset ds;
    ds.meta.env = "test";
    ds.meta.state_dim = 2;
    ds.meta.action_dim = 0;
    Trajectory tr;
    // dim 1 constant at 5
    tr.states = {{1.0, 5.0}, {2.0, 5.0}, {0.5, 5.0}, {1.5, 5.0}};
    tr.observations = tr.states;
    ds.trajectories.push_back(tr);
    std::vector<std::size_t> eps{0};

    // predicts the constant exactly in dim 1: convention value 1
    ConstantModel good({1.0, 5.0});
    EvalReport rg = evaluate(good, ds, eps, 1);
    CHECK(rg.r2_dims[0][1] == 1.0);
    CHECK(!rg.warnings.empty());
    // dim 1 is excluded from the average, so r2[0] equals the dim-0 score
    CHECK(rg.r2[0] == doctest::Approx(rg.r2_dims[0][0]));

    // misses the constant: degenerate sentinel
    ConstantModel bad({1.0, 4.0});
    EvalReport rb = evaluate(bad, ds, eps, 1);
    CHECK(rb.r2_dims[0][1] == kDegenerateR2);
    CHECK(std::isfinite(rb.r2[0]));
}

TEST_CASE("relative improvement arithmetic") {
    EvalReport base, multi;
    base.r2_bar = 0.90;
    multi.r2_bar = 0.95;
    CHECK(relative_improvement(multi, base) == doctest::Approx(100.0 * 0.05 / 0.90));
    base.r2_bar = -0.5;
    multi.r2_bar = -0.4;
    CHECK(relative_improvement(multi, base) == doctest::Approx(20.0));
    base.r2_bar = 0.0;
    CHECK_THROWS(relative_improvement(multi, base));

    CHECK(millesimal(0.9514) == 951);
    CHECK(millesimal(0.99999) == 1000);
    CHECK(millesimal(-0.0123) == -12);
}

TEST_CASE("grid search on noiseless linear data") {
    LinearSystem sys(0.78, 0.0);
    TrajectoryDataset ds = generate_dataset(sys, PolicyKind::RandomUniform, 9, 12, 21, 0.0);
    std::vector<std::size_t> eps{0, 1, 2, 3, 4, 5, 6, 7, 8};
    ModelFactory factory = [](const TrajectoryDataset&, std::span<const std::size_t>, Rng& rng) {
        return std::make_unique<LinearModel>(rng.uniform(-0.5, 0.5));
    };
    TrainConfig proto;
    proto.epochs = 120;
    proto.batch_size = 32;
    proto.learning_rate = 0.05;
    std::vector<double> grid{0.5, 1.0, 2.0};
    GridSearchRecord rec = grid_search_beta(ds, eps, 2, grid, 3, 5, 42, factory, proto);

    REQUIRE(rec.cells.size() == 9);
    for (const auto& c : rec.cells) CHECK(!c.failed);
    // all betas recover theta exactly, so ties resolve to the smallest
    CHECK(rec.selected_beta == 0.5);
    CHECK(rec.selected_r2bar > 1.0 - 1e-6);
    CHECK(rec.effective_horizon == doctest::Approx(4.0 / 3.0));

    // deterministic
    GridSearchRecord rec2 = grid_search_beta(ds, eps, 2, grid, 3, 5, 42, factory, proto);
    CHECK(rec2.selected_beta == rec.selected_beta);
    for (std::size_t i = 0; i < rec.cells.size(); ++i)
        CHECK(rec2.cells[i].r2bar == rec.cells[i].r2bar);

    // folds partition the episodes: every fold index occurs exactly |grid| times
    std::vector<int> seen(3, 0);
    for (const auto& c : rec.cells) seen[c.fold]++;
    for (int s : seen) CHECK(s == 3);
}

TEST_CASE("grid search surfaces failed cells") {
    LinearSystem sys(0.5, 0.0);
    TrajectoryDataset ds = generate_dataset(sys, PolicyKind::RandomUniform, 6, 8, 2, 0.0);
    std::vector<std::size_t> eps{0, 1, 2, 3, 4, 5};
    int calls = 0;
    ModelFactory flaky = [&calls](const TrajectoryDataset&, std::span<const std::size_t>,
                                  Rng& rng) -> std::unique_ptr<DynamicsModel> {
        if (calls++ == 1) throw std::runtime_error("synthetic failure");
        return std::make_unique<LinearModel>(rng.uniform(-0.5, 0.5));
    };
    TrainConfig proto;
    proto.epochs = 30;
    proto.learning_rate = 0.05;
    std::vector<double> grid{1.0};
    GridSearchRecord rec = grid_search_beta(ds, eps, 2, grid, 3, 4, 7, flaky, proto);
    std::size_t failed = 0;
    for (const auto& c : rec.cells) failed += c.failed ? 1 : 0;
    CHECK(failed == 1);
    CHECK(!rec.warnings.empty());
    CHECK(std::isfinite(rec.selected_r2bar));

    ModelFactory broken = [](const TrajectoryDataset&, std::span<const std::size_t>,
                             Rng&) -> std::unique_ptr<DynamicsModel> {
        throw std::runtime_error("always fails");
    };
    CHECK_THROWS(grid_search_beta(ds, eps, 2, grid, 2, 4, 7, broken, proto));
}

TEST_CASE("default beta grid") {
    const auto& g = default_beta_grid();
    CHECK(g.front() == 0.1);
    CHECK(g.back() == 20.0);
    CHECK(std::is_sorted(g.begin(), g.end()));
    CHECK(std::count(g.begin(), g.end(), 1.0) == 1);
}

TEST_CASE("noiseless loss landscape bottoms out at the true parameters") {
    LandscapeConfig cfg;
    cfg.sigma = 0.0;
    cfg.n_draws = 2;
    cfg.n_samples = 40;
    cfg.n1 = cfg.n2 = 21;  // grid contains (2, 1) exactly
    LandscapeResult r = loss_landscape_scan(cfg);
    REQUIRE(r.mean_loss.size() == 21 * 21);
    double best = r.mean_loss[0];
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < r.mean_loss.size(); ++i)
        if (r.mean_loss[i] < best) best = r.mean_loss[best_i = i];
    CHECK(r.t1_axis[best_i / 21] == doctest::Approx(2.0));
    CHECK(r.t2_axis[best_i % 21] == doctest::Approx(1.0));
    CHECK(best == doctest::Approx(0.0));
    for (const auto& [t1, t2] : r.argmins) {
        CHECK(t1 == doctest::Approx(2.0));
        CHECK(t2 == doctest::Approx(1.0));
    }
    CHECK(r.mean_argmin.first == doctest::Approx(2.0));
}

TEST_CASE("argmin dispersion grows with noise") {
    auto spread = [](double sigma) {
        LandscapeConfig cfg;
        cfg.sigma = sigma;
        cfg.n_draws = 8;
        cfg.n_samples = 30;
        cfg.n1 = cfg.n2 = 21;
        cfg.seed = 3;
        LandscapeResult r = loss_landscape_scan(cfg);
        double m1 = 0.0, m2 = 0.0;
        for (const auto& [a, b] : r.argmins) {
            m1 += a;
            m2 += b;
        }
        m1 /= static_cast<double>(r.argmins.size());
        m2 /= static_cast<double>(r.argmins.size());
        double v = 0.0;
        for (const auto& [a, b] : r.argmins)
            v += (a - m1) * (a - m1) + (b - m2) * (b - m2);
        return v / static_cast<double>(r.argmins.size());
    };
    const double s0 = spread(0.0);
    const double s2 = spread(0.2);
    const double s4 = spread(0.4);
    CHECK(s0 == 0.0);
    CHECK(s2 > s0);
    CHECK(s4 >= s2);
}
