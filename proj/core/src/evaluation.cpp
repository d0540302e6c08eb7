#include "msdyn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "msdyn/weights.hpp"

namespace msdyn {

namespace {

struct Accum {
    double sse = 0.0, sy = 0.0, syy = 0.0;
    std::size_t n = 0;
};

Tensor take_rows(const Tensor& t, std::size_t rows) {
    if (rows == t.shape()[0]) return t;
    const std::size_t d = t.shape()[1];
    Tensor out({rows, d});
    std::copy_n(t.values().begin(), rows * d, out.values().begin());
    return out;
}

}  // namespace

EvalReport evaluate(const DynamicsModel& model, const TrajectoryDataset& ds,
                    std::span<const std::size_t> episodes, std::size_t H,
                    bool use_observations) {
    if (H < 1) throw std::invalid_argument("evaluate: H must be >= 1");
    const std::size_t d = ds.meta.state_dim;
    // acc[h-1][dim]
    std::vector<std::vector<Accum>> acc(H, std::vector<Accum>(d));

    for (std::size_t ep : episodes) {
        const Trajectory& traj = ds.trajectories[ep];
        const std::size_t T = traj.length();
        if (T < 2) continue;
        const std::size_t starts = T - 1;

        Tensor state({starts, d});
        for (std::size_t t = 0; t < starts; ++t) {
            const StateVec& s = traj.target(t, use_observations);
            for (std::size_t k = 0; k < d; ++k) state.at(t, k) = s[k];
        }

        const std::size_t hmax = std::min(H, starts);
        for (std::size_t j = 0; j < hmax; ++j) {
            const std::size_t active = starts - j;  // starts t with t + j + 1 <= T - 1
            state = take_rows(state, active);
            Tensor actions;
            if (ds.meta.action_dim > 0) {
                actions = Tensor({active, ds.meta.action_dim});
                for (std::size_t t = 0; t < active; ++t)
                    for (std::size_t k = 0; k < ds.meta.action_dim; ++k)
                        actions.at(t, k) = traj.actions[t + j][k];
            }
            state = model.predict(state, actions);
            for (std::size_t t = 0; t < active; ++t) {
                const StateVec& y = traj.target(t + j + 1, use_observations);
                for (std::size_t k = 0; k < d; ++k) {
                    Accum& a = acc[j][k];
                    const double r = state.at(t, k) - y[k];
                    a.sse += r * r;
                    a.sy += y[k];
                    a.syy += y[k] * y[k];
                    a.n += 1;
                }
            }
        }
    }

    EvalReport rep;
    rep.H = H;
    std::set<std::size_t> degenerate_dims;
    for (std::size_t j = 0; j < H; ++j) {
        std::vector<double> dims(d);
        double sum = 0.0;
        std::size_t kept = 0;
        std::size_t count = 0;
        for (std::size_t k = 0; k < d; ++k) {
            const Accum& a = acc[j][k];
            if (a.n == 0) throw std::runtime_error("evaluate: no sub-trajectories at horizon " +
                                                   std::to_string(j + 1));
            count = a.n;
            const double tot = a.syy - a.sy * a.sy / static_cast<double>(a.n);
            if (tot <= 1e-12) {
                dims[k] = a.sse <= 1e-18 ? 1.0 : kDegenerateR2;
                degenerate_dims.insert(k);
                continue;
            }
            dims[k] = 1.0 - a.sse / tot;
            sum += dims[k];
            ++kept;
        }
        rep.r2_dims.push_back(std::move(dims));
        rep.counts.push_back(count);
        rep.r2.push_back(kept > 0 ? sum / static_cast<double>(kept) : kDegenerateR2);
    }
    for (std::size_t k : degenerate_dims)
        rep.warnings.push_back("dimension " + std::to_string(k) +
                               " has zero target variance; excluded from the R2 average");

    double bar = 0.0;
    for (double r : rep.r2) bar += r;
    rep.r2_bar = bar / static_cast<double>(H);
    rep.config_digest = "model=" + model.kind() + ";H=" + std::to_string(H) +
                        ";episodes=" + std::to_string(episodes.size()) +
                        ";channel=" + (use_observations ? "observation" : "true-state");
    return rep;
}

double r2_at_horizon(const DynamicsModel& model, const TrajectoryDataset& ds,
                     std::span<const std::size_t> episodes, std::size_t h,
                     bool use_observations) {
    return evaluate(model, ds, episodes, h, use_observations).r2.back();
}

double r2_bar(const DynamicsModel& model, const TrajectoryDataset& ds,
              std::span<const std::size_t> episodes, std::size_t H, bool use_observations) {
    return evaluate(model, ds, episodes, H, use_observations).r2_bar;
}

double relative_improvement(const EvalReport& multi, const EvalReport& baseline) {
    if (std::abs(baseline.r2_bar) < 1e-9)
        throw std::invalid_argument("relative_improvement: baseline R2bar too close to zero");
    return 100.0 * (multi.r2_bar - baseline.r2_bar) / std::abs(baseline.r2_bar);
}

long millesimal(double r2) { return std::lround(r2 * 1000.0); }

const std::vector<double>& default_beta_grid() {
    static const std::vector<double> grid = {0.1, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 20.0};
    return grid;
}

GridSearchRecord grid_search_beta(const TrajectoryDataset& ds,
                                  std::span<const std::size_t> episodes, std::size_t h,
                                  std::span<const double> grid, std::size_t folds, std::size_t H,
                                  std::uint64_t seed, const ModelFactory& factory,
                                  const TrainConfig& proto) {
    if (folds < 2 || episodes.size() < folds)
        throw std::invalid_argument("grid_search_beta: need at least one episode per fold");

    GridSearchRecord rec;
    rec.h = h;
    rec.folds = folds;
    rec.H = H;
    rec.grid.assign(grid.begin(), grid.end());

    // Episode-level folds: seeded shuffle, then round-robin assignment, so
    // every episode lands in exactly one validation fold.
    std::vector<std::size_t> order(episodes.begin(), episodes.end());
    Rng fold_rng = Rng(seed).child(0xf01d);
    fold_rng.shuffle(order);
    std::vector<std::vector<std::size_t>> valid_folds(folds), train_folds(folds);
    for (std::size_t i = 0; i < order.size(); ++i) valid_folds[i % folds].push_back(order[i]);
    for (std::size_t f = 0; f < folds; ++f)
        for (std::size_t i = 0; i < order.size(); ++i)
            if (i % folds != f) train_folds[f].push_back(order[i]);

    // Each (beta, fold) cell owns its seed, so execution order is irrelevant.
    for (std::size_t bi = 0; bi < rec.grid.size(); ++bi) {
        for (std::size_t f = 0; f < folds; ++f) {
            GridCell cell;
            cell.beta = rec.grid[bi];
            cell.fold = f;
            const std::uint64_t cell_seed = splitmix64(seed ^ (0x6e1dULL + bi * folds + f));
            try {
                Rng init_rng = Rng(cell_seed).child(1);
                auto model = factory(ds, train_folds[f], init_rng);
                TrainConfig cfg = proto;
                cfg.loss.profile = exp_weights(h, cell.beta);
                cfg.seed = cell_seed;
                train(*model, ds, train_folds[f], valid_folds[f], cfg);
                cell.r2bar = r2_bar(*model, ds, valid_folds[f], H, cfg.use_observations);
            } catch (const std::exception& e) {
                cell.failed = true;
                cell.error = e.what();
                rec.warnings.push_back("cell beta=" + std::to_string(cell.beta) + " fold=" +
                                       std::to_string(f) + " failed: " + e.what());
            }
            rec.cells.push_back(std::move(cell));
        }
    }

    bool any = false;
    double best_mean = 0.0;
    for (std::size_t bi = 0; bi < rec.grid.size(); ++bi) {
        double sum = 0.0, sum2 = 0.0;
        std::size_t n = 0;
        for (std::size_t f = 0; f < folds; ++f) {
            const GridCell& c = rec.cells[bi * folds + f];
            if (c.failed) continue;
            sum += c.r2bar;
            sum2 += c.r2bar * c.r2bar;
            ++n;
        }
        if (n == 0) {
            rec.mean_r2bar.push_back(std::nan(""));
            rec.std_r2bar.push_back(std::nan(""));
            continue;
        }
        const double mean = sum / static_cast<double>(n);
        const double var = std::max(0.0, sum2 / static_cast<double>(n) - mean * mean);
        rec.mean_r2bar.push_back(mean);
        rec.std_r2bar.push_back(std::sqrt(var));
        // Ties within 1e-6 keep the earlier (smaller) beta.
        if (!any || mean > best_mean + 1e-6) {
            any = true;
            best_mean = mean;
            rec.selected_beta = rec.grid[bi];
            rec.selected_r2bar = mean;
        }
    }
    if (!any) throw std::runtime_error("grid_search_beta: every cell failed");
    rec.effective_horizon = effective_horizon(exp_weights(h, rec.selected_beta));
    return rec;
}

namespace {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

LandscapeResult loss_landscape_scan(const LandscapeConfig& cfg) {
    LandscapeResult res;
    auto axis = [](double lo, double hi, std::size_t n) {
        std::vector<double> a(n);
        for (std::size_t i = 0; i < n; ++i)
            a[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        return a;
    };
    res.t1_axis = axis(cfg.t1_lo, cfg.t1_hi, cfg.n1);
    res.t2_axis = axis(cfg.t2_lo, cfg.t2_hi, cfg.n2);
    res.mean_loss.assign(cfg.n1 * cfg.n2, 0.0);

    const Rng master(cfg.seed);
    double am1 = 0.0, am2 = 0.0;
    for (std::size_t draw = 0; draw < cfg.n_draws; ++draw) {
        Rng rng = master.child(draw);
        std::vector<double> s0(cfg.n_samples), o1(cfg.n_samples), o2(cfg.n_samples);
        for (std::size_t i = 0; i < cfg.n_samples; ++i) {
            s0[i] = rng.uniform(-3.0, 3.0);
            const double s1 = cfg.theta1_true * sigmoid(cfg.theta2_true * s0[i]);
            const double s2 = cfg.theta1_true * sigmoid(cfg.theta2_true * s1);
            o1[i] = s1 + cfg.sigma * rng.normal();
            o2[i] = s2 + cfg.sigma * rng.normal();
        }

        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < cfg.n1; ++i) {
            const double t1 = res.t1_axis[i];
            for (std::size_t j = 0; j < cfg.n2; ++j) {
                const double t2 = res.t2_axis[j];
                double l1 = 0.0, l2 = 0.0;
                for (std::size_t k = 0; k < cfg.n_samples; ++k) {
                    const double p1 = t1 * sigmoid(t2 * s0[k]);
                    const double p2 = t1 * sigmoid(t2 * p1);
                    l1 += (p1 - o1[k]) * (p1 - o1[k]);
                    l2 += (p2 - o2[k]) * (p2 - o2[k]);
                }
                const double n = static_cast<double>(cfg.n_samples);
                const double loss = cfg.alpha * l1 / n + (1.0 - cfg.alpha) * l2 / n;
                res.mean_loss[i * cfg.n2 + j] += loss / static_cast<double>(cfg.n_draws);
                if (loss < best) {
                    best = loss;
                    bi = i;
                    bj = j;
                }
            }
        }
        res.argmins.emplace_back(res.t1_axis[bi], res.t2_axis[bj]);
        am1 += res.t1_axis[bi];
        am2 += res.t2_axis[bj];
    }
    res.mean_argmin = {am1 / static_cast<double>(cfg.n_draws),
                       am2 / static_cast<double>(cfg.n_draws)};
    return res;
}

}  // namespace msdyn
