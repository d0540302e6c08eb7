#include "msdyn/sigmoid_lab.hpp"

#include <stdexcept>
#include <algorithm>

#include "msdyn/dataset.hpp"
#include "msdyn/systems.hpp"
#include "msdyn/weights.hpp"

namespace msdyn {

SigmoidAblationResult sigmoid_ablation(const SigmoidAblationConfig& cfg) {
    if (cfg.episodes < 2) throw std::invalid_argument("sigmoid_ablation: need >= 2 episodes");

    SigmoidSystem system(cfg.theta1_true, cfg.theta2_true, 0.0);
    std::vector<std::size_t> train_eps, valid_eps;
    for (std::size_t e = 0; e + 1 < cfg.episodes; ++e) train_eps.push_back(e);
    valid_eps.push_back(cfg.episodes - 1);

    const Rng master(cfg.seed);
    SigmoidAblationResult res;
    res.alphas = cfg.alphas;
    res.mean_one_step.assign(cfg.alphas.size(), 0.0);
    res.mean_two_step.assign(cfg.alphas.size(), 0.0);

    std::uint64_t run = 0;
    for (std::size_t ni = 0; ni < cfg.noise_percents.size(); ++ni) {
        for (std::size_t mc = 0; mc < cfg.n_mc; ++mc) {
            const std::uint64_t ds_seed =
                splitmix64(cfg.seed ^ (0xda7aULL + ni * cfg.n_mc + mc));
            TrajectoryDataset ds = generate_dataset(system, PolicyKind::RandomUniform,
                                                    cfg.episodes, cfg.horizon, ds_seed,
                                                    cfg.noise_percents[ni]);
            for (std::size_t ai = 0; ai < cfg.alphas.size(); ++ai) {
                const double alpha = cfg.alphas[ai];
                for (OptimizerKind opt : cfg.optimizers) {
                    for (InitDist init : cfg.inits) {
                        for (std::size_t start = 0; start < cfg.n_starts; ++start) {
                            ++run;
                            Rng init_rng = master.child(run);
                            SigmoidModel model = SigmoidModel::init(init, init_rng);

                            TrainConfig tc;
                            tc.loss.profile = explicit_weights({alpha, 1.0 - alpha});
                            tc.epochs = cfg.epochs;
                            tc.batch_size = cfg.batch_size;
                            tc.optimizer = opt;
                            tc.learning_rate =
                                opt == OptimizerKind::Adam ? cfg.lr_adam : cfg.lr_sgd;
                            tc.seed = splitmix64(cfg.seed ^ run);

                            TrainResult tr = train(model, ds, train_eps, valid_eps, tc);

                            SigmoidAblationRow row;
                            row.alpha = alpha;
                            row.optimizer = opt;
                            row.init = init;
                            row.noise_percent = cfg.noise_percents[ni];
                            row.start = start;
                            row.mc = mc;
                            row.valid_one_step = tr.valid_one_step.back();
                            row.valid_two_step = tr.valid_h_step.back();
                            row.theta1 = model.theta1();
                            row.theta2 = model.theta2();
                            res.rows.push_back(row);

                            res.mean_one_step[ai] += row.valid_one_step;
                            res.mean_two_step[ai] += row.valid_two_step;
                        }
                    }
                }
            }
        }
    }

    const double runs_per_alpha =
        static_cast<double>(res.rows.size()) / static_cast<double>(cfg.alphas.size());
    for (std::size_t ai = 0; ai < cfg.alphas.size(); ++ai) {
        res.mean_one_step[ai] /= runs_per_alpha;
        res.mean_two_step[ai] /= runs_per_alpha;
        res.mean_combined.push_back(0.5 * (res.mean_one_step[ai] + res.mean_two_step[ai]));

        std::vector<double> one, two;
        for (const auto& row : res.rows)
            if (row.alpha == cfg.alphas[ai]) {
                one.push_back(row.valid_one_step);
                two.push_back(row.valid_two_step);
            }
        auto median = [](std::vector<double>& v) {
            std::sort(v.begin(), v.end());
            const std::size_t n = v.size();
            return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
        };
        res.median_one_step.push_back(median(one));
        res.median_two_step.push_back(median(two));
        res.median_combined.push_back(
            0.5 * (res.median_one_step[ai] + res.median_two_step[ai]));
    }
    return res;
}

}  // namespace msdyn
