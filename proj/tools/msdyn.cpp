// Command-line front end: dataset generation, training, evaluation, beta
// grid search, and the two analytical labs.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "msdyn/closed_form.hpp"
#include "msdyn/dataset.hpp"
#include "msdyn/evaluation.hpp"
#include "msdyn/io.hpp"
#include "msdyn/model.hpp"
#include "msdyn/multistep.hpp"
#include "msdyn/sigmoid_lab.hpp"
#include "msdyn/systems.hpp"
#include "msdyn/weights.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace msdyn;

namespace {

std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t flag_value) {
    if (opt->count() > 0) return flag_value;  // flag or config file
    if (const char* env = std::getenv("MSDYN_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw CLI::ValidationError("MSDYN_SEED", "not an unsigned integer: " + std::string(env));
        }
    }
    return 42;
}

void refuse_existing(const fs::path& p, bool force) {
    if (!force && fs::exists(p))
        throw std::runtime_error("output " + p.string() + " exists; pass --force to overwrite");
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + p.string());
    out << text;
}

void write_resolved_config(CLI::App* cmd, const fs::path& path) {
    write_text(path, "[" + cmd->get_name() + "]\n" + cmd->config_to_str(true, false));
}

std::string params_digest(const DynamicsModel& model) {
    // FNV-1a over the raw parameter bytes.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const Tensor* p : model.parameters()) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p->data());
        for (std::size_t i = 0; i < p->size() * sizeof(double); ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string opt_name(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    if (s.empty()) return out;
    for (std::string_view field : split_csv(s)) out.push_back(parse_double(field));
    return out;
}

// --- gen -------------------------------------------------------------------

struct GenArgs {
    std::string env = "linear";
    double theta = 0.78, theta1 = 2.0, theta2 = 1.0;
    std::size_t episodes = 50, horizon = 200;
    double noise = 0.0;
    std::uint64_t seed = 42;
    std::string out;
    bool force = false;
};

int run_gen(const GenArgs& a, CLI::App* cmd) {
    auto system = make_system(a.env, a.theta, a.theta1, a.theta2);
    TrajectoryDataset ds =
        generate_dataset(*system, PolicyKind::RandomUniform, a.episodes, a.horizon, a.seed, a.noise);
    refuse_existing(a.out, a.force);
    save_dataset(ds, a.out);
    write_resolved_config(cmd, a.out + ".config");
    if (system->has_reward()) {
        for (std::size_t e = 0; e < ds.num_episodes(); ++e) {
            const Trajectory& tr = ds.trajectories[e];
            double ret = 0.0;
            for (std::size_t t = 0; t + 1 < tr.length(); ++t)
                ret += system->reward(tr.states[t], tr.actions[t]);
            std::cout << "episode " << e << " return " << fmt_double(ret) << "\n";
        }
    }
    std::cout << "wrote " << a.out << " (" << ds.num_episodes() << " episodes)\n";
    return 0;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string model = "mlp";
    std::size_t h = 1;
    double beta = 1.0;
    std::string alphas;
    std::string loss = "mse";
    std::size_t epochs = 60, batch = 64;
    std::string optimizer = "adam";
    double lr = 1e-3;
    std::size_t width = 64;
    double dropout = 0.1;
    std::string init = "default";
    std::string target = "observation";
    std::uint64_t seed = 42;
    std::string out_dir;
    bool force = false;
};

std::unique_ptr<DynamicsModel> build_model(const std::string& kind, const TrajectoryDataset& ds,
                                           std::span<const std::size_t> train_eps,
                                           bool use_observations, bool gaussian, std::size_t width,
                                           double dropout, InitDist init, Rng& rng) {
    if (kind == "linear") return std::make_unique<LinearModel>(rng.uniform(-0.5, 0.5));
    if (kind == "sigmoid") return std::make_unique<SigmoidModel>(SigmoidModel::init(init, rng));
    if (kind == "mlp") {
        MlpDeltaModel::Config mc;
        mc.state_dim = ds.meta.state_dim;
        mc.action_dim = ds.meta.action_dim;
        mc.width = width;
        mc.dropout = dropout;
        mc.gaussian = gaussian;
        auto m = std::make_unique<MlpDeltaModel>(mc, init, rng);
        m->normalizer() = Normalizer::fit(ds, train_eps, use_observations);
        return m;
    }
    throw CLI::ValidationError("--model", "unknown model kind: " + kind);
}

int run_train(const TrainArgs& a, CLI::App* cmd) {
    const auto t0 = std::chrono::steady_clock::now();
    TrajectoryDataset ds = load_dataset(a.data);
    EpisodeSplit split = default_split(ds);

    TrainConfig tc;
    tc.loss.profile =
        a.alphas.empty() ? exp_weights(a.h, a.beta) : explicit_weights(parse_list(a.alphas));
    tc.loss.base = a.loss == "nll" ? BaseLoss::NLL : BaseLoss::MSE;
    tc.loss.stochastic = tc.loss.base == BaseLoss::NLL;
    tc.epochs = a.epochs;
    tc.batch_size = a.batch;
    tc.optimizer = Optimizer::parse_kind(a.optimizer);
    tc.learning_rate = a.lr;
    tc.seed = a.seed;
    tc.use_observations = a.target != "true-state";

    Rng init_rng = Rng(a.seed).child(1);
    auto model = build_model(a.model, ds, split.train, tc.use_observations,
                             tc.loss.base == BaseLoss::NLL, a.width, a.dropout,
                             parse_init_dist(a.init), init_rng);

    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);
    refuse_existing(dir / "model.ckpt", a.force);
    refuse_existing(dir / "train_record.json", a.force);

    json record;
    record["data"] = a.data;
    record["model"] = a.model;
    record["loss"] = a.loss;
    record["horizon"] = tc.loss.profile.h;
    record["alphas"] = tc.loss.profile.alphas;
    if (tc.loss.profile.beta) record["beta"] = *tc.loss.profile.beta;
    record["effective_horizon"] = effective_horizon(tc.loss.profile);
    record["epochs"] = a.epochs;
    record["batch_size"] = a.batch;
    record["optimizer"] = a.optimizer;
    record["learning_rate"] = a.lr;
    record["seed"] = a.seed;
    record["target"] = a.target;

    write_resolved_config(cmd, dir / "resolved.config");
    try {
        TrainResult res = train(*model, ds, split.train, split.valid, tc);
        record["train_loss"] = res.train_loss;
        record["valid_one_step"] = res.valid_one_step;
        record["valid_h_step"] = res.valid_h_step;
        if (!res.nll_implicit_weights.empty())
            record["nll_implicit_weights"] = res.nll_implicit_weights;
    } catch (const std::exception& e) {
        record["aborted"] = e.what();
        write_text(dir / "train_record.json", record.dump(2) + "\n");
        throw;
    }
    model->save((dir / "model.ckpt").string());
    record["params_digest"] = params_digest(*model);
    write_text(dir / "train_record.json", record.dump(2) + "\n");

    // Wall time goes to a log, not the record, so reruns stay byte-identical.
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream(dir / "train.log") << "wall_time_seconds " << secs << "\n";
    std::cout << "wrote " << (dir / "model.ckpt").string() << "\n";
    return 0;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
    std::string model_path, baseline_path;
    std::string data;
    std::size_t H = 50;
    std::string split = "test";
    std::string target = "observation";
    bool millesimal_out = false;
    std::string out_dir;
    bool force = false;
};

std::vector<std::size_t> pick_split(const TrajectoryDataset& ds, const std::string& which) {
    EpisodeSplit sp = default_split(ds);
    if (which == "train") return sp.train;
    if (which == "valid") return sp.valid;
    if (which == "test") return sp.test;
    if (which == "all") {
        std::vector<std::size_t> all(ds.num_episodes());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return all;
    }
    throw CLI::ValidationError("--split", "unknown split: " + which);
}

int run_eval(const EvalArgs& a, CLI::App* cmd) {
    TrajectoryDataset ds = load_dataset(a.data);
    auto model = load_model(a.model_path);
    const std::vector<std::size_t> eps = pick_split(ds, a.split);
    const bool use_obs = a.target != "true-state";
    EvalReport rep = evaluate(*model, ds, eps, a.H, use_obs);

    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);
    refuse_existing(dir / "r2_curve.csv", a.force);
    refuse_existing(dir / "summary.json", a.force);

    std::string csv = "h,r2";
    for (std::size_t k = 0; k < ds.meta.state_dim; ++k) csv += ",r2_dim_" + std::to_string(k);
    csv += "\n";
    for (std::size_t j = 0; j < rep.H; ++j) {
        csv += std::to_string(j + 1) + "," + fmt_double(rep.r2[j]);
        for (double v : rep.r2_dims[j]) csv += "," + fmt_double(v);
        csv += "\n";
    }
    write_text(dir / "r2_curve.csv", csv);

    json summary;
    summary["H"] = a.H;
    summary["r2_bar"] = rep.r2_bar;
    summary["counts"] = rep.counts;
    summary["warnings"] = rep.warnings;
    summary["config_digest"] = rep.config_digest;
    if (a.millesimal_out) summary["r2_bar_millesimal"] = millesimal(rep.r2_bar);
    if (!a.baseline_path.empty()) {
        auto base = load_model(a.baseline_path);
        EvalReport brep = evaluate(*base, ds, eps, a.H, use_obs);
        summary["baseline_r2_bar"] = brep.r2_bar;
        summary["relative_improvement_percent"] = relative_improvement(rep, brep);
    }
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    write_resolved_config(cmd, dir / "resolved.config");
    std::cout << "r2_bar " << fmt_double(rep.r2_bar) << "\n";
    return 0;
}

// --- gridsearch --------------------------------------------------------------

struct GridArgs {
    std::string data;
    std::size_t h = 2;
    std::string grid;
    std::size_t folds = 3;
    std::size_t H = 50;
    std::string model = "mlp";
    std::size_t epochs = 15, batch = 64;
    std::string optimizer = "adam";
    double lr = 1e-3;
    std::size_t width = 64;
    double dropout = 0.1;
    std::string init = "default";
    std::string target = "observation";
    std::uint64_t seed = 42;
    std::size_t jobs = 1;
    std::string out_dir;
    bool force = false;
};

int run_gridsearch(const GridArgs& a, CLI::App* cmd) {
    TrajectoryDataset ds = load_dataset(a.data);
    std::vector<std::size_t> eps(ds.num_episodes());
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = i;

    TrainConfig proto;
    proto.epochs = a.epochs;
    proto.batch_size = a.batch;
    proto.optimizer = Optimizer::parse_kind(a.optimizer);
    proto.learning_rate = a.lr;
    proto.use_observations = a.target != "true-state";

    const std::string kind = a.model;
    const std::size_t width = a.width;
    const double dropout = a.dropout;
    const InitDist init = parse_init_dist(a.init);
    const bool use_obs = proto.use_observations;
    ModelFactory factory = [&](const TrajectoryDataset& d, std::span<const std::size_t> train_eps,
                               Rng& rng) {
        return build_model(kind, d, train_eps, use_obs, false, width, dropout, init, rng);
    };

    const std::vector<double> grid = a.grid.empty() ? default_beta_grid() : parse_list(a.grid);
    GridSearchRecord rec =
        grid_search_beta(ds, eps, a.h, grid, a.folds, a.H, a.seed, factory, proto);

    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);
    refuse_existing(dir / "gridsearch.csv", a.force);
    refuse_existing(dir / "summary.json", a.force);

    std::string csv = "h,beta,fold,r2bar\n";
    for (const GridCell& c : rec.cells) {
        csv += std::to_string(rec.h) + "," + fmt_double(c.beta) + "," + std::to_string(c.fold) +
               "," + (c.failed ? "nan" : fmt_double(c.r2bar)) + "\n";
    }
    write_text(dir / "gridsearch.csv", csv);

    json summary;
    summary["h"] = rec.h;
    summary["H"] = rec.H;
    summary["folds"] = rec.folds;
    summary["grid"] = rec.grid;
    summary["mean_r2bar"] = rec.mean_r2bar;
    summary["std_r2bar"] = rec.std_r2bar;
    summary["selected_beta"] = rec.selected_beta;
    summary["selected_r2bar"] = rec.selected_r2bar;
    summary["effective_horizon"] = rec.effective_horizon;
    summary["warnings"] = rec.warnings;
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    write_resolved_config(cmd, dir / "resolved.config");
    std::cout << "selected beta " << fmt_double(rec.selected_beta) << " (effective horizon "
              << fmt_double(rec.effective_horizon) << ")\n";
    for (const std::string& w : rec.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

// --- linear-lab --------------------------------------------------------------

struct LinearLabArgs {
    std::string thetas;  // empty = ten values spread over (0.3, 0.95)
    std::string sigmas = "0,0.25,0.5,0.75,1";
    std::string alphas = "0,0.5,1";
    std::size_t n_mc = 100;
    std::uint64_t seed = 42;
    bool baselines = true;
    double taylor_theta = 0.9, taylor_s = 10.0, taylor_sigma = 0.1;
    std::size_t taylor_n_mc = 100000;
    std::string out_dir;
    bool force = false;
};

void append_entries(std::string& csv, const BiasVarianceReport& rep) {
    for (const BiasVarianceEntry& e : rep.entries) {
        csv += e.variant + "," + fmt_double(e.alpha) + "," + fmt_double(e.sigma) + "," +
               fmt_double(e.bias) + "," + fmt_double(e.bias_ci_lo) + "," +
               fmt_double(e.bias_ci_hi) + "," + fmt_double(e.variance) + "," +
               fmt_double(e.var_ci_lo) + "," + fmt_double(e.var_ci_hi) + "," +
               std::to_string(e.n_samples) + "," + std::to_string(e.n_dropped) + "\n";
    }
}

int run_linear_lab(const LinearLabArgs& a, CLI::App* cmd) {
    BiasVarianceConfig cfg;
    if (a.thetas.empty()) {
        for (std::size_t i = 0; i < 10; ++i)
            cfg.theta_true_list.push_back(0.3 + 0.65 * (static_cast<double>(i) + 0.5) / 10.0);
    } else {
        cfg.theta_true_list = parse_list(a.thetas);
    }
    cfg.sigma_list = parse_list(a.sigmas);
    cfg.alpha_list = parse_list(a.alphas);
    cfg.n_mc = a.n_mc;
    cfg.seed = a.seed;

    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);
    refuse_existing(dir / "bias_variance.csv", a.force);
    refuse_existing(dir / "summary.json", a.force);

    std::string csv =
        "variant,alpha,sigma,bias,bias_ci_lo,bias_ci_hi,variance,var_ci_lo,var_ci_hi,n,dropped\n";
    append_entries(csv, bias_variance_study(cfg));
    if (a.baselines) {
        append_entries(csv, augmented_baseline_study(cfg));
        append_entries(csv, averaging_baseline_study(cfg));
    }
    write_text(dir / "bias_variance.csv", csv);

    TaylorVarianceResult tv =
        taylor_variance_check(a.taylor_theta, a.taylor_s, a.taylor_sigma, a.taylor_n_mc, a.seed);
    std::string tcsv = "theta,s,sigma,approx,empirical,relative_error,in_regime,dropped\n";
    tcsv += fmt_double(a.taylor_theta) + "," + fmt_double(a.taylor_s) + "," +
            fmt_double(a.taylor_sigma) + "," + fmt_double(tv.approx) + "," +
            fmt_double(tv.empirical) + "," + fmt_double(tv.relative_error) + "," +
            (tv.in_validity_regime ? "1" : "0") + "," + std::to_string(tv.n_dropped) + "\n";
    write_text(dir / "taylor.csv", tcsv);

    json summary;
    summary["thetas"] = cfg.theta_true_list;
    summary["sigmas"] = cfg.sigma_list;
    summary["alphas"] = cfg.alpha_list;
    summary["n_mc"] = cfg.n_mc;
    summary["seed"] = cfg.seed;
    summary["baselines"] = a.baselines;
    summary["taylor"] = {{"approx", tv.approx},
                         {"empirical", tv.empirical},
                         {"relative_error", tv.relative_error},
                         {"in_regime", tv.in_validity_regime}};
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    write_resolved_config(cmd, dir / "resolved.config");
    return 0;
}

// --- sigmoid-lab -------------------------------------------------------------

struct SigmoidLabArgs {
    SigmoidAblationConfig cfg;
    std::string alphas = "0,0.25,0.5,0.75,1";
    std::string noise = "0,0.2,0.4";
    bool landscape = false;
    LandscapeConfig land;
    std::string out_dir;
    bool force = false;
};

int run_sigmoid_lab(SigmoidLabArgs a, CLI::App* cmd) {
    a.cfg.alphas = parse_list(a.alphas);
    a.cfg.noise_percents = parse_list(a.noise);
    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);
    refuse_existing(dir / "ablation.csv", a.force);
    refuse_existing(dir / "ablation_summary.csv", a.force);

    SigmoidAblationResult res = sigmoid_ablation(a.cfg);

    std::string csv =
        "alpha,optimizer,init,noise,start,mc,valid_one_step,valid_two_step,theta1,theta2\n";
    for (const SigmoidAblationRow& r : res.rows) {
        csv += fmt_double(r.alpha) + "," + opt_name(r.optimizer) + "," + init_dist_name(r.init) +
               "," + fmt_double(r.noise_percent) + "," + std::to_string(r.start) + "," +
               std::to_string(r.mc) + "," + fmt_double(r.valid_one_step) + "," +
               fmt_double(r.valid_two_step) + "," + fmt_double(r.theta1) + "," +
               fmt_double(r.theta2) + "\n";
    }
    write_text(dir / "ablation.csv", csv);

    std::string agg =
        "alpha,mean_valid_one_step,mean_valid_two_step,mean_combined,"
        "median_valid_one_step,median_valid_two_step,median_combined\n";
    for (std::size_t i = 0; i < res.alphas.size(); ++i)
        agg += fmt_double(res.alphas[i]) + "," + fmt_double(res.mean_one_step[i]) + "," +
               fmt_double(res.mean_two_step[i]) + "," + fmt_double(res.mean_combined[i]) + "," +
               fmt_double(res.median_one_step[i]) + "," + fmt_double(res.median_two_step[i]) +
               "," + fmt_double(res.median_combined[i]) + "\n";
    write_text(dir / "ablation_summary.csv", agg);

    if (a.landscape) {
        LandscapeResult lr = loss_landscape_scan(a.land);
        std::string lcsv = "theta1,theta2,mean_loss\n";
        for (std::size_t i = 0; i < lr.t1_axis.size(); ++i)
            for (std::size_t j = 0; j < lr.t2_axis.size(); ++j)
                lcsv += fmt_double(lr.t1_axis[i]) + "," + fmt_double(lr.t2_axis[j]) + "," +
                        fmt_double(lr.mean_loss[i * lr.t2_axis.size() + j]) + "\n";
        write_text(dir / "landscape.csv", lcsv);
        std::string acsv = "draw,theta1,theta2\n";
        for (std::size_t d = 0; d < lr.argmins.size(); ++d)
            acsv += std::to_string(d) + "," + fmt_double(lr.argmins[d].first) + "," +
                    fmt_double(lr.argmins[d].second) + "\n";
        write_text(dir / "landscape_argmins.csv", acsv);
    }
    write_resolved_config(cmd, dir / "resolved.config");
    return 0;
}

void add_common(CLI::App* cmd, std::uint64_t& seed, CLI::Option*& seed_opt, bool& force) {
    seed_opt = cmd->add_option("--seed", seed, "random seed (flag > config > MSDYN_SEED > 42)");
    // not configurable: an overwrite guard, not part of the reproducible run
    cmd->add_flag("--force", force, "overwrite existing outputs")->configurable(false);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"weighted multi-step loss workbench"};
    app.set_help_flag("--help", "print usage");  // frees -h / --h for the horizon
    app.option_defaults()->always_capture_default(true);
    app.set_config("--config", "",
                   "key = value config file with [subcommand] sections (flags override)");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);

    GenArgs gen;
    CLI::Option* gen_seed_opt = nullptr;
    auto* cgen = app.add_subcommand("gen", "generate a trajectory dataset");
    cgen->add_option("--env", gen.env, "linear | sigmoid | cartpole");
    cgen->add_option("--theta", gen.theta, "linear system parameter");
    cgen->add_option("--theta1", gen.theta1, "sigmoid system scale");
    cgen->add_option("--theta2", gen.theta2, "sigmoid system slope");
    cgen->add_option("--episodes", gen.episodes);
    cgen->add_option("--horizon", gen.horizon, "steps per episode");
    cgen->add_option("--noise", gen.noise, "noise scale, fraction of state range");
    cgen->add_option("--out", gen.out, "dataset file")->required();
    add_common(cgen, gen.seed, gen_seed_opt, gen.force);

    TrainArgs tr;
    CLI::Option* tr_seed_opt = nullptr;
    auto* ctrain = app.add_subcommand("train", "train a dynamics model");
    ctrain->add_option("--data", tr.data, "dataset file")->required();
    ctrain->add_option("--model", tr.model, "linear | sigmoid | mlp");
    ctrain->add_option("--h", tr.h, "loss horizon");
    ctrain->add_option("--beta", tr.beta, "exponential weight parameter");
    ctrain->add_option("--alphas", tr.alphas, "explicit weights (override --beta)");
    ctrain->add_option("--loss", tr.loss, "mse | nll");
    ctrain->add_option("--epochs", tr.epochs);
    ctrain->add_option("--batch", tr.batch);
    ctrain->add_option("--optimizer", tr.optimizer, "adam | sgd");
    ctrain->add_option("--lr", tr.lr);
    ctrain->add_option("--width", tr.width, "mlp hidden width");
    ctrain->add_option("--dropout", tr.dropout);
    ctrain->add_option("--init", tr.init, "default | uniform | xavier-uniform");
    ctrain->add_option("--target", tr.target, "observation | true-state");
    ctrain->add_option("--out-dir", tr.out_dir)->required();
    add_common(ctrain, tr.seed, tr_seed_opt, tr.force);

    EvalArgs ev;
    CLI::Option* ev_seed_opt = nullptr;
    std::uint64_t ev_seed = 42;  // unused; evaluation is deterministic
    auto* ceval = app.add_subcommand("eval", "static R2 evaluation of a checkpoint");
    ceval->add_option("--model", ev.model_path, "model checkpoint")->required();
    ceval->add_option("--baseline", ev.baseline_path, "baseline checkpoint for relative improvement");
    ceval->add_option("--data", ev.data, "dataset file")->required();
    ceval->add_option("--H", ev.H, "max horizon");
    ceval->add_option("--split", ev.split, "train | valid | test | all");
    ceval->add_option("--target", ev.target, "observation | true-state");
    ceval->add_flag("--millesimal", ev.millesimal_out, "also report r2_bar x1000");
    ceval->add_option("--out-dir", ev.out_dir)->required();
    add_common(ceval, ev_seed, ev_seed_opt, ev.force);

    GridArgs gs;
    CLI::Option* gs_seed_opt = nullptr;
    auto* cgrid = app.add_subcommand("gridsearch", "cross-validated beta grid search");
    cgrid->add_option("--data", gs.data, "dataset file")->required();
    cgrid->add_option("--h", gs.h, "loss horizon");
    cgrid->add_option("--grid", gs.grid, "beta grid (default built-in)");
    cgrid->add_option("--folds", gs.folds);
    cgrid->add_option("--H", gs.H, "evaluation horizon");
    cgrid->add_option("--model", gs.model, "linear | sigmoid | mlp");
    cgrid->add_option("--epochs", gs.epochs);
    cgrid->add_option("--batch", gs.batch);
    cgrid->add_option("--optimizer", gs.optimizer);
    cgrid->add_option("--lr", gs.lr);
    cgrid->add_option("--width", gs.width);
    cgrid->add_option("--dropout", gs.dropout);
    cgrid->add_option("--init", gs.init);
    cgrid->add_option("--target", gs.target, "observation | true-state");
    cgrid->add_option("--jobs", gs.jobs, "worker thread cap");
    cgrid->add_option("--out-dir", gs.out_dir)->required();
    add_common(cgrid, gs.seed, gs_seed_opt, gs.force);

    LinearLabArgs ll;
    CLI::Option* ll_seed_opt = nullptr;
    auto* clin = app.add_subcommand("linear-lab", "linear-system bias/variance study");
    clin->add_option("--thetas", ll.thetas, "true parameters (default: ten in (0.3, 0.95))");
    clin->add_option("--sigmas", ll.sigmas);
    clin->add_option("--alphas", ll.alphas);
    clin->add_option("--n-mc", ll.n_mc, "Monte Carlo draws per cell");
    clin->add_flag("--baselines,!--no-baselines", ll.baselines, "include the two baselines");
    clin->add_option("--taylor-theta", ll.taylor_theta);
    clin->add_option("--taylor-s", ll.taylor_s);
    clin->add_option("--taylor-sigma", ll.taylor_sigma);
    clin->add_option("--taylor-n-mc", ll.taylor_n_mc);
    clin->add_option("--out-dir", ll.out_dir)->required();
    add_common(clin, ll.seed, ll_seed_opt, ll.force);

    SigmoidLabArgs sl;
    CLI::Option* sl_seed_opt = nullptr;
    auto* csig = app.add_subcommand("sigmoid-lab", "two-parameter sigmoid ablation");
    csig->add_option("--alphas", sl.alphas, "one-step weights to ablate");
    csig->add_option("--noise", sl.noise, "noise scales, fraction of state range");
    csig->add_option("--starts", sl.cfg.n_starts, "initial points per cell");
    csig->add_option("--mc", sl.cfg.n_mc, "dataset draws per noise level");
    csig->add_option("--epochs", sl.cfg.epochs);
    csig->add_option("--lr-adam", sl.cfg.lr_adam);
    csig->add_option("--lr-sgd", sl.cfg.lr_sgd);
    csig->add_option("--episodes", sl.cfg.episodes);
    csig->add_option("--horizon", sl.cfg.horizon);
    csig->add_flag("--landscape", sl.landscape, "also scan the two-step loss surface");
    csig->add_option("--landscape-alpha", sl.land.alpha);
    csig->add_option("--landscape-sigma", sl.land.sigma);
    csig->add_option("--landscape-draws", sl.land.n_draws);
    csig->add_option("--out-dir", sl.out_dir)->required();
    add_common(csig, sl.cfg.seed, sl_seed_opt, sl.force);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 1;
    }

    try {
        if (cgen->parsed()) {
            gen.seed = resolve_seed(gen_seed_opt, gen.seed);
            return run_gen(gen, cgen);
        }
        if (ctrain->parsed()) {
            tr.seed = resolve_seed(tr_seed_opt, tr.seed);
            return run_train(tr, ctrain);
        }
        if (ceval->parsed()) return run_eval(ev, ceval);
        if (cgrid->parsed()) {
            gs.seed = resolve_seed(gs_seed_opt, gs.seed);
            return run_gridsearch(gs, cgrid);
        }
        if (clin->parsed()) {
            ll.seed = resolve_seed(ll_seed_opt, ll.seed);
            return run_linear_lab(ll, clin);
        }
        if (csig->parsed()) {
            sl.cfg.seed = resolve_seed(sl_seed_opt, sl.cfg.seed);
            sl.land.seed = sl.cfg.seed;
            return run_sigmoid_lab(sl, csig);
        }
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
