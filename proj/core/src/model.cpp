#include "msdyn/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace msdyn {

using nlohmann::json;

InitDist parse_init_dist(const std::string& name) {
    if (name == "default") return InitDist::Default;
    if (name == "uniform") return InitDist::Uniform;
    if (name == "xavier-uniform" || name == "xavier_uniform") return InitDist::XavierUniform;
    throw std::invalid_argument("unknown init distribution '" + name + "'");
}

std::string init_dist_name(InitDist d) {
    switch (d) {
        case InitDist::Default: return "default";
        case InitDist::Uniform: return "uniform";
        case InitDist::XavierUniform: return "xavier-uniform";
    }
    return "?";
}

Normalizer Normalizer::identity(std::size_t state_dim, std::size_t action_dim) {
    Normalizer n;
    n.in_mean.assign(state_dim + action_dim, 0.0);
    n.in_std.assign(state_dim + action_dim, 1.0);
    n.delta_mean.assign(state_dim, 0.0);
    n.delta_std.assign(state_dim, 1.0);
    return n;
}

Normalizer Normalizer::fit(const TrajectoryDataset& ds, std::span<const std::size_t> episodes,
                           bool use_observations) {
    if (episodes.empty()) throw std::invalid_argument("Normalizer::fit: empty train split");
    const std::size_t d_s = ds.meta.state_dim, d_a = ds.meta.action_dim;
    const std::size_t d_in = d_s + d_a;
    std::vector<double> in_sum(d_in, 0.0), in_sq(d_in, 0.0);
    std::vector<double> dl_sum(d_s, 0.0), dl_sq(d_s, 0.0);
    std::size_t n = 0;
    for (std::size_t ep : episodes) {
        const Trajectory& traj = ds.trajectories[ep];
        for (std::size_t t = 0; t + 1 < traj.length(); ++t) {
            const StateVec& s = traj.target(t, use_observations);
            const StateVec& s1 = traj.target(t + 1, use_observations);
            for (std::size_t j = 0; j < d_s; ++j) {
                in_sum[j] += s[j];
                in_sq[j] += s[j] * s[j];
                const double dl = s1[j] - s[j];
                dl_sum[j] += dl;
                dl_sq[j] += dl * dl;
            }
            for (std::size_t j = 0; j < d_a; ++j) {
                const double a = traj.actions[t][j];
                in_sum[d_s + j] += a;
                in_sq[d_s + j] += a * a;
            }
            ++n;
        }
    }
    if (n == 0) throw std::invalid_argument("Normalizer::fit: no transitions in train split");
    auto finish = [n](std::vector<double>& sum, std::vector<double>& sq, std::vector<double>& mean,
                      std::vector<double>& std) {
        const double dn = static_cast<double>(n);
        mean.resize(sum.size());
        std.resize(sum.size());
        for (std::size_t j = 0; j < sum.size(); ++j) {
            mean[j] = sum[j] / dn;
            const double var = std::max(0.0, sq[j] / dn - mean[j] * mean[j]);
            std[j] = var > 1e-24 ? std::sqrt(var) : 1.0;  // zero-variance: scale 1
        }
    };
    Normalizer norm;
    finish(in_sum, in_sq, norm.in_mean, norm.in_std);
    finish(dl_sum, dl_sq, norm.delta_mean, norm.delta_std);
    return norm;
}

Tensor DynamicsModel::predict(const Tensor& states, const Tensor& actions) const {
    Tape tape;
    std::vector<Val> pv;
    for (const Tensor* p : parameters()) pv.push_back(tape.constant(*p));
    Val s = tape.input(states);
    Val a = actions.size() > 0 ? tape.input(actions) : tape.constant(0.0);
    Val out = forward(tape, pv, s, a, nullptr, false, nullptr);
    return tape.value(out);
}

std::pair<Tensor, Tensor> DynamicsModel::predict_gaussian(const Tensor& states,
                                                          const Tensor& actions) const {
    Tape tape;
    std::vector<Val> pv;
    for (const Tensor* p : parameters()) pv.push_back(tape.constant(*p));
    Val s = tape.input(states);
    Val a = actions.size() > 0 ? tape.input(actions) : tape.constant(0.0);
    Val sigma{};
    Val out = forward(tape, pv, s, a, &sigma, false, nullptr);
    return {tape.value(out), tape.value(sigma)};
}

Val LinearModel::forward(Tape& tape, std::span<const Val> params, Val states, Val, Val*, bool,
                         Rng*) const {
    return tape.mul(states, params[0]);
}

Val SigmoidModel::forward(Tape& tape, std::span<const Val> params, Val states, Val, Val*, bool,
                          Rng*) const {
    return tape.mul(tape.sigmoid(tape.mul(states, params[1])), params[0]);
}

SigmoidModel SigmoidModel::init(InitDist dist, Rng& rng) {
    // fan_in = fan_out = 1 for both scalar layers.
    const double bound = dist == InitDist::XavierUniform ? std::sqrt(3.0) : 1.0;
    return SigmoidModel(rng.uniform(-bound, bound), rng.uniform(-bound, bound));
}

namespace {

double init_bound(InitDist dist, std::size_t fan_in, std::size_t fan_out) {
    switch (dist) {
        case InitDist::Default: return 1.0 / std::sqrt(static_cast<double>(fan_in));
        case InitDist::Uniform: return 1.0;
        case InitDist::XavierUniform:
            return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    }
    return 0.0;
}

Tensor init_matrix(std::size_t r, std::size_t c, InitDist dist, Rng& rng) {
    Tensor t({r, c});
    const double b = init_bound(dist, r, c);
    for (auto& x : t.values()) x = rng.uniform(-b, b);
    return t;
}

Tensor init_bias(std::size_t n, std::size_t fan_in, InitDist dist, Rng& rng) {
    Tensor t({n});
    if (dist == InitDist::XavierUniform) return t;  // zeros
    const double b = dist == InitDist::Uniform ? 1.0 : 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& x : t.values()) x = rng.uniform(-b, b);
    return t;
}

}  // namespace

MlpDeltaModel::MlpDeltaModel(Config cfg, InitDist dist, Rng& rng)
    : cfg_(cfg), norm_(Normalizer::identity(cfg.state_dim, cfg.action_dim)) {
    const std::size_t ds = cfg_.state_dim, da = cfg_.action_dim, w = cfg_.width;
    params_.push_back(init_matrix(ds, w, dist, rng));              // W1s
    if (da > 0) params_.push_back(init_matrix(da, w, dist, rng));  // W1a
    params_.push_back(init_bias(w, ds + da, dist, rng));           // b1
    params_.push_back(init_matrix(w, w, dist, rng));               // W2
    params_.push_back(init_bias(w, w, dist, rng));                 // b2
    params_.push_back(init_matrix(w, ds, dist, rng));              // Wm
    params_.push_back(init_bias(ds, w, dist, rng));                // bm
    if (cfg_.gaussian) {
        params_.push_back(init_matrix(w, ds, dist, rng));  // Ws
        params_.push_back(init_bias(ds, w, dist, rng));    // bs
    }
}

std::vector<Tensor*> MlpDeltaModel::parameters() {
    std::vector<Tensor*> out;
    for (auto& t : params_) out.push_back(&t);
    return out;
}

void MlpDeltaModel::zero_output_heads() {
    const std::size_t head_params = cfg_.gaussian ? 4 : 2;
    for (std::size_t i = params_.size() - head_params; i < params_.size(); ++i)
        for (auto& x : params_[i].values()) x = 0.0;
}

Val MlpDeltaModel::forward(Tape& tape, std::span<const Val> params, Val states, Val actions,
                           Val* sigma_out, bool training, Rng* rng) const {
    const std::size_t ds = cfg_.state_dim, da = cfg_.action_dim;
    std::size_t pi = 0;
    const Val w1s = params[pi++];
    const Val w1a = da > 0 ? params[pi++] : Val{};
    const Val b1 = params[pi++];
    const Val w2 = params[pi++];
    const Val b2 = params[pi++];
    const Val wm = params[pi++];
    const Val bm = params[pi++];

    auto row = [&](const std::vector<double>& v, std::size_t off, std::size_t n) {
        return tape.constant(Tensor({n}, std::vector<double>(v.begin() + off, v.begin() + off + n)));
    };
    const Val xs = tape.div(tape.sub(states, row(norm_.in_mean, 0, ds)), row(norm_.in_std, 0, ds));
    Val z = tape.matmul(xs, w1s);
    if (da > 0) {
        const Val xa =
            tape.div(tape.sub(actions, row(norm_.in_mean, ds, da)), row(norm_.in_std, ds, da));
        z = tape.add(z, tape.matmul(xa, w1a));
    }
    Val h1 = tape.tanh(tape.add(z, b1));
    if (training && cfg_.dropout > 0.0) h1 = tape.dropout(h1, cfg_.dropout, *rng);
    Val h2 = tape.tanh(tape.add(tape.matmul(h1, w2), b2));
    if (training && cfg_.dropout > 0.0) h2 = tape.dropout(h2, cfg_.dropout, *rng);

    const Val mz = tape.scale(tape.tanh(tape.add(tape.matmul(h2, wm), bm)), cfg_.tanh_range);
    const Val delta =
        tape.add(tape.mul(mz, row(norm_.delta_std, 0, ds)), row(norm_.delta_mean, 0, ds));
    const Val out = tape.add(states, delta);

    if (sigma_out) {
        if (!cfg_.gaussian)
            throw std::logic_error("MlpDeltaModel: sigma requested from a deterministic head");
        const Val ws = params[pi++];
        const Val bs = params[pi++];
        const Val t = tape.tanh(tape.add(tape.matmul(h2, ws), bs));
        // sigma_min + (sigma_max - sigma_min) * (t + 1) / 2, in normalized
        // units, then rescaled by the delta std.
        const Val half = tape.scale(tape.add(t, tape.constant(1.0)), 0.5 * (cfg_.sigma_max - cfg_.sigma_min));
        const Val sz = tape.add(half, tape.constant(cfg_.sigma_min));
        *sigma_out = tape.mul(sz, row(norm_.delta_std, 0, ds));
    }
    return out;
}

// --- checkpoints: one-line JSON header + raw little-endian float64 block ---

namespace {

void write_params(std::ofstream& out, const std::vector<const Tensor*>& params) {
    for (const Tensor* p : params)
        out.write(reinterpret_cast<const char*>(p->data()),
                  static_cast<std::streamsize>(p->size() * sizeof(double)));
}

void read_params(std::ifstream& in, std::vector<Tensor*> params, const std::string& path) {
    for (Tensor* p : params) {
        in.read(reinterpret_cast<char*>(p->data()),
                static_cast<std::streamsize>(p->size() * sizeof(double)));
        if (!in) throw std::runtime_error("load_model: truncated parameter block in " + path);
    }
}

std::ofstream open_checkpoint(const std::string& path, const json& header) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save: cannot open " + path);
    out << header.dump() << "\n";
    return out;
}

}  // namespace

void LinearModel::save(const std::string& path) const {
    json h{{"kind", "linear"}, {"theta", theta_.item()}};
    open_checkpoint(path, h);
}

void SigmoidModel::save(const std::string& path) const {
    json h{{"kind", "sigmoid"}, {"theta1", theta1_.item()}, {"theta2", theta2_.item()}};
    open_checkpoint(path, h);
}

void MlpDeltaModel::save(const std::string& path) const {
    json h;
    h["kind"] = "mlp";
    h["state_dim"] = cfg_.state_dim;
    h["action_dim"] = cfg_.action_dim;
    h["width"] = cfg_.width;
    h["dropout"] = cfg_.dropout;
    h["gaussian"] = cfg_.gaussian;
    h["tanh_range"] = cfg_.tanh_range;
    h["sigma_max"] = cfg_.sigma_max;
    h["sigma_min"] = cfg_.sigma_min;
    h["normalizer"] = {{"in_mean", norm_.in_mean},
                       {"in_std", norm_.in_std},
                       {"delta_mean", norm_.delta_mean},
                       {"delta_std", norm_.delta_std}};
    auto out = open_checkpoint(path, h);
    write_params(out, DynamicsModel::parameters());
}

std::unique_ptr<DynamicsModel> load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_model: missing header in " + path);
    json h;
    try {
        h = json::parse(line);
    } catch (const json::exception& e) {
        throw std::runtime_error("load_model: bad header in " + path + ": " + e.what());
    }
    const std::string kind = h.at("kind").get<std::string>();
    if (kind == "linear") return std::make_unique<LinearModel>(h.at("theta").get<double>());
    if (kind == "sigmoid")
        return std::make_unique<SigmoidModel>(h.at("theta1").get<double>(),
                                              h.at("theta2").get<double>());
    if (kind == "mlp") {
        MlpDeltaModel::Config cfg;
        cfg.state_dim = h.at("state_dim").get<std::size_t>();
        cfg.action_dim = h.at("action_dim").get<std::size_t>();
        cfg.width = h.at("width").get<std::size_t>();
        cfg.dropout = h.at("dropout").get<double>();
        cfg.gaussian = h.at("gaussian").get<bool>();
        cfg.tanh_range = h.at("tanh_range").get<double>();
        cfg.sigma_max = h.at("sigma_max").get<double>();
        cfg.sigma_min = h.at("sigma_min").get<double>();
        Rng rng(0);
        auto model = std::make_unique<MlpDeltaModel>(cfg, InitDist::Default, rng);
        auto& norm = model->normalizer();
        norm.in_mean = h.at("normalizer").at("in_mean").get<std::vector<double>>();
        norm.in_std = h.at("normalizer").at("in_std").get<std::vector<double>>();
        norm.delta_mean = h.at("normalizer").at("delta_mean").get<std::vector<double>>();
        norm.delta_std = h.at("normalizer").at("delta_std").get<std::vector<double>>();
        read_params(in, model->parameters(), path);
        return model;
    }
    throw std::runtime_error("load_model: unknown model kind '" + kind + "'");
}

}  // namespace msdyn
