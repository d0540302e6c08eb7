#include "msdyn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "msdyn/io.hpp"

namespace msdyn {

using nlohmann::json;

StateVec observe(const StateVec& state, const std::vector<double>& sigma_abs, Rng& rng) {
    StateVec o = state;
    for (std::size_t j = 0; j < o.size(); ++j) {
        const double s = j < sigma_abs.size() ? sigma_abs[j] : 0.0;
        if (s > 0.0) o[j] += s * rng.normal();
    }
    return o;
}

std::vector<double> noise_scale_to_sigma(const DatasetMeta& meta, double percent) {
    if (percent < 0.0) throw std::invalid_argument("noise_scale_to_sigma: percent must be >= 0");
    if (meta.state_min.size() != meta.state_dim || meta.state_max.size() != meta.state_dim)
        throw std::invalid_argument("noise_scale_to_sigma: metadata missing state min/max");
    std::vector<double> sigma(meta.state_dim);
    for (std::size_t j = 0; j < meta.state_dim; ++j)
        sigma[j] = percent * (meta.state_max[j] - meta.state_min[j]);
    return sigma;
}

namespace {

StateVec policy_action(PolicyKind kind, std::size_t da, std::size_t t, Rng& rng) {
    StateVec a(da);
    for (std::size_t j = 0; j < da; ++j) {
        if (kind == PolicyKind::RandomUniform)
            a[j] = rng.uniform(-1.0, 1.0);
        else
            a[j] = std::sin(0.05 * static_cast<double>(t) + static_cast<double>(j));
    }
    return a;
}

constexpr std::uint64_t kObsStreamOffset = 0x0b5eu << 16;

}  // namespace

TrajectoryDataset generate_dataset(const System& system, PolicyKind policy, std::size_t episodes,
                                   std::size_t horizon, std::uint64_t seed, double noise_percent) {
    if (episodes < 1) throw std::invalid_argument("generate_dataset: episodes must be >= 1");
    if (noise_percent < 0.0) throw std::invalid_argument("generate_dataset: negative noise percent");

    TrajectoryDataset ds;
    ds.meta.env = system.name();
    ds.meta.state_dim = system.state_dim();
    ds.meta.action_dim = system.action_dim();
    ds.meta.noise_percent = noise_percent;
    ds.meta.seed = seed;

    const Rng master(seed);
    ds.trajectories.resize(episodes);
    for (std::size_t ep = 0; ep < episodes; ++ep) {
        Rng rng = master.child(ep);
        Trajectory& traj = ds.trajectories[ep];
        traj.states.push_back(system.initial_state(rng));
        for (std::size_t t = 0; t < horizon; ++t) {
            StateVec a = policy_action(policy, system.action_dim(), t, rng);
            StateVec next = system.step(traj.states.back(), a);
            for (double x : next)
                if (!std::isfinite(x) || std::abs(x) > 1e9)
                    throw std::runtime_error("generate_dataset: divergent simulation at episode " +
                                             std::to_string(ep) + ", step " + std::to_string(t));
            if (system.action_dim() > 0) traj.actions.push_back(std::move(a));
            traj.states.push_back(std::move(next));
        }
    }

    ds.meta.state_min.assign(ds.meta.state_dim, std::numeric_limits<double>::infinity());
    ds.meta.state_max.assign(ds.meta.state_dim, -std::numeric_limits<double>::infinity());
    for (const auto& traj : ds.trajectories)
        for (const auto& s : traj.states)
            for (std::size_t j = 0; j < s.size(); ++j) {
                ds.meta.state_min[j] = std::min(ds.meta.state_min[j], s[j]);
                ds.meta.state_max[j] = std::max(ds.meta.state_max[j], s[j]);
            }

    const std::vector<double> sigma = noise_scale_to_sigma(ds.meta, noise_percent);
    for (std::size_t ep = 0; ep < episodes; ++ep) {
        Rng rng = master.child(kObsStreamOffset + ep);
        Trajectory& traj = ds.trajectories[ep];
        traj.observations.reserve(traj.states.size());
        for (const auto& s : traj.states) traj.observations.push_back(observe(s, sigma, rng));
    }
    return ds;
}

void save_dataset(const TrajectoryDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_dataset: cannot open " + path);

    json meta;
    meta["env"] = ds.meta.env;
    meta["state_dim"] = ds.meta.state_dim;
    meta["action_dim"] = ds.meta.action_dim;
    meta["noise_percent"] = ds.meta.noise_percent;
    meta["seed"] = ds.meta.seed;
    meta["state_min"] = json::array();
    meta["state_max"] = json::array();
    for (double v : ds.meta.state_min) meta["state_min"].push_back(v);
    for (double v : ds.meta.state_max) meta["state_max"].push_back(v);
    out << meta.dump() << "\n";

    out << "episode,t";
    for (std::size_t j = 0; j < ds.meta.state_dim; ++j) out << ",s_" << j;
    for (std::size_t j = 0; j < ds.meta.action_dim; ++j) out << ",a_" << j;
    for (std::size_t j = 0; j < ds.meta.state_dim; ++j) out << ",o_" << j;
    out << "\n";

    for (std::size_t ep = 0; ep < ds.trajectories.size(); ++ep) {
        const Trajectory& traj = ds.trajectories[ep];
        for (std::size_t t = 0; t < traj.states.size(); ++t) {
            out << ep << "," << t;
            for (double v : traj.states[t]) out << "," << fmt_double(v);
            const bool has_action = t < traj.actions.size();
            for (std::size_t j = 0; j < ds.meta.action_dim; ++j) {
                out << ",";
                if (has_action) out << fmt_double(traj.actions[t][j]);
            }
            for (std::size_t j = 0; j < ds.meta.state_dim; ++j) {
                out << ",";
                if (traj.has_observations()) out << fmt_double(traj.observations[t][j]);
            }
            out << "\n";
        }
    }
}

TrajectoryDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_dataset: cannot open " + path);

    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& why) -> std::runtime_error {
        return std::runtime_error("load_dataset: " + path + ":" + std::to_string(line_no) + ": " + why);
    };

    if (!std::getline(in, line)) throw fail("missing JSON metadata header");
    ++line_no;
    TrajectoryDataset ds;
    try {
        json meta = json::parse(line);
        ds.meta.env = meta.at("env").get<std::string>();
        ds.meta.state_dim = meta.at("state_dim").get<std::size_t>();
        ds.meta.action_dim = meta.at("action_dim").get<std::size_t>();
        ds.meta.noise_percent = meta.at("noise_percent").get<double>();
        ds.meta.seed = meta.at("seed").get<std::uint64_t>();
        ds.meta.state_min = meta.at("state_min").get<std::vector<double>>();
        ds.meta.state_max = meta.at("state_max").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw fail(std::string("bad metadata: ") + e.what());
    }

    if (!std::getline(in, line)) throw fail("missing CSV header");
    ++line_no;
    const std::size_t ds_dim = ds.meta.state_dim, da_dim = ds.meta.action_dim;
    const std::size_t expected_cols = 2 + 2 * ds_dim + da_dim;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_csv(line);
        if (fields.size() != expected_cols)
            throw fail("expected " + std::to_string(expected_cols) + " columns, got " +
                       std::to_string(fields.size()));
        std::size_t ep, t;
        try {
            ep = static_cast<std::size_t>(std::stoull(std::string(fields[0])));
            t = static_cast<std::size_t>(std::stoull(std::string(fields[1])));
        } catch (const std::exception&) {
            throw fail("bad episode/t index");
        }
        if (ep >= ds.trajectories.size()) ds.trajectories.resize(ep + 1);
        Trajectory& traj = ds.trajectories[ep];
        if (t != traj.states.size()) throw fail("non-contiguous time index");
        try {
            StateVec s(ds_dim);
            for (std::size_t j = 0; j < ds_dim; ++j) s[j] = parse_double(fields[2 + j]);
            traj.states.push_back(std::move(s));

            if (da_dim > 0 && !fields[2 + ds_dim].empty()) {
                StateVec a(da_dim);
                for (std::size_t j = 0; j < da_dim; ++j) a[j] = parse_double(fields[2 + ds_dim + j]);
                traj.actions.push_back(std::move(a));
            }
            if (!fields[2 + ds_dim + da_dim].empty()) {
                StateVec o(ds_dim);
                for (std::size_t j = 0; j < ds_dim; ++j)
                    o[j] = parse_double(fields[2 + ds_dim + da_dim + j]);
                traj.observations.push_back(std::move(o));
            }
        } catch (const std::invalid_argument& e) {
            throw fail(e.what());
        }
    }

    for (std::size_t ep = 0; ep < ds.trajectories.size(); ++ep) {
        const Trajectory& traj = ds.trajectories[ep];
        if (traj.states.empty()) throw std::runtime_error("load_dataset: episode " + std::to_string(ep) + " has no rows");
        if (!traj.actions.empty() && traj.actions.size() != traj.states.size() - 1)
            throw std::runtime_error("load_dataset: episode " + std::to_string(ep) +
                                     " has inconsistent action count");
        if (!traj.observations.empty() && traj.observations.size() != traj.states.size())
            throw std::runtime_error("load_dataset: episode " + std::to_string(ep) +
                                     " has inconsistent observation count");
    }
    return ds;
}

EpisodeSplit split_episodes(const TrajectoryDataset& ds, std::size_t n_train, std::size_t n_valid,
                            std::size_t n_test) {
    if (n_train + n_valid + n_test > ds.num_episodes())
        throw std::invalid_argument("split_episodes: split exceeds dataset size");
    EpisodeSplit sp;
    std::size_t i = 0;
    for (std::size_t k = 0; k < n_train; ++k) sp.train.push_back(i++);
    for (std::size_t k = 0; k < n_valid; ++k) sp.valid.push_back(i++);
    for (std::size_t k = 0; k < n_test; ++k) sp.test.push_back(i++);
    return sp;
}

EpisodeSplit default_split(const TrajectoryDataset& ds) {
    const std::size_t n = ds.num_episodes();
    // 36/4/10 of 50, rounded for other sizes; every episode lands somewhere.
    std::size_t n_test = std::max<std::size_t>(1, n * 10 / 50);
    std::size_t n_valid = std::max<std::size_t>(1, n * 4 / 50);
    if (n_test + n_valid >= n) {
        n_test = n > 2 ? 1 : 0;
        n_valid = n > 1 ? 1 : 0;
    }
    return split_episodes(ds, n - n_valid - n_test, n_valid, n_test);
}

}  // namespace msdyn
