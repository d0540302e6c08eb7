#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "msdyn/rng.hpp"
#include "msdyn/systems.hpp"

namespace msdyn {

/// One episode: T states, T-1 actions (empty for uncontrolled systems) and an
/// optional noisy observation channel aligned with the states.
struct Trajectory {
    std::vector<StateVec> states;
    std::vector<StateVec> actions;
    std::vector<StateVec> observations;  // empty = no observation channel

    bool has_observations() const { return !observations.empty(); }
    std::size_t length() const { return states.size(); }
    const StateVec& target(std::size_t t, bool use_observations) const {
        return use_observations && has_observations() ? observations[t] : states[t];
    }
};

struct DatasetMeta {
    std::string env;
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;
    double noise_percent = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> state_min;
    std::vector<double> state_max;
};

struct TrajectoryDataset {
    DatasetMeta meta;
    std::vector<Trajectory> trajectories;

    std::size_t num_episodes() const { return trajectories.size(); }
};

enum class PolicyKind { RandomUniform, Scripted };

/// o = s + eps, eps diagonal Gaussian with per-dimension std sigma_abs.
StateVec observe(const StateVec& state, const std::vector<double>& sigma_abs, Rng& rng);

/// sigma_abs[j] = percent * (state_max[j] - state_min[j]).
std::vector<double> noise_scale_to_sigma(const DatasetMeta& meta, double percent);

/// Rolls out `episodes` episodes of `horizon` control steps each, fills the
/// observation channel from the noise-percent, and records metadata.
/// Episode seeds are derived from the master seed by episode index.
TrajectoryDataset generate_dataset(const System& system, PolicyKind policy, std::size_t episodes,
                                   std::size_t horizon, std::uint64_t seed, double noise_percent);

/// JSON metadata header followed by a CSV body; floats as shortest
/// round-trip decimals so save/load is the identity.
void save_dataset(const TrajectoryDataset& ds, const std::string& path);
TrajectoryDataset load_dataset(const std::string& path);

struct EpisodeSplit {
    std::vector<std::size_t> train, valid, test;
};

/// Episode-level partition with the given counts (train first, then valid,
/// then test, in episode order).
EpisodeSplit split_episodes(const TrajectoryDataset& ds, std::size_t n_train, std::size_t n_valid,
                            std::size_t n_test);

/// Default paper-matching ratios (36/4/10 of 50), scaled to the dataset size.
EpisodeSplit default_split(const TrajectoryDataset& ds);

}  // namespace msdyn
