#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "msdyn/dataset.hpp"
#include "msdyn/model.hpp"
#include "msdyn/optimizer.hpp"
#include "msdyn/tape.hpp"
#include "msdyn/weights.hpp"

namespace msdyn {

enum class BaseLoss { MSE, NLL };

/// Recursive h-step rollout on a tape; gradients flow through every model
/// composition. `actions[j]` feeds the j-th step. With `stochastic` set,
/// Gaussian-head models feed the reparametrized sample forward.
struct RolloutVals {
    std::vector<Val> means;    // s_hat at t+1..t+h
    std::vector<Val> sigmas;   // Gaussian heads only
    std::vector<Val> samples;  // stochastic rollouts only
};

RolloutVals rollout(Tape& tape, const DynamicsModel& model, std::span<const Val> params, Val s0,
                    std::span<const Val> actions, bool stochastic = false, bool training = false,
                    Rng* rng = nullptr);

/// Eval-mode rollout on plain tensors (mean propagation).
std::vector<Tensor> rollout_states(const DynamicsModel& model, const Tensor& s0,
                                   std::span<const Tensor> actions);

struct MultistepLossVal {
    Val loss;
    std::vector<double> per_horizon;  // unweighted MSE (or NLL) terms
};

/// Sum_j alpha_j * MSE(target_j, s_hat_j) with s_hat from rollout.
MultistepLossVal multistep_loss(Tape& tape, const DynamicsModel& model, std::span<const Val> params,
                                Val s0, std::span<const Val> actions, std::span<const Val> targets,
                                const WeightProfile& profile, bool training = false,
                                Rng* rng = nullptr);

struct NllLossVal {
    Val loss;
    std::vector<double> per_horizon;        // per-horizon NLL terms
    std::vector<double> implicit_weights;   // mean 1/(2 sigma_j^2), unnormalized
};

/// Joint negative log-likelihood over horizons 1..h for a Gaussian-head
/// model; intermediate states are sampled with the reparametrization trick.
NllLossVal nll_multistep_loss(Tape& tape, const DynamicsModel& model, std::span<const Val> params,
                              Val s0, std::span<const Val> actions, std::span<const Val> targets,
                              std::size_t h, bool training, Rng& rng);

struct LossConfig {
    WeightProfile profile;
    BaseLoss base = BaseLoss::MSE;
    bool stochastic = false;  // NLL models sample intermediates
};

struct TrainConfig {
    LossConfig loss;
    std::size_t epochs = 60;
    std::size_t batch_size = 64;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    std::uint64_t seed = 42;
    bool use_observations = true;  // training inputs and targets channel
};

struct TrainResult {
    std::vector<double> train_loss;      // per epoch, mean over batches
    std::vector<double> valid_one_step;  // per epoch, one-step MSE
    std::vector<double> valid_h_step;    // per epoch, h-step MSE
    std::vector<double> nll_implicit_weights;  // final normalized weights (NLL only)
};

/// Trains `model` in place over all stride-1 sub-trajectories of length h
/// from the train episodes; deterministic given the config seed.
TrainResult train(DynamicsModel& model, const TrajectoryDataset& ds,
                  std::span<const std::size_t> train_eps, std::span<const std::size_t> valid_eps,
                  const TrainConfig& cfg);

}  // namespace msdyn
