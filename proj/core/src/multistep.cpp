#include "msdyn/multistep.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace msdyn {

namespace {

void check_finite(const Tensor& t, std::size_t step) {
    for (double x : t.values())
        if (!std::isfinite(x))
            throw std::runtime_error("rollout: non-finite prediction at step " +
                                     std::to_string(step + 1));
}

Tensor rows_tensor(const std::vector<const StateVec*>& rows) {
    const std::size_t n = rows.size(), d = rows[0]->size();
    Tensor t({n, d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) t.at(i, j) = (*rows[i])[j];
    return t;
}

}  // namespace

RolloutVals rollout(Tape& tape, const DynamicsModel& model, std::span<const Val> params, Val s0,
                    std::span<const Val> actions, bool stochastic, bool training, Rng* rng) {
    RolloutVals out;
    Val state = s0;
    const Val dummy = tape.constant(0.0);
    const std::size_t h = model.action_dim() > 0 ? actions.size() : std::max(actions.size(), std::size_t{0});
    for (std::size_t j = 0; j < h; ++j) {
        const Val a = model.action_dim() > 0 ? actions[j] : dummy;
        Val sigma{};
        const Val mean =
            model.forward(tape, params, state, a, model.gaussian_head() ? &sigma : nullptr,
                          training, rng);
        check_finite(tape.value(mean), j);
        out.means.push_back(mean);
        if (model.gaussian_head()) out.sigmas.push_back(sigma);
        if (stochastic) {
            if (!model.gaussian_head())
                throw std::invalid_argument("rollout: stochastic sampling needs a Gaussian head");
            const Val sample = tape.gaussian_reparam(mean, sigma, *rng);
            out.samples.push_back(sample);
            state = sample;
        } else {
            state = mean;
        }
    }
    return out;
}

std::vector<Tensor> rollout_states(const DynamicsModel& model, const Tensor& s0,
                                   std::span<const Tensor> actions) {
    std::vector<Tensor> out;
    Tensor state = s0;
    for (std::size_t j = 0; j < actions.size(); ++j) {
        state = model.predict(state, model.action_dim() > 0 ? actions[j] : Tensor{});
        check_finite(state, j);
        out.push_back(state);
    }
    return out;
}

MultistepLossVal multistep_loss(Tape& tape, const DynamicsModel& model, std::span<const Val> params,
                                Val s0, std::span<const Val> actions, std::span<const Val> targets,
                                const WeightProfile& profile, bool training, Rng* rng) {
    validate(profile);
    if (targets.size() != profile.h)
        throw std::invalid_argument("multistep_loss: profile horizon " + std::to_string(profile.h) +
                                    " != segment horizon " + std::to_string(targets.size()));
    if (model.action_dim() > 0 && actions.size() != profile.h)
        throw std::invalid_argument("multistep_loss: action sequence length mismatch");

    // Horizon steps equal the profile length even for uncontrolled systems.
    std::vector<Val> steps(actions.begin(), actions.end());
    steps.resize(profile.h);
    RolloutVals ro = rollout(tape, model, params, s0, steps, false, training, rng);

    MultistepLossVal out;
    Val total{};
    bool first = true;
    for (std::size_t j = 0; j < profile.h; ++j) {
        const Val mse = tape.mean(tape.square(tape.sub(ro.means[j], targets[j])));
        out.per_horizon.push_back(tape.value(mse).item());
        const Val weighted = tape.scale(mse, profile.alphas[j]);
        total = first ? weighted : tape.add(total, weighted);
        first = false;
    }
    out.loss = total;
    return out;
}

NllLossVal nll_multistep_loss(Tape& tape, const DynamicsModel& model, std::span<const Val> params,
                              Val s0, std::span<const Val> actions, std::span<const Val> targets,
                              std::size_t h, bool training, Rng& rng) {
    if (!model.gaussian_head())
        throw std::invalid_argument("nll_multistep_loss: model has no Gaussian head");
    if (targets.size() != h) throw std::invalid_argument("nll_multistep_loss: bad segment length");

    std::vector<Val> steps(actions.begin(), actions.end());
    steps.resize(h);
    RolloutVals ro = rollout(tape, model, params, s0, steps, /*stochastic=*/true, training, &rng);

    NllLossVal out;
    Val total{};
    bool first = true;
    for (std::size_t j = 0; j < h; ++j) {
        const Val sigma = ro.sigmas[j];
        for (double s : tape.value(sigma).values())
            if (s <= 0.0) throw std::runtime_error("nll_multistep_loss: sigma <= 0 after floor");
        const Val err2 = tape.square(tape.sub(targets[j], ro.means[j]));
        const Val quad = tape.mean(tape.scale(tape.div(err2, tape.square(sigma)), 0.5));
        const Val reg = tape.mean(tape.log(sigma));
        const Val term = tape.add(reg, quad);
        out.per_horizon.push_back(tape.value(term).item());
        total = first ? term : tape.add(total, term);
        first = false;

        double w = 0.0;
        const Tensor& sv = tape.value(sigma);
        for (double s : sv.values()) w += 1.0 / (2.0 * s * s);
        out.implicit_weights.push_back(w / static_cast<double>(sv.size()));
    }
    out.loss = total;
    return out;
}

namespace {

struct Segment {
    std::size_t ep;
    std::size_t t;
};

std::vector<Segment> enumerate_segments(const TrajectoryDataset& ds,
                                        std::span<const std::size_t> eps, std::size_t h) {
    std::vector<Segment> segs;
    for (std::size_t ep : eps) {
        const std::size_t len = ds.trajectories[ep].length();
        if (len < h + 1) continue;
        for (std::size_t t = 0; t + h < len; ++t) segs.push_back({ep, t});
    }
    return segs;
}

struct BatchTensors {
    Tensor s0;
    std::vector<Tensor> actions;  // h tensors, B x d_a
    std::vector<Tensor> targets;  // h tensors, B x d_s
};

BatchTensors build_batch(const TrajectoryDataset& ds, std::span<const Segment> segs, std::size_t h,
                         bool use_obs) {
    BatchTensors b;
    std::vector<const StateVec*> rows;
    rows.reserve(segs.size());
    for (const auto& sg : segs) rows.push_back(&ds.trajectories[sg.ep].target(sg.t, use_obs));
    b.s0 = rows_tensor(rows);
    for (std::size_t j = 0; j < h; ++j) {
        if (ds.meta.action_dim > 0) {
            rows.clear();
            for (const auto& sg : segs) rows.push_back(&ds.trajectories[sg.ep].actions[sg.t + j]);
            b.actions.push_back(rows_tensor(rows));
        }
        rows.clear();
        for (const auto& sg : segs)
            rows.push_back(&ds.trajectories[sg.ep].target(sg.t + j + 1, use_obs));
        b.targets.push_back(rows_tensor(rows));
    }
    return b;
}

double mse(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

// One-step and h-step validation MSE, mean propagation, eval mode.
std::pair<double, double> validation_mse(const DynamicsModel& model, const TrajectoryDataset& ds,
                                         std::span<const std::size_t> eps, std::size_t h,
                                         bool use_obs) {
    double sse1 = 0.0, sseh = 0.0;
    std::size_t n1 = 0, nh = 0;
    for (std::size_t ep : eps) {
        auto segs = enumerate_segments(ds, std::span(&ep, 1), h);
        if (segs.empty()) continue;
        BatchTensors b = build_batch(ds, segs, h, use_obs);
        auto states = rollout_states(model, b.s0, b.actions.empty()
                                                     ? std::vector<Tensor>(h)
                                                     : b.actions);
        sse1 += mse(states[0], b.targets[0]) * static_cast<double>(states[0].size());
        n1 += states[0].size();
        sseh += mse(states[h - 1], b.targets[h - 1]) * static_cast<double>(states[h - 1].size());
        nh += states[h - 1].size();
    }
    if (n1 == 0) return {std::nan(""), std::nan("")};
    return {sse1 / static_cast<double>(n1), sseh / static_cast<double>(nh)};
}

}  // namespace

TrainResult train(DynamicsModel& model, const TrajectoryDataset& ds,
                  std::span<const std::size_t> train_eps, std::span<const std::size_t> valid_eps,
                  const TrainConfig& cfg) {
    const std::size_t h = cfg.loss.base == BaseLoss::NLL ? cfg.loss.profile.h : cfg.loss.profile.h;
    if (cfg.loss.base == BaseLoss::MSE) validate(cfg.loss.profile);
    if (cfg.loss.base == BaseLoss::NLL && !model.gaussian_head())
        throw std::invalid_argument("train: NLL loss requires a Gaussian-head model");

    std::vector<Segment> segments = enumerate_segments(ds, train_eps, h);
    if (segments.empty())
        throw std::invalid_argument("train: horizon " + std::to_string(h) +
                                    " exceeds every training episode length");

    const Rng master(cfg.seed);
    Rng noise_rng = master.child(0xd20);  // dropout masks + reparametrization draws

    Optimizer opt(cfg.optimizer, cfg.learning_rate);
    TrainResult result;
    std::vector<double> weight_accum;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng = master.child(epoch);
        shuffle_rng.shuffle(segments);

        double epoch_loss = 0.0;
        std::size_t batches = 0;
        const bool last_epoch = epoch + 1 == cfg.epochs;
        if (last_epoch) weight_accum.assign(h, 0.0);

        for (std::size_t off = 0; off < segments.size(); off += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, segments.size() - off);
            BatchTensors batch =
                build_batch(ds, std::span(segments.data() + off, count), h, cfg.use_observations);

            Tape tape;
            std::vector<Val> params;
            auto ptrs = model.parameters();
            for (Tensor* p : ptrs) params.push_back(tape.input(*p));
            const Val s0 = tape.constant(std::move(batch.s0));
            std::vector<Val> actions, targets;
            for (auto& a : batch.actions) actions.push_back(tape.constant(std::move(a)));
            for (auto& t : batch.targets) targets.push_back(tape.constant(std::move(t)));

            Val loss{};
            double loss_value;
            if (cfg.loss.base == BaseLoss::MSE) {
                auto ml = multistep_loss(tape, model, params, s0, actions, targets,
                                         cfg.loss.profile, /*training=*/true, &noise_rng);
                loss = ml.loss;
                loss_value = tape.value(loss).item();
            } else {
                auto nl = nll_multistep_loss(tape, model, params, s0, actions, targets, h,
                                             /*training=*/true, noise_rng);
                loss = nl.loss;
                loss_value = tape.value(loss).item();
                if (last_epoch)
                    for (std::size_t j = 0; j < h; ++j) weight_accum[j] += nl.implicit_weights[j];
            }
            if (!std::isfinite(loss_value))
                throw std::runtime_error("train: NaN loss at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(batches));

            tape.backward(loss);
            std::vector<Tensor> grads;
            for (const Val& p : params) grads.push_back(tape.grad(p));
            opt.step(ptrs, grads);

            epoch_loss += loss_value;
            ++batches;
        }

        result.train_loss.push_back(epoch_loss / static_cast<double>(batches));
        auto [v1, vh] = validation_mse(model, ds, valid_eps, h, cfg.use_observations);
        result.valid_one_step.push_back(v1);
        result.valid_h_step.push_back(vh);
    }

    if (cfg.loss.base == BaseLoss::NLL && !weight_accum.empty()) {
        double sum = std::accumulate(weight_accum.begin(), weight_accum.end(), 0.0);
        for (double w : weight_accum) result.nll_implicit_weights.push_back(w / sum);
    }
    return result;
}

}  // namespace msdyn
