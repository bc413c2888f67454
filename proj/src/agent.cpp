#include "hermes/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hermes/baselines.hpp"

namespace hermes::agent {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

Eigen::VectorXd build_observation(const std::vector<std::int64_t>& rates,
                                  std::int64_t buffer_bits, bool silent_last_slot,
                                  bool success_last_slot, const std::vector<int>& ages_slots,
                                  int age_cap, std::int64_t x_max) {
    require(!rates.empty(), "observation needs at least one channel rate");
    require(rates.size() == ages_slots.size(), "rates and ages must cover the same channels");
    require(age_cap > 0, "age cap must be positive");
    require(x_max > 0, "x_max must be positive");
    const int m = static_cast<int>(rates.size());
    Eigen::VectorXd obs(2 * m + 3);
    for (int c = 0; c < m; ++c) {
        require(rates[static_cast<std::size_t>(c)] >= 0, "rates must be non-negative");
        obs(c) = std::min(1.0, static_cast<double>(rates[static_cast<std::size_t>(c)]) /
                                   static_cast<double>(x_max));
    }
    obs(m) = buffer_bits > 0 ? 1.0 : 0.0;
    obs(m + 1) = silent_last_slot ? 1.0 : 0.0;
    for (int c = 0; c < m; ++c) {
        const int age = ages_slots[static_cast<std::size_t>(c)];
        require(age >= 0, "ages must be non-negative");
        obs(m + 2 + c) = static_cast<double>(std::min(age, age_cap)) / age_cap;
    }
    obs(2 * m + 2) = success_last_slot ? 1.0 : 0.0;
    return obs;
}

int select_action(const nnet::QNetworkModel& model, const Eigen::VectorXd& obs, double epsilon,
                  rng::Stream& rng) {
    require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0,1]");
    const int n_actions = model.action_dim();
    // both draws happen unconditionally so the stream advances the same way
    // on explore and exploit slots
    const double gate = rng.next_unit();
    const int random_pick = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_actions)));
    if (gate < epsilon) return random_pick + 1;
    const Eigen::VectorXd q = nnet::forward(model, obs);
    int best = 0;
    for (int a = 1; a < n_actions; ++a)
        if (q(a) > q(best)) best = a;  // strict: first maximum wins
    return best + 1;
}

double compute_reward(bool success, bool silent, double x, double alpha) {
    require(x >= 0.0, "rate must be non-negative");
    require(alpha >= 0.0, "punishment factor must be non-negative");
    if (silent) return 0.0;
    return success ? x : -alpha * x;
}

double normalize_reward(double raw, double gamma, double alpha, double x_max) {
    require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0,1)");
    require(alpha >= 0.0, "punishment factor must be non-negative");
    require(x_max > 0.0, "x_max must be positive");
    return (1.0 - gamma) * (raw + alpha * x_max) / ((1.0 + alpha) * x_max);
}

double discounted_return(const std::vector<double>& rewards, double gamma) {
    require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0,1)");
    double total = 0.0;
    double weight = 1.0;
    for (double r : rewards) {
        total += weight * r;
        weight *= gamma;
    }
    return total;
}

Agent::Agent(int ue_id, const AgentConfig& cfg, rng::Stream init_stream, rng::Stream eps_stream,
             rng::Stream train_stream)
    : ue_id_(ue_id),
      cfg_(cfg),
      eps_stream_(eps_stream),
      train_stream_(train_stream),
      model_(nnet::random_model(2 * cfg.m_rbgs + 3, cfg.hidden_dim, cfg.m_rbgs + 1, init_stream)),
      target_(nnet::copy_to_target(model_)),
      last_request_slot_(static_cast<std::size_t>(cfg.m_rbgs), -1) {
    require(cfg.m_rbgs >= 1, "agent needs at least one channel");
    require(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0, "epsilon must lie in [0,1]");
    require(cfg.gamma >= 0.0 && cfg.gamma < 1.0, "gamma must lie in [0,1)");
    require(cfg.alpha >= 0.0, "alpha must be non-negative");
    require(cfg.lr > 0.0, "learning rate must be positive");
    require(cfg.batch_size >= 1 && cfg.steps_per_epoch >= 1, "epoch shape must be positive");
    require(cfg.buffer_capacity >= 1, "buffer capacity must be positive");
    require(cfg.x_max > 0, "x_max must be positive");
    require(cfg.age_cap_slots > 0, "age cap must be positive");
}

std::vector<int> Agent::current_ages() const {
    std::vector<int> ages(static_cast<std::size_t>(cfg_.m_rbgs), cfg_.age_cap_slots);
    for (int c = 0; c < cfg_.m_rbgs; ++c) {
        const std::int64_t last = last_request_slot_[static_cast<std::size_t>(c)];
        if (last < 0) continue;  // never requested: stays at the cap
        const std::int64_t age = (steps_taken_ - 1) - last;
        ages[static_cast<std::size_t>(c)] =
            static_cast<int>(std::min<std::int64_t>(age, cfg_.age_cap_slots));
    }
    return ages;
}

int Agent::step(const std::vector<std::int64_t>& rates, std::int64_t buffer_bits,
                const std::optional<SlotFeedback>& feedback) {
    require(static_cast<int>(rates.size()) == cfg_.m_rbgs, "rate vector must cover all channels");
    // every step after the first carries the previous slot's feedback; the
    // pending transition may still be absent right after a model receive
    require(feedback.has_value() == (steps_taken_ > 0),
            "feedback must accompany every step after the first");

    const bool was_silent = last_action_ == 0 || last_action_ == cfg_.m_rbgs + 1;
    if (feedback) last_success_ = feedback->success;
    const Eigen::VectorXd obs =
        build_observation(rates, buffer_bits, was_silent, last_success_, current_ages(),
                          cfg_.age_cap_slots, cfg_.x_max);

    if (pending_ && training_enabled_) {
        const double x = static_cast<double>(feedback->achievable_rate_bits);
        const double raw = cfg_.reward_kind == RewardKind::punishing
                               ? compute_reward(feedback->success, was_silent, x, cfg_.alpha)
                               : baselines::dqsa_reward(feedback->success, x);
        last_raw_reward_ = raw;
        nnet::Experience e;
        e.state = pending_->state;
        e.action = pending_->action_index;
        e.reward = normalize_reward(raw, cfg_.gamma, cfg_.alpha, static_cast<double>(cfg_.x_max));
        e.next_state = obs;
        if (buffer_.size() == static_cast<std::size_t>(cfg_.buffer_capacity)) buffer_.pop_front();
        buffer_.push_back(std::move(e));
    }

    const int action = select_action(model_, obs, cfg_.epsilon, eps_stream_);
    pending_ = Pending{obs, action - 1};
    last_action_ = action;
    if (action <= cfg_.m_rbgs) last_request_slot_[static_cast<std::size_t>(action - 1)] = steps_taken_;
    ++steps_taken_;
    return action;
}

void Agent::train_epoch() {
    if (!training_enabled_ || buffer_.size() < static_cast<std::size_t>(cfg_.batch_size)) {
        ++epochs_skipped_;
        return;
    }
    for (int s = 0; s < cfg_.steps_per_epoch; ++s) {
        nnet::TrainBatch batch;
        batch.reserve(static_cast<std::size_t>(cfg_.batch_size));
        for (int k = 0; k < cfg_.batch_size; ++k) {
            const std::uint64_t pick = train_stream_.next_below(buffer_.size());
            batch.push_back(buffer_[static_cast<std::size_t>(pick)]);
        }
        model_ = nnet::sgd_step(model_, nnet::td_gradient(model_, target_, batch, cfg_.gamma),
                                cfg_.lr);
        last_epoch_loss_ = nnet::td_loss(model_, target_, batch, cfg_.gamma);
        ++training_steps_total_;
    }
    target_ = nnet::copy_to_target(model_);
}

nnet::QNetworkModel Agent::upload_model() {
    training_enabled_ = false;
    return model_;
}

void Agent::receive_model(const nnet::QNetworkModel& model) {
    if (!model.same_shape(model_)) throw std::invalid_argument("received model shape mismatch");
    model_ = model;
    target_ = nnet::copy_to_target(model_);
    buffer_.clear();
    pending_.reset();
    training_enabled_ = true;
}

}  // namespace hermes::agent
