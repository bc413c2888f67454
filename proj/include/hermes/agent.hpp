#pragma once

// Per-UE learning lifecycle: observation assembly, epsilon-greedy action
// selection, reward shaping, replay buffer, periodic training epochs, and
// the upload/receive protocol around model shuffles.

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "hermes/qnet.hpp"
#include "hermes/rng.hpp"

namespace hermes::agent {

// which raw-reward rule feeds the replay buffer
enum class RewardKind {
    punishing,      // success +x, collision -alpha*x, silent 0
    non_punishing,  // success +x, everything else 0 (baseline behavior)
};

struct AgentConfig {
    int m_rbgs = 1;      // M: channel count the model is sized for
    int hidden_dim = 64;  // L
    double epsilon = 0.05;
    double gamma = 0.95;
    double alpha = 1.0;  // collision punishment factor
    double lr = 0.01;
    int batch_size = 32;
    int steps_per_epoch = 4;
    int buffer_capacity = 500;
    std::int64_t x_max = 6105;  // normalization ceiling for rates and rewards
    int age_cap_slots = 50;     // request-history counter cap
    RewardKind reward_kind = RewardKind::punishing;
};

// what the environment reports back to one UE about its own last action
struct SlotFeedback {
    bool success = false;
    std::int64_t achievable_rate_bits = 0;  // rate on the chosen channel, 0 if silent
};

// Feature vector layout (dimension 2M+3): M per-channel rates scaled by
// x_max, buffer-nonempty bit, silent-last-slot bit, M request ages capped at
// age_cap and scaled to [0,1], success-last-slot bit.
Eigen::VectorXd build_observation(const std::vector<std::int64_t>& rates,
                                  std::int64_t buffer_bits, bool silent_last_slot,
                                  bool success_last_slot, const std::vector<int>& ages_slots,
                                  int age_cap, std::int64_t x_max);

// Epsilon-greedy over the model's action values: argmax (lowest index wins
// ties) with probability 1-epsilon, uniform over all M+1 actions otherwise.
// Always consumes exactly two draws from rng so trajectories stay aligned
// whichever branch is taken. Returns a 1-based action (M+1 = silent).
int select_action(const nnet::QNetworkModel& model, const Eigen::VectorXd& obs, double epsilon,
                  rng::Stream& rng);

// success -> +x, requested-but-collided -> -alpha*x, silent -> 0
double compute_reward(bool success, bool silent, double x, double alpha);

// Affine map into [0,1-gamma] so discounted targets fit the sigmoid codomain:
// (1-gamma)*(r + alpha*x_max) / ((1+alpha)*x_max). Strictly increasing in r.
double normalize_reward(double raw, double gamma, double alpha, double x_max);

// sum_t gamma^(t-1) * rewards[t-1]
double discounted_return(const std::vector<double>& rewards, double gamma);

class Agent {
  public:
    Agent(int ue_id, const AgentConfig& cfg, rng::Stream init_stream, rng::Stream eps_stream,
          rng::Stream train_stream);

    int ue_id() const { return ue_id_; }
    const AgentConfig& config() const { return cfg_; }

    // One slot of the loop: fold the previous action's feedback into a replay
    // tuple (when training is enabled), then pick this slot's action from the
    // fresh observation. rates must cover all M channels; feedback is empty
    // only on the very first step after construction or a model receive.
    int step(const std::vector<std::int64_t>& rates, std::int64_t buffer_bits,
             const std::optional<SlotFeedback>& feedback);

    // `steps_per_epoch` gradient updates on uniform random batches, then the
    // online network is copied to the target. Skipped (and counted) when
    // training is disabled or the buffer holds fewer than batch_size tuples.
    void train_epoch();

    // hands the online network to the shuffler and freezes training
    nnet::QNetworkModel upload_model();

    // installs a shuffled model: target re-synced, replay buffer and pending
    // transition dropped, training re-enabled
    void receive_model(const nnet::QNetworkModel& model);

    const nnet::QNetworkModel& model() const { return model_; }
    const nnet::QNetworkModel& target_model() const { return target_; }
    bool training_enabled() const { return training_enabled_; }
    std::size_t buffer_size() const { return buffer_.size(); }
    std::int64_t training_steps_total() const { return training_steps_total_; }
    std::int64_t epochs_skipped() const { return epochs_skipped_; }
    double last_epoch_loss() const { return last_epoch_loss_; }
    int last_action() const { return last_action_; }
    double last_raw_reward() const { return last_raw_reward_; }

  private:
    std::vector<int> current_ages() const;

    int ue_id_;
    AgentConfig cfg_;
    rng::Stream eps_stream_;
    rng::Stream train_stream_;
    nnet::QNetworkModel model_;
    nnet::QNetworkModel target_;
    std::deque<nnet::Experience> buffer_;
    bool training_enabled_ = true;

    // own-history trackers feeding the observation
    std::int64_t steps_taken_ = 0;
    int last_action_ = 0;  // 0 = no step yet; treated as silent
    bool last_success_ = false;
    std::vector<std::int64_t> last_request_slot_;  // -1 = never requested

    // pending transition awaiting next slot's observation
    struct Pending {
        Eigen::VectorXd state;
        int action_index;  // 0-based
    };
    std::optional<Pending> pending_;

    // diagnostics
    std::int64_t training_steps_total_ = 0;
    std::int64_t epochs_skipped_ = 0;
    double last_epoch_loss_ = 0.0;
    double last_raw_reward_ = 0.0;
};

}  // namespace hermes::agent
