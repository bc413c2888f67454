#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "hermes/rng.hpp"

namespace hermes::nnet {

// The per-UE Q network: two fully connected layers,
//   y = sigmoid(W2 * relu(W1 * x + b1) + b2)
// with input_dim features in, hidden_dim units, and one output per channel
// plus one for "stay silent". Plain value type; copies are deep.
struct QNetworkModel {
    Eigen::MatrixXd w1;  // hidden_dim x input_dim
    Eigen::VectorXd b1;  // hidden_dim
    Eigen::MatrixXd w2;  // action_dim x hidden_dim
    Eigen::VectorXd b2;  // action_dim

    int input_dim() const { return static_cast<int>(w1.cols()); }
    int hidden_dim() const { return static_cast<int>(w1.rows()); }
    int action_dim() const { return static_cast<int>(w2.rows()); }

    std::int64_t parameter_count() const {
        return w1.size() + b1.size() + w2.size() + b2.size();
    }

    bool shapes_consistent() const;
    bool same_shape(const QNetworkModel& other) const;
    bool all_finite() const;
};

struct GradientSet {
    Eigen::MatrixXd dw1;
    Eigen::VectorXd db1;
    Eigen::MatrixXd dw2;
    Eigen::VectorXd db2;

    bool all_finite() const;
};

// One replay tuple (s, a, r, s'). `action` is the 0-based output row,
// 0..M-1 the channels and M the silent action. `reward` is stored already
// normalized to the unit range used by the sigmoid head.
struct Experience {
    Eigen::VectorXd state;
    int action = 0;
    double reward = 0.0;
    Eigen::VectorXd next_state;
};

using TrainBatch = std::vector<Experience>;

// Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
QNetworkModel random_model(int input_dim, int hidden_dim, int action_dim, rng::Stream& rng);

Eigen::VectorXd forward(const QNetworkModel& model, const Eigen::VectorXd& x);

// Mean over the batch of (r + gamma * max_a' Qtarget(a', s') - Q(a, s))^2.
double td_loss(const QNetworkModel& model, const QNetworkModel& target,
               const TrainBatch& batch, double gamma);

// Analytic gradient of td_loss w.r.t. the model parameters. The target
// network is a constant; ReLU subgradient at 0 is taken as 0.
GradientSet td_gradient(const QNetworkModel& model, const QNetworkModel& target,
                        const TrainBatch& batch, double gamma);

// theta <- theta - lr * grad. Throws if the gradient is not finite.
QNetworkModel sgd_step(const QNetworkModel& model, const GradientSet& grads, double lr);

QNetworkModel copy_to_target(const QNetworkModel& model);

// Flat serialization: header (input_dim, hidden_dim, n_channels as uint32 LE)
// followed by W1 row-major, b1, W2 row-major, b2 as little-endian doubles.
// n_channels is action_dim - 1. Binary form round-trips bit-exactly.
std::vector<std::uint8_t> to_bytes(const QNetworkModel& model);
QNetworkModel from_bytes(const std::vector<std::uint8_t>& bytes);

nlohmann::json to_json(const QNetworkModel& model);
QNetworkModel model_from_json(const nlohmann::json& j);

}  // namespace hermes::nnet
