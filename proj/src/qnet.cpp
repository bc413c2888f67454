#include "hermes/qnet.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace hermes::nnet {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

bool QNetworkModel::shapes_consistent() const {
    return w1.rows() == b1.size() && w2.cols() == w1.rows() && w2.rows() == b2.size() &&
           w1.size() > 0 && w2.size() > 0;
}

bool QNetworkModel::same_shape(const QNetworkModel& other) const {
    return w1.rows() == other.w1.rows() && w1.cols() == other.w1.cols() &&
           w2.rows() == other.w2.rows() && w2.cols() == other.w2.cols();
}

bool QNetworkModel::all_finite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

bool GradientSet::all_finite() const {
    return dw1.allFinite() && db1.allFinite() && dw2.allFinite() && db2.allFinite();
}

QNetworkModel random_model(int input_dim, int hidden_dim, int action_dim, rng::Stream& rng) {
    require(input_dim > 0 && hidden_dim > 0 && action_dim > 0, "random_model: dims must be positive");
    QNetworkModel m;
    m.w1.resize(hidden_dim, input_dim);
    m.b1 = Eigen::VectorXd::Zero(hidden_dim);
    m.w2.resize(action_dim, hidden_dim);
    m.b2 = Eigen::VectorXd::Zero(action_dim);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    // fixed draw order: W1 row-major, then W2 row-major
    for (int r = 0; r < hidden_dim; ++r)
        for (int c = 0; c < input_dim; ++c) m.w1(r, c) = rng.next_range(-s1, s1);
    for (int r = 0; r < action_dim; ++r)
        for (int c = 0; c < hidden_dim; ++c) m.w2(r, c) = rng.next_range(-s2, s2);
    return m;
}

Eigen::VectorXd forward(const QNetworkModel& model, const Eigen::VectorXd& x) {
    require(model.shapes_consistent(), "forward: inconsistent model shapes");
    require(x.size() == model.w1.cols(), "forward: input dimension mismatch");
    require(x.allFinite(), "forward: non-finite input");
    Eigen::VectorXd hidden = ((model.w1 * x + model.b1).array().max(0.0)).matrix();
    Eigen::VectorXd z = model.w2 * hidden + model.b2;
    return z.unaryExpr([](double v) { return sigmoid(v); });
}

namespace {

// Shared by loss and gradient: residual r + gamma * max_a' Qt(a',s') - Q(a,s)
// plus the intermediates needed for backprop.
struct ForwardTrace {
    Eigen::VectorXd z1;      // pre-activation, hidden layer
    Eigen::VectorXd hidden;  // relu(z1)
    Eigen::VectorXd q;       // sigmoid output
};

ForwardTrace traced_forward(const QNetworkModel& model, const Eigen::VectorXd& x) {
    ForwardTrace t;
    t.z1 = model.w1 * x + model.b1;
    t.hidden = t.z1.array().max(0.0).matrix();
    Eigen::VectorXd z2 = model.w2 * t.hidden + model.b2;
    t.q = z2.unaryExpr([](double v) { return sigmoid(v); });
    return t;
}

void check_batch(const QNetworkModel& model, const QNetworkModel& target,
                 const TrainBatch& batch, double gamma) {
    require(!batch.empty(), "td batch must be non-empty");
    require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0,1)");
    require(model.same_shape(target), "model/target shape mismatch");
    for (const Experience& e : batch) {
        require(e.action >= 0 && e.action < model.action_dim(), "action index out of range");
        require(e.state.size() == model.input_dim() && e.next_state.size() == model.input_dim(),
                "experience state dimension mismatch");
    }
}

}  // namespace

double td_loss(const QNetworkModel& model, const QNetworkModel& target,
               const TrainBatch& batch, double gamma) {
    check_batch(model, target, batch, gamma);
    double sum = 0.0;
    for (const Experience& e : batch) {
        const double q = forward(model, e.state)(e.action);
        const double next_best = forward(target, e.next_state).maxCoeff();
        const double residual = e.reward + gamma * next_best - q;
        sum += residual * residual;
    }
    return sum / static_cast<double>(batch.size());
}

GradientSet td_gradient(const QNetworkModel& model, const QNetworkModel& target,
                        const TrainBatch& batch, double gamma) {
    check_batch(model, target, batch, gamma);
    GradientSet g;
    g.dw1 = Eigen::MatrixXd::Zero(model.w1.rows(), model.w1.cols());
    g.db1 = Eigen::VectorXd::Zero(model.b1.size());
    g.dw2 = Eigen::MatrixXd::Zero(model.w2.rows(), model.w2.cols());
    g.db2 = Eigen::VectorXd::Zero(model.b2.size());

    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const Experience& e : batch) {
        const ForwardTrace t = traced_forward(model, e.state);
        const double q = t.q(e.action);
        const double next_best = forward(target, e.next_state).maxCoeff();
        const double residual = e.reward + gamma * next_best - q;

        // dLoss/dQ(a,s) = -2 * residual; chain through sigmoid, W2 row a, relu.
        const double dq = -2.0 * residual * inv_n;
        const double dz2 = dq * t.q(e.action) * (1.0 - t.q(e.action));

        g.dw2.row(e.action) += dz2 * t.hidden.transpose();
        g.db2(e.action) += dz2;

        Eigen::VectorXd dhidden = dz2 * model.w2.row(e.action).transpose();
        for (int i = 0; i < dhidden.size(); ++i)
            if (t.z1(i) <= 0.0) dhidden(i) = 0.0;  // relu subgradient at 0 is 0

        g.dw1 += dhidden * e.state.transpose();
        g.db1 += dhidden;
    }
    return g;
}

QNetworkModel sgd_step(const QNetworkModel& model, const GradientSet& grads, double lr) {
    require(lr > 0.0, "learning rate must be positive");
    require(model.w1.rows() == grads.dw1.rows() && model.w1.cols() == grads.dw1.cols() &&
                model.w2.rows() == grads.dw2.rows() && model.w2.cols() == grads.dw2.cols() &&
                model.b1.size() == grads.db1.size() && model.b2.size() == grads.db2.size(),
            "gradient shape mismatch");
    if (!grads.all_finite()) throw std::domain_error("non-finite gradient");
    QNetworkModel out = model;
    out.w1 -= lr * grads.dw1;
    out.b1 -= lr * grads.db1;
    out.w2 -= lr * grads.dw2;
    out.b2 -= lr * grads.db2;
    if (!out.all_finite()) throw std::domain_error("non-finite parameters after update");
    return out;
}

QNetworkModel copy_to_target(const QNetworkModel& model) { return model; }

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 24));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t at) {
    return static_cast<std::uint32_t>(in[at]) | static_cast<std::uint32_t>(in[at + 1]) << 8 |
           static_cast<std::uint32_t>(in[at + 2]) << 16 |
           static_cast<std::uint32_t>(in[at + 3]) << 24;
}

void put_double(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
}

double get_double(const std::vector<std::uint8_t>& in, std::size_t at) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(in[at + k]) << (8 * k);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

}  // namespace

std::vector<std::uint8_t> to_bytes(const QNetworkModel& model) {
    require(model.shapes_consistent(), "to_bytes: inconsistent model shapes");
    std::vector<std::uint8_t> out;
    out.reserve(12 + 8 * static_cast<std::size_t>(model.parameter_count()));
    put_u32(out, static_cast<std::uint32_t>(model.input_dim()));
    put_u32(out, static_cast<std::uint32_t>(model.hidden_dim()));
    put_u32(out, static_cast<std::uint32_t>(model.action_dim() - 1));
    for (int r = 0; r < model.w1.rows(); ++r)
        for (int c = 0; c < model.w1.cols(); ++c) put_double(out, model.w1(r, c));
    for (int i = 0; i < model.b1.size(); ++i) put_double(out, model.b1(i));
    for (int r = 0; r < model.w2.rows(); ++r)
        for (int c = 0; c < model.w2.cols(); ++c) put_double(out, model.w2(r, c));
    for (int i = 0; i < model.b2.size(); ++i) put_double(out, model.b2(i));
    return out;
}

QNetworkModel from_bytes(const std::vector<std::uint8_t>& bytes) {
    require(bytes.size() >= 12, "model record too short");
    const int input_dim = static_cast<int>(get_u32(bytes, 0));
    const int hidden_dim = static_cast<int>(get_u32(bytes, 4));
    const int action_dim = static_cast<int>(get_u32(bytes, 8)) + 1;
    const std::size_t params = static_cast<std::size_t>(input_dim) * hidden_dim + hidden_dim +
                               static_cast<std::size_t>(hidden_dim) * action_dim + action_dim;
    require(bytes.size() == 12 + 8 * params, "model record length mismatch");
    QNetworkModel m;
    m.w1.resize(hidden_dim, input_dim);
    m.b1.resize(hidden_dim);
    m.w2.resize(action_dim, hidden_dim);
    m.b2.resize(action_dim);
    std::size_t at = 12;
    for (int r = 0; r < hidden_dim; ++r)
        for (int c = 0; c < input_dim; ++c, at += 8) m.w1(r, c) = get_double(bytes, at);
    for (int i = 0; i < hidden_dim; ++i, at += 8) m.b1(i) = get_double(bytes, at);
    for (int r = 0; r < action_dim; ++r)
        for (int c = 0; c < hidden_dim; ++c, at += 8) m.w2(r, c) = get_double(bytes, at);
    for (int i = 0; i < action_dim; ++i, at += 8) m.b2(i) = get_double(bytes, at);
    return m;
}

nlohmann::json to_json(const QNetworkModel& model) {
    require(model.shapes_consistent(), "to_json: inconsistent model shapes");
    nlohmann::json j;
    j["input_dim"] = model.input_dim();
    j["hidden_dim"] = model.hidden_dim();
    j["n_channels"] = model.action_dim() - 1;
    auto flat = [](const Eigen::MatrixXd& m) {
        std::vector<double> v;
        v.reserve(static_cast<std::size_t>(m.size()));
        for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
        return v;
    };
    j["w1"] = flat(model.w1);
    j["b1"] = std::vector<double>(model.b1.data(), model.b1.data() + model.b1.size());
    j["w2"] = flat(model.w2);
    j["b2"] = std::vector<double>(model.b2.data(), model.b2.data() + model.b2.size());
    return j;
}

QNetworkModel model_from_json(const nlohmann::json& j) {
    const int input_dim = j.at("input_dim").get<int>();
    const int hidden_dim = j.at("hidden_dim").get<int>();
    const int action_dim = j.at("n_channels").get<int>() + 1;
    auto unflat = [](const std::vector<double>& v, int rows, int cols) {
        if (static_cast<std::size_t>(rows) * cols != v.size())
            throw std::invalid_argument("model json: wrong tensor length");
        Eigen::MatrixXd m(rows, cols);
        std::size_t k = 0;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) m(r, c) = v[k++];
        return m;
    };
    QNetworkModel m;
    m.w1 = unflat(j.at("w1").get<std::vector<double>>(), hidden_dim, input_dim);
    m.w2 = unflat(j.at("w2").get<std::vector<double>>(), action_dim, hidden_dim);
    auto b1v = j.at("b1").get<std::vector<double>>();
    auto b2v = j.at("b2").get<std::vector<double>>();
    if (static_cast<int>(b1v.size()) != hidden_dim || static_cast<int>(b2v.size()) != action_dim)
        throw std::invalid_argument("model json: wrong bias length");
    m.b1 = Eigen::Map<const Eigen::VectorXd>(b1v.data(), hidden_dim);
    m.b2 = Eigen::Map<const Eigen::VectorXd>(b2v.data(), action_dim);
    return m;
}

}  // namespace hermes::nnet
