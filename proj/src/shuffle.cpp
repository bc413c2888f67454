#include "hermes/shuffle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hermes::shuffle {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

void check_finite_square(const Eigen::MatrixXd& e, const char* who) {
    require(e.rows() == e.cols() && e.rows() >= 1, "preference matrix must be square");
    if (!e.allFinite()) throw std::domain_error(who);
}

}  // namespace

nnet::QNetworkModel normalize_model(const nnet::QNetworkModel& model) {
    require(model.shapes_consistent(), "normalize_model: inconsistent shapes");
    nnet::QNetworkModel out = model;
    for (int c = 0; c < out.w2.cols(); ++c) out.w2.col(c).array() -= out.w2.col(c).mean();
    out.b2.array() -= out.b2.mean();
    return out;
}

double model_distance(const nnet::QNetworkModel& a, const nnet::QNetworkModel& b) {
    require(a.same_shape(b), "model_distance: shape mismatch");
    const nnet::QNetworkModel na = normalize_model(a);
    const nnet::QNetworkModel nb = normalize_model(b);
    const double sq = (na.w2 - nb.w2).squaredNorm() + (na.b2 - nb.b2).squaredNorm();
    const double entries = static_cast<double>(a.w2.size() + a.b2.size());
    return sq / entries;
}

MlaTable::MlaTable(int n_ues) {
    require(n_ues >= 1, "MlaTable needs at least one UE");
    last_.assign(static_cast<std::size_t>(n_ues),
                 std::vector<std::int64_t>(static_cast<std::size_t>(n_ues), -1));
}

std::int64_t MlaTable::last_assigned(int ue, int model) const {
    require(ue >= 0 && ue < size() && model >= 0 && model < size(), "MlaTable index out of range");
    return last_[static_cast<std::size_t>(ue)][static_cast<std::size_t>(model)];
}

double MlaTable::score(int ue, int model) const {
    // -1 for never-assigned makes this exactly current_round + 1
    return static_cast<double>(round_ - last_assigned(ue, model));
}

Eigen::MatrixXd MlaTable::scores(const std::vector<int>& participants) const {
    const int n = static_cast<int>(participants.size());
    Eigen::MatrixXd e(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            e(i, j) = score(participants[static_cast<std::size_t>(i)],
                            participants[static_cast<std::size_t>(j)]);
    return e;
}

void MlaTable::record_assignment(int ue, int model) {
    require(ue >= 0 && ue < size() && model >= 0 && model < size(), "MlaTable index out of range");
    last_[static_cast<std::size_t>(ue)][static_cast<std::size_t>(model)] = round_;
}

Eigen::MatrixXd preference_matrix(const std::vector<nnet::QNetworkModel>& models,
                                  const Eigen::MatrixXd& mla_scores, double lambda) {
    require(lambda >= 0.0, "lambda must be non-negative");
    const int n = static_cast<int>(models.size());
    require(mla_scores.rows() == n && mla_scores.cols() == n,
            "score matrix must match the model count");
    Eigen::MatrixXd e = mla_scores;
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            const double md = i == j ? 0.0
                                     : model_distance(models[static_cast<std::size_t>(i)],
                                                      models[static_cast<std::size_t>(j)]);
            e(i, j) -= lambda * md;
            if (j != i) e(j, i) -= lambda * md;  // distance is symmetric
        }
    }
    if (!e.allFinite()) throw std::domain_error("preference matrix is not finite");
    return e;
}

namespace {

// Kuhn's augmenting path: can `row` be matched, evicting earlier rows?
bool try_augment(int row, const std::vector<std::vector<bool>>& adj, std::vector<char>& visited,
                 std::vector<int>& col_owner) {
    const int n = static_cast<int>(adj.size());
    for (int col = 0; col < n; ++col) {
        if (!adj[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] ||
            visited[static_cast<std::size_t>(col)])
            continue;
        visited[static_cast<std::size_t>(col)] = 1;
        if (col_owner[static_cast<std::size_t>(col)] == -1 ||
            try_augment(col_owner[static_cast<std::size_t>(col)], adj, visited, col_owner)) {
            col_owner[static_cast<std::size_t>(col)] = row;
            return true;
        }
    }
    return false;
}

}  // namespace

Matching max_bipartite_matching(const std::vector<std::vector<bool>>& adjacency) {
    const int n = static_cast<int>(adjacency.size());
    require(n >= 1, "adjacency must be non-empty");
    for (const auto& row : adjacency)
        require(static_cast<int>(row.size()) == n, "adjacency must be square");

    std::vector<int> col_owner(static_cast<std::size_t>(n), -1);
    Matching m;
    m.assign.assign(static_cast<std::size_t>(n), -1);
    for (int row = 0; row < n; ++row) {
        std::vector<char> visited(static_cast<std::size_t>(n), 0);
        if (try_augment(row, adjacency, visited, col_owner)) ++m.size;
    }
    for (int col = 0; col < n; ++col)
        if (col_owner[static_cast<std::size_t>(col)] != -1)
            m.assign[static_cast<std::size_t>(col_owner[static_cast<std::size_t>(col)])] = col;
    m.perfect = m.size == n;
    return m;
}

Matching km_matching(const Eigen::MatrixXd& e) {
    check_finite_square(e, "km_matching: non-finite preferences");
    const int n = static_cast<int>(e.rows());
    // classic O(n^3) potentials formulation on costs (minimize -e), 1-indexed
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<double> v(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<int> p(static_cast<std::size_t>(n + 1), 0);
    std::vector<int> way(static_cast<std::size_t>(n + 1), 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
        std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = -e(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                                   v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    Matching m;
    m.assign.assign(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j)
        m.assign[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    m.size = n;
    m.perfect = true;
    return m;
}

Matching maximin_matching(const Eigen::MatrixXd& e) {
    check_finite_square(e, "maximin_matching: non-finite preferences");
    const int n = static_cast<int>(e.rows());
    std::vector<double> values(e.data(), e.data() + e.size());
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());

    auto feasible = [&](double threshold) {
        std::vector<std::vector<bool>> adj(static_cast<std::size_t>(n),
                                           std::vector<bool>(static_cast<std::size_t>(n), false));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                adj[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                    e(i, j) >= threshold;
        return max_bipartite_matching(adj);
    };

    // feasibility is monotone: raising the threshold only removes edges, and
    // the global minimum always admits the complete graph
    std::size_t lo = 0, hi = values.size() - 1;
    while (lo < hi) {
        const std::size_t mid = (lo + hi + 1) / 2;
        if (feasible(values[mid]).perfect)
            lo = mid;
        else
            hi = mid - 1;
    }
    return feasible(values[lo]);
}

double matching_total(const Eigen::MatrixXd& e, const Matching& m) {
    double total = 0.0;
    for (int i = 0; i < e.rows(); ++i) {
        const int j = m.assign[static_cast<std::size_t>(i)];
        if (j >= 0) total += e(i, j);
    }
    return total;
}

double matching_bottleneck(const Eigen::MatrixXd& e, const Matching& m) {
    double low = std::numeric_limits<double>::infinity();
    for (int i = 0; i < e.rows(); ++i) {
        const int j = m.assign[static_cast<std::size_t>(i)];
        if (j >= 0) low = std::min(low, e(i, j));
    }
    return low;
}

ShuffleOutcome shuffle_round(const std::map<int, nnet::QNetworkModel>& uploads, MlaTable& table,
                             double lambda, MatchStrategy strategy, bool advance_round) {
    require(!uploads.empty(), "shuffle_round needs at least one upload");
    std::vector<int> participants;
    std::vector<nnet::QNetworkModel> models;
    participants.reserve(uploads.size());
    for (const auto& [ue, model] : uploads) {
        require(ue >= 0 && ue < table.size(), "uploading UE unknown to the MLA table");
        participants.push_back(ue);
        models.push_back(model);
    }

    const Eigen::MatrixXd e = preference_matrix(models, table.scores(participants), lambda);
    const Matching m = strategy == MatchStrategy::maximin ? maximin_matching(e) : km_matching(e);
    if (!m.perfect) throw std::logic_error("shuffle matching must be perfect");

    ShuffleOutcome out;
    out.round = table.current_round();
    out.bottleneck = matching_bottleneck(e, m);
    out.total = matching_total(e, m);
    for (std::size_t i = 0; i < participants.size(); ++i) {
        const int j = m.assign[i];
        const int ue = participants[i];
        const int owner = participants[static_cast<std::size_t>(j)];
        out.assigned.emplace(ue, models[static_cast<std::size_t>(j)]);
        out.source_ue.emplace(ue, owner);
        table.record_assignment(ue, owner);
    }
    if (advance_round) table.advance_round();
    return out;
}

std::vector<std::vector<int>> partition_ues(const std::vector<int>& ues, int num_shufflers,
                                            rng::Stream& rng) {
    require(num_shufflers >= 1, "need at least one shuffler");
    std::vector<int> order = ues;
    // Fisher-Yates from the top, driven by the partition stream
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(order[i - 1], order[j]);
    }
    const std::size_t k = static_cast<std::size_t>(num_shufflers);
    std::vector<std::vector<int>> subsets(k);
    const std::size_t base = order.size() / k;
    const std::size_t extra = order.size() % k;  // first `extra` subsets get one more
    std::size_t at = 0;
    for (std::size_t s = 0; s < k; ++s) {
        const std::size_t take = base + (s < extra ? 1 : 0);
        subsets[s].assign(order.begin() + static_cast<std::ptrdiff_t>(at),
                          order.begin() + static_cast<std::ptrdiff_t>(at + take));
        std::sort(subsets[s].begin(), subsets[s].end());
        at += take;
    }
    return subsets;
}

}  // namespace hermes::shuffle
