#include "hermes/baselines.hpp"

#include <algorithm>
#include <stdexcept>

namespace hermes::baselines {

namespace {
constexpr double kAvgFloor = 1e-6;
}

PfState make_pf_state(int n_ues, double warm_start_bits, double beta, int max_rbg_per_ue) {
    if (n_ues < 1) throw std::invalid_argument("pf needs at least one UE");
    if (warm_start_bits <= 0.0) throw std::invalid_argument("pf warm start must be positive");
    if (beta <= 0.0 || beta > 1.0) throw std::invalid_argument("pf beta must be in (0,1]");
    if (max_rbg_per_ue < 1) throw std::invalid_argument("pf per-UE cap must be at least 1");
    PfState s;
    s.avg_rate.assign(static_cast<std::size_t>(n_ues), warm_start_bits);
    s.beta = beta;
    s.max_rbg_per_ue = max_rbg_per_ue;
    return s;
}

std::vector<int> pf_schedule(const std::vector<std::vector<std::int64_t>>& rates,
                             const std::vector<std::int64_t>& buffer_bits,
                             const std::vector<bool>& ue_active,
                             const std::vector<bool>& rbg_active, const PfState& state) {
    const std::size_t n = state.avg_rate.size();
    if (rates.size() != n || buffer_bits.size() != n || ue_active.size() != n)
        throw std::invalid_argument("pf_schedule: per-UE arrays disagree on UE count");
    const std::size_t m = rbg_active.size();
    for (const auto& row : rates)
        if (row.size() != m) throw std::invalid_argument("pf_schedule: rate row length mismatch");

    std::vector<int> allocation(m, -1);
    std::vector<int> granted(n, 0);
    for (std::size_t r = 0; r < m; ++r) {
        if (!rbg_active[r]) continue;
        int best = -1;
        double best_ratio = -1.0;
        for (std::size_t u = 0; u < n; ++u) {
            if (!ue_active[u] || buffer_bits[u] <= 0) continue;
            if (granted[u] >= state.max_rbg_per_ue) continue;
            if (rates[u][r] < 0) throw std::invalid_argument("pf_schedule: negative rate");
            const double ratio = static_cast<double>(rates[u][r]) / state.avg_rate[u];
            if (ratio > best_ratio) {  // strict: ties keep the lowest UE index
                best_ratio = ratio;
                best = static_cast<int>(u);
            }
        }
        if (best >= 0) {
            allocation[r] = best;
            ++granted[static_cast<std::size_t>(best)];
        }
    }
    return allocation;
}

void pf_update(PfState& state, const std::vector<std::int64_t>& served_bits,
               const std::vector<bool>& ue_active) {
    const std::size_t n = state.avg_rate.size();
    if (served_bits.size() != n || ue_active.size() != n)
        throw std::invalid_argument("pf_update: per-UE arrays disagree on UE count");
    for (std::size_t u = 0; u < n; ++u) {
        if (!ue_active[u]) continue;
        state.avg_rate[u] = (1.0 - state.beta) * state.avg_rate[u] +
                            state.beta * static_cast<double>(served_bits[u]);
        state.avg_rate[u] = std::max(state.avg_rate[u], kAvgFloor);
    }
}

double dqsa_reward(bool success, double x) {
    if (x < 0.0) throw std::invalid_argument("rate must be non-negative");
    return success ? x : 0.0;
}

}  // namespace hermes::baselines
