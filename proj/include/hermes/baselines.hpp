#pragma once

// Reference schedulers: centralized proportional fairness over true buffer
// and rate state, and the reward rule of the shuffle-free learning baseline.

#include <cstdint>
#include <vector>

namespace hermes::baselines {

struct PfState {
    std::vector<double> avg_rate;  // per configured UE, bits/slot, EMA
    int max_rbg_per_ue = 1;
    double beta = 0.01;  // EMA step toward this slot's served bits
};

// warm-starts every average at a small positive value so the first slot's
// ratio is well defined
PfState make_pf_state(int n_ues, double warm_start_bits = 1.0, double beta = 0.01,
                      int max_rbg_per_ue = 1);

// Allocate channels greedily in channel-index order: each active RBG goes to
// the eligible UE (active, nonempty buffer, below the per-slot cap) with the
// highest current-rate / average-rate ratio; ties break to the lowest UE
// index. Returns one UE index per configured RBG, -1 where the RBG is idle
// or inactive.
std::vector<int> pf_schedule(const std::vector<std::vector<std::int64_t>>& rates,
                             const std::vector<std::int64_t>& buffer_bits,
                             const std::vector<bool>& ue_active,
                             const std::vector<bool>& rbg_active, const PfState& state);

// avg <- (1-beta)*avg + beta*served, active UEs only; floored at a tiny
// positive value so ratios never divide by zero
void pf_update(PfState& state, const std::vector<std::int64_t>& served_bits,
               const std::vector<bool>& ue_active);

// success earns the channel rate, everything else earns nothing
double dqsa_reward(bool success, double x);

}  // namespace hermes::baselines
