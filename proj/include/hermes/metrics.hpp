#pragma once

// Evaluation pipeline: channel-utilization breakdown, throughput and
// fairness aggregates, convergence detection, and the two-player toy-game
// expectation/equilibrium analysis.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "hermes/env5g.hpp"

namespace hermes::metrics {

struct CueBreakdown {
    double utilized = 0.0;
    double collided = 0.0;
    double idle = 0.0;
};

// Proportions over (slot x active-RBG) trials. Counting is integer-exact;
// utilized is derived as 1 - collided - idle so the three always sum to one.
CueBreakdown cue(const std::vector<env5g::SlotOutcome>& window);

// per-UE transmitted bits across the window
std::map<int, std::int64_t> per_ue_bits(const std::vector<env5g::SlotOutcome>& window);

// mean over the UEs appearing in the window of (transmitted bits / duration)
double avg_throughput_bps(const std::vector<env5g::SlotOutcome>& window, double duration_s);

// Jain's fairness index (sum x)^2 / (N * sum x^2), in (0, 1]
double jfi(const std::vector<double>& throughputs);

// First slot from which every full rolling window keeps its collision
// proportion (collided RBG-slots over active RBG-slots) below the threshold;
// empty when the trace never settles or is shorter than one window.
std::optional<std::int64_t> convergence_slot(const std::vector<env5g::SlotOutcome>& outcomes,
                                             int window_slots = 100, double threshold = 0.1);

// --- two-player, two-action toy analysis ---------------------------------
// action indices: 0 = request the channel, 1 = stay silent

struct ProfilePayoff {
    double alice = 0.0;
    double bob = 0.0;
};

// payoff[alice_action][bob_action]
using PayoffTable = std::array<std::array<ProfilePayoff, 2>, 2>;

// both players share one channel; success pays +1
PayoffTable lenient_toy_payoffs();    // collision and silence pay 0
PayoffTable punishing_toy_payoffs();  // collision pays -1, silence 0

// Expected payoffs when each player executes its intended action with
// probability 1 - eps + eps/2 and the other action with eps/2.
PayoffTable expectation_table(const PayoffTable& payoffs, double epsilon);

// all intended-action profiles where neither player gains by a unilateral
// switch (exhaustive deviation check)
std::vector<std::pair<int, int>> nash_equilibria(const PayoffTable& table);

}  // namespace hermes::metrics
