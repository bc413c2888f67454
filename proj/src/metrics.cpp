#include "hermes/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace hermes::metrics {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

struct StatusCounts {
    std::int64_t utilized = 0;
    std::int64_t collided = 0;
    std::int64_t idle = 0;
    std::int64_t total() const { return utilized + collided + idle; }
};

StatusCounts count_statuses(const env5g::SlotOutcome& out) {
    StatusCounts c;
    for (std::size_t r = 0; r < out.rbg_status.size(); ++r) {
        if (!out.rbg_active[r]) continue;
        switch (out.rbg_status[r]) {
            case env5g::RbgStatus::utilized: ++c.utilized; break;
            case env5g::RbgStatus::collided: ++c.collided; break;
            case env5g::RbgStatus::idle: ++c.idle; break;
        }
    }
    return c;
}

}  // namespace

CueBreakdown cue(const std::vector<env5g::SlotOutcome>& window) {
    require(!window.empty(), "cue needs a non-empty window");
    StatusCounts c;
    for (const env5g::SlotOutcome& out : window) {
        const StatusCounts s = count_statuses(out);
        c.utilized += s.utilized;
        c.collided += s.collided;
        c.idle += s.idle;
    }
    require(c.total() > 0, "cue window contains no active RBG trials");
    CueBreakdown b;
    b.collided = static_cast<double>(c.collided) / static_cast<double>(c.total());
    b.idle = static_cast<double>(c.idle) / static_cast<double>(c.total());
    // complement of the single rounded sum: utilized + (collided + idle)
    // reconstructs exactly 1.0, so the three always partition the window
    b.utilized = 1.0 - (b.collided + b.idle);
    return b;
}

std::map<int, std::int64_t> per_ue_bits(const std::vector<env5g::SlotOutcome>& window) {
    std::map<int, std::int64_t> bits;
    for (const env5g::SlotOutcome& out : window)
        for (const env5g::UeSlotRecord& rec : out.ue_records) bits[rec.ue_id] += rec.transmitted_bits;
    return bits;
}

double avg_throughput_bps(const std::vector<env5g::SlotOutcome>& window, double duration_s) {
    require(duration_s > 0.0, "duration must be positive");
    const std::map<int, std::int64_t> bits = per_ue_bits(window);
    if (bits.empty()) return 0.0;
    double total = 0.0;
    for (const auto& [ue, b] : bits) total += static_cast<double>(b);
    return total / static_cast<double>(bits.size()) / duration_s;
}

double jfi(const std::vector<double>& throughputs) {
    require(!throughputs.empty(), "jfi needs at least one UE");
    double sum = 0.0, sumsq = 0.0;
    bool any_positive = false;
    for (double x : throughputs) {
        require(x >= 0.0, "throughputs must be non-negative");
        if (x > 0.0) any_positive = true;
        sum += x;
        sumsq += x * x;
    }
    require(any_positive, "jfi is undefined on an all-zero vector");
    return sum * sum / (static_cast<double>(throughputs.size()) * sumsq);
}

std::optional<std::int64_t> convergence_slot(const std::vector<env5g::SlotOutcome>& outcomes,
                                             int window_slots, double threshold) {
    require(window_slots >= 1, "window must be positive");
    require(threshold > 0.0 && threshold <= 1.0, "threshold must lie in (0,1]");
    const std::int64_t n = static_cast<std::int64_t>(outcomes.size());
    if (n < window_slots) return std::nullopt;

    // rolling integer counts over the trailing window
    std::int64_t collided = 0, trials = 0;
    std::int64_t last_bad = -1;  // most recent window end at/above the threshold
    for (std::int64_t s = 0; s < n; ++s) {
        const StatusCounts in = count_statuses(outcomes[static_cast<std::size_t>(s)]);
        collided += in.collided;
        trials += in.total();
        if (s >= window_slots) {
            const StatusCounts outc =
                count_statuses(outcomes[static_cast<std::size_t>(s - window_slots)]);
            collided -= outc.collided;
            trials -= outc.total();
        }
        if (s >= window_slots - 1) {
            // trials can be zero mid-run if every RBG is inactive; treat that
            // window as collision-free
            const bool bad = trials > 0 && static_cast<double>(collided) >=
                                               threshold * static_cast<double>(trials);
            if (bad) last_bad = s;
        }
    }
    if (last_bad == n - 1) return std::nullopt;  // still colliding at the end
    if (last_bad < 0) return outcomes.front().slot_index;
    return outcomes[static_cast<std::size_t>(last_bad + 1)].slot_index;
}

PayoffTable lenient_toy_payoffs() {
    PayoffTable t{};
    t[0][0] = {0.0, 0.0};  // both request: collision pays nothing
    t[0][1] = {1.0, 0.0};  // alice alone on the channel
    t[1][0] = {0.0, 1.0};  // bob alone
    t[1][1] = {0.0, 0.0};  // both silent
    return t;
}

PayoffTable punishing_toy_payoffs() {
    PayoffTable t{};
    t[0][0] = {-1.0, -1.0};
    t[0][1] = {1.0, 0.0};
    t[1][0] = {0.0, 1.0};
    t[1][1] = {0.0, 0.0};
    return t;
}

PayoffTable expectation_table(const PayoffTable& payoffs, double epsilon) {
    require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0,1]");
    const double keep = 1.0 - epsilon + epsilon / 2.0;
    const double flip = epsilon / 2.0;
    PayoffTable out{};
    for (int ia = 0; ia < 2; ++ia) {
        for (int ib = 0; ib < 2; ++ib) {
            for (int xa = 0; xa < 2; ++xa) {
                for (int xb = 0; xb < 2; ++xb) {
                    const double p = (xa == ia ? keep : flip) * (xb == ib ? keep : flip);
                    out[ia][ib].alice += p * payoffs[xa][xb].alice;
                    out[ia][ib].bob += p * payoffs[xa][xb].bob;
                }
            }
        }
    }
    return out;
}

std::vector<std::pair<int, int>> nash_equilibria(const PayoffTable& table) {
    std::vector<std::pair<int, int>> found;
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            const bool alice_deviates = table[1 - a][b].alice > table[a][b].alice;
            const bool bob_deviates = table[a][1 - b].bob > table[a][b].bob;
            if (!alice_deviates && !bob_deviates) found.emplace_back(a, b);
        }
    }
    return found;
}

}  // namespace hermes::metrics
