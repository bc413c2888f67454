#pragma once

// Discrete-time wireless environment: slot clock, per-UE/per-RBG channel
// quality and achievable rates, application traffic filling buffers,
// collision resolution, and dynamic UE/RBG membership.

#include <cstdint>
#include <vector>

#include "hermes/rng.hpp"

namespace hermes::env5g {

inline constexpr int kRbsPerRbg = 16;
inline constexpr int kSubcarriersPerRb = 12;
inline constexpr int kSymbolsPerSlot = 14;
inline constexpr int kDmrsSymbols = 2;
inline constexpr int kSlotsPerFrame = 10;
inline constexpr int kCqiRefreshPeriodSlots = 200;
inline constexpr int kCqiMin = 1;
inline constexpr int kCqiMax = 15;

// One periodic traffic source: packet_size_bytes arrive every
// packet_interval_slots slots.
struct Application {
    int packet_interval_slots = 1;
    int packet_size_bytes = 0;
};

struct UeSpec {
    double distance_m = 0.0;
    std::vector<Application> applications;
    bool initially_active = true;
};

enum class RbgStatus { idle, utilized, collided };

struct UeSlotRecord {
    int ue_id = 0;
    int action = 0;  // 1..M requests that RBG (1-based), M+1 = stay silent
    bool success = false;
    std::int64_t transmitted_bits = 0;
    std::int64_t achievable_rate_bits = 0;  // rate on the requested RBG (0 if silent)
};

struct SlotOutcome {
    std::int64_t slot_index = 0;
    std::vector<RbgStatus> rbg_status;  // one per configured RBG; inactive stay idle
    std::vector<bool> rbg_active;
    std::vector<UeSlotRecord> ue_records;  // active UEs only, ascending ue_id
};

// clamp(round(15*(1 - d/r_cov)), 1, 15), round half-up; throws if d is
// negative or beyond coverage.
int base_cqi_from_distance(double d_m, double r_cov_m = 1000.0);

// 15-entry CQI -> bits-per-symbol map, index q-1; default eff(q) = 0.15q + 0.4.
std::vector<double> default_efficiency_table();

// floor(eff * (14-2) symbols * 12 subcarriers * 16 RBs)
std::int64_t bits_per_slot_from_efficiency(double efficiency);

class Environment {
  public:
    Environment(std::vector<UeSpec> ues, int m_rbgs, double coverage_radius_m = 1000.0,
                std::vector<double> efficiency_table = default_efficiency_table());

    int n_ues() const { return static_cast<int>(ues_.size()); }
    int m_rbgs() const { return m_rbgs_; }
    bool ue_active(int ue) const;
    bool rbg_active(int rbg) const;
    int active_ue_count() const;
    int active_rbg_count() const;

    // membership events; duplicate add/remove throws
    void add_ue(int ue);
    void remove_ue(int ue);
    void add_rbg(int rbg);
    void remove_rbg(int rbg);

    // buffer fill from the per-UE application mix; call once per slot
    void traffic_tick(std::int64_t slot);

    // redraw every per-(UE,RBG,RB) CQI as clamp(base + delta, 1, 15) with
    // delta uniform on {-2..+2}; draws run over all configured UEs/RBGs in
    // fixed (ue, rbg, rb) order so membership changes never shift the stream
    void cqi_tick(rng::Stream& rng);

    // achievable bits this slot for one (ue, rbg); 0 when either is inactive.
    // Mean CQI over the RBG's 16 RBs rounds half-up before the table lookup.
    std::int64_t data_rate(int ue, int rbg) const;

    // per-UE view for observation building: rate on every configured RBG
    std::vector<std::int64_t> rates_for_ue(int ue) const;
    std::int64_t buffer_bits(int ue) const;
    std::int64_t max_rate_bits() const;  // best possible data_rate under the table

    // apply one slot of simultaneous requests. actions has one entry per
    // configured UE: 1..M+1 for active UEs, 0 for inactive ones. slot indices
    // must be strictly increasing across calls.
    SlotOutcome resolve_slot(std::int64_t slot, const std::vector<int>& actions);

    std::int64_t cumulative_offered_bits(int ue) const;
    std::int64_t cumulative_transmitted_bits(int ue) const;
    int cqi(int ue, int rbg, int rb) const;  // exposed for tests

  private:
    void check_ue(int ue) const;
    void check_rbg(int rbg) const;

    std::vector<UeSpec> ues_;
    int m_rbgs_;
    double coverage_radius_m_;
    std::vector<double> efficiency_table_;
    std::vector<bool> ue_active_;
    std::vector<bool> rbg_active_;
    std::vector<std::int64_t> buffer_bits_;
    std::vector<std::int64_t> offered_bits_;
    std::vector<std::int64_t> transmitted_bits_;
    std::vector<int> base_cqi_;          // per UE
    std::vector<std::vector<int>> cqi_;  // [ue][rbg*16 + rb]
    std::int64_t last_resolved_slot_ = -1;
};

}  // namespace hermes::env5g
