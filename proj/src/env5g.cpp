#include "hermes/env5g.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hermes::env5g {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

int base_cqi_from_distance(double d_m, double r_cov_m) {
    require(r_cov_m > 0.0, "coverage radius must be positive");
    require(d_m >= 0.0, "distance must be non-negative");
    if (d_m > r_cov_m) throw std::invalid_argument("UE out of coverage");
    // 15*(1 - d/R) computed as 15*(R-d)/R: the difference stays exactly
    // representable for the usual decimal geometries, so half-up rounding
    // lands where pencil-and-paper arithmetic says it should
    const int raw = static_cast<int>(std::floor(15.0 * (r_cov_m - d_m) / r_cov_m + 0.5));
    return std::clamp(raw, kCqiMin, kCqiMax);
}

std::vector<double> default_efficiency_table() {
    std::vector<double> t(15);
    for (int q = 1; q <= 15; ++q) t[static_cast<std::size_t>(q - 1)] = 0.15 * q + 0.4;
    return t;
}

std::int64_t bits_per_slot_from_efficiency(double efficiency) {
    require(efficiency >= 0.0, "efficiency must be non-negative");
    const double res = static_cast<double>((kSymbolsPerSlot - kDmrsSymbols) * kSubcarriersPerRb *
                                           kRbsPerRbg);
    return static_cast<std::int64_t>(std::floor(efficiency * res));
}

Environment::Environment(std::vector<UeSpec> ues, int m_rbgs, double coverage_radius_m,
                         std::vector<double> efficiency_table)
    : ues_(std::move(ues)),
      m_rbgs_(m_rbgs),
      coverage_radius_m_(coverage_radius_m),
      efficiency_table_(std::move(efficiency_table)) {
    require(!ues_.empty(), "environment needs at least one UE");
    require(m_rbgs_ >= 1, "environment needs at least one RBG");
    require(efficiency_table_.size() == 15, "efficiency table must have 15 entries");
    for (double e : efficiency_table_) require(e > 0.0, "efficiency entries must be positive");

    const int n = n_ues();
    ue_active_.resize(static_cast<std::size_t>(n));
    buffer_bits_.assign(static_cast<std::size_t>(n), 0);
    offered_bits_.assign(static_cast<std::size_t>(n), 0);
    transmitted_bits_.assign(static_cast<std::size_t>(n), 0);
    base_cqi_.resize(static_cast<std::size_t>(n));
    cqi_.resize(static_cast<std::size_t>(n));
    for (int u = 0; u < n; ++u) {
        const UeSpec& spec = ues_[static_cast<std::size_t>(u)];
        for (const Application& app : spec.applications) {
            require(app.packet_interval_slots > 0, "packet interval must be positive");
            require(app.packet_size_bytes > 0, "packet size must be positive");
        }
        ue_active_[static_cast<std::size_t>(u)] = spec.initially_active;
        base_cqi_[static_cast<std::size_t>(u)] =
            base_cqi_from_distance(spec.distance_m, coverage_radius_m_);
        cqi_[static_cast<std::size_t>(u)].assign(
            static_cast<std::size_t>(m_rbgs_) * kRbsPerRbg, base_cqi_[static_cast<std::size_t>(u)]);
    }
    rbg_active_.assign(static_cast<std::size_t>(m_rbgs_), true);
}

void Environment::check_ue(int ue) const {
    require(ue >= 0 && ue < n_ues(), "ue index out of range");
}

void Environment::check_rbg(int rbg) const {
    require(rbg >= 0 && rbg < m_rbgs_, "rbg index out of range");
}

bool Environment::ue_active(int ue) const {
    check_ue(ue);
    return ue_active_[static_cast<std::size_t>(ue)];
}

bool Environment::rbg_active(int rbg) const {
    check_rbg(rbg);
    return rbg_active_[static_cast<std::size_t>(rbg)];
}

int Environment::active_ue_count() const {
    return static_cast<int>(std::count(ue_active_.begin(), ue_active_.end(), true));
}

int Environment::active_rbg_count() const {
    return static_cast<int>(std::count(rbg_active_.begin(), rbg_active_.end(), true));
}

void Environment::add_ue(int ue) {
    check_ue(ue);
    if (ue_active_[static_cast<std::size_t>(ue)])
        throw std::invalid_argument("add_ue: UE already active");
    ue_active_[static_cast<std::size_t>(ue)] = true;
}

void Environment::remove_ue(int ue) {
    check_ue(ue);
    if (!ue_active_[static_cast<std::size_t>(ue)])
        throw std::invalid_argument("remove_ue: UE already inactive");
    ue_active_[static_cast<std::size_t>(ue)] = false;
}

void Environment::add_rbg(int rbg) {
    check_rbg(rbg);
    if (rbg_active_[static_cast<std::size_t>(rbg)])
        throw std::invalid_argument("add_rbg: RBG already active");
    rbg_active_[static_cast<std::size_t>(rbg)] = true;
}

void Environment::remove_rbg(int rbg) {
    check_rbg(rbg);
    if (!rbg_active_[static_cast<std::size_t>(rbg)])
        throw std::invalid_argument("remove_rbg: RBG already inactive");
    rbg_active_[static_cast<std::size_t>(rbg)] = false;
}

void Environment::traffic_tick(std::int64_t slot) {
    require(slot >= 0, "slot must be non-negative");
    for (int u = 0; u < n_ues(); ++u) {
        if (!ue_active_[static_cast<std::size_t>(u)]) continue;
        for (const Application& app : ues_[static_cast<std::size_t>(u)].applications) {
            if (slot % app.packet_interval_slots == 0) {
                const std::int64_t bits = static_cast<std::int64_t>(app.packet_size_bytes) * 8;
                buffer_bits_[static_cast<std::size_t>(u)] += bits;
                offered_bits_[static_cast<std::size_t>(u)] += bits;
            }
        }
    }
}

void Environment::cqi_tick(rng::Stream& rng) {
    for (int u = 0; u < n_ues(); ++u) {
        const int base = base_cqi_[static_cast<std::size_t>(u)];
        for (std::size_t k = 0; k < cqi_[static_cast<std::size_t>(u)].size(); ++k) {
            const int delta = rng.next_int(-2, 2);
            cqi_[static_cast<std::size_t>(u)][k] = std::clamp(base + delta, kCqiMin, kCqiMax);
        }
    }
}

int Environment::cqi(int ue, int rbg, int rb) const {
    check_ue(ue);
    check_rbg(rbg);
    require(rb >= 0 && rb < kRbsPerRbg, "rb index out of range");
    return cqi_[static_cast<std::size_t>(ue)][static_cast<std::size_t>(rbg) * kRbsPerRbg +
                                              static_cast<std::size_t>(rb)];
}

std::int64_t Environment::data_rate(int ue, int rbg) const {
    check_ue(ue);
    check_rbg(rbg);
    if (!ue_active_[static_cast<std::size_t>(ue)] || !rbg_active_[static_cast<std::size_t>(rbg)])
        return 0;
    int sum = 0;
    for (int rb = 0; rb < kRbsPerRbg; ++rb)
        sum += cqi_[static_cast<std::size_t>(ue)][static_cast<std::size_t>(rbg) * kRbsPerRbg +
                                                  static_cast<std::size_t>(rb)];
    const int mean_cqi = (sum + kRbsPerRbg / 2) / kRbsPerRbg;  // half-up on a positive sum
    return bits_per_slot_from_efficiency(efficiency_table_[static_cast<std::size_t>(mean_cqi - 1)]);
}

std::vector<std::int64_t> Environment::rates_for_ue(int ue) const {
    check_ue(ue);
    std::vector<std::int64_t> rates(static_cast<std::size_t>(m_rbgs_), 0);
    for (int r = 0; r < m_rbgs_; ++r) rates[static_cast<std::size_t>(r)] = data_rate(ue, r);
    return rates;
}

std::int64_t Environment::buffer_bits(int ue) const {
    check_ue(ue);
    return buffer_bits_[static_cast<std::size_t>(ue)];
}

std::int64_t Environment::max_rate_bits() const {
    double best = 0.0;
    for (double e : efficiency_table_) best = std::max(best, e);
    return bits_per_slot_from_efficiency(best);
}

SlotOutcome Environment::resolve_slot(std::int64_t slot, const std::vector<int>& actions) {
    require(slot > last_resolved_slot_, "slots must be resolved in increasing order");
    require(actions.size() == static_cast<std::size_t>(n_ues()),
            "need one action entry per configured UE");

    const int silent = m_rbgs_ + 1;
    std::vector<int> requesters(static_cast<std::size_t>(m_rbgs_), 0);
    for (int u = 0; u < n_ues(); ++u) {
        const int a = actions[static_cast<std::size_t>(u)];
        if (!ue_active_[static_cast<std::size_t>(u)]) {
            require(a == 0, "inactive UE must carry action 0");
            continue;
        }
        require(a >= 1 && a <= silent, "action out of range");
        if (a == silent) continue;
        if (rbg_active_[static_cast<std::size_t>(a - 1)]) ++requesters[static_cast<std::size_t>(a - 1)];
        // requests to an inactive RBG count nowhere: they simply fail
    }

    SlotOutcome out;
    out.slot_index = slot;
    out.rbg_active = rbg_active_;
    out.rbg_status.resize(static_cast<std::size_t>(m_rbgs_), RbgStatus::idle);
    for (int r = 0; r < m_rbgs_; ++r) {
        if (!rbg_active_[static_cast<std::size_t>(r)]) continue;
        const int k = requesters[static_cast<std::size_t>(r)];
        out.rbg_status[static_cast<std::size_t>(r)] =
            k == 0 ? RbgStatus::idle : (k == 1 ? RbgStatus::utilized : RbgStatus::collided);
    }

    for (int u = 0; u < n_ues(); ++u) {
        if (!ue_active_[static_cast<std::size_t>(u)]) continue;
        const int a = actions[static_cast<std::size_t>(u)];
        UeSlotRecord rec;
        rec.ue_id = u;
        rec.action = a;
        if (a != silent) {
            const int rbg = a - 1;
            rec.achievable_rate_bits = data_rate(u, rbg);  // 0 on an inactive RBG
            if (rbg_active_[static_cast<std::size_t>(rbg)] &&
                out.rbg_status[static_cast<std::size_t>(rbg)] == RbgStatus::utilized) {
                rec.success = true;
                rec.transmitted_bits =
                    std::min(buffer_bits_[static_cast<std::size_t>(u)], rec.achievable_rate_bits);
                buffer_bits_[static_cast<std::size_t>(u)] -= rec.transmitted_bits;
                transmitted_bits_[static_cast<std::size_t>(u)] += rec.transmitted_bits;
            }
        }
        out.ue_records.push_back(rec);
    }

    last_resolved_slot_ = slot;
    return out;
}

std::int64_t Environment::cumulative_offered_bits(int ue) const {
    check_ue(ue);
    return offered_bits_[static_cast<std::size_t>(ue)];
}

std::int64_t Environment::cumulative_transmitted_bits(int ue) const {
    check_ue(ue);
    return transmitted_bits_[static_cast<std::size_t>(ue)];
}

}  // namespace hermes::env5g
