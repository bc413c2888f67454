// Acceptance gate: ten end-to-end checks against the built library and the
// shipped scenario files. Each criterion prints exactly one PASS/FAIL line;
// the process exits nonzero if any of them fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hermes/agent.hpp"
#include "hermes/env5g.hpp"
#include "hermes/metrics.hpp"
#include "hermes/qnet.hpp"
#include "hermes/rng.hpp"
#include "hermes/shuffle.hpp"
#include "hermes/simctl.hpp"

using hermes::rng::Stream;
using hermes::nnet::QNetworkModel;
using hermes::nnet::TrainBatch;
using hermes::nnet::Experience;
namespace metrics = hermes::metrics;
namespace shuffle = hermes::shuffle;
namespace nnet = hermes::nnet;
namespace env5g = hermes::env5g;
namespace simctl = hermes::simctl;

namespace {

using Clock = std::chrono::steady_clock;

int g_failures = 0;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(int index, const std::string& label, bool ok, const std::string& detail,
            double elapsed_s) {
    if (!ok) ++g_failures;
    std::printf("C%-2d %s  %s — %s (%.2fs)\n", index, ok ? "PASS" : "FAIL", label.c_str(),
                detail.c_str(), elapsed_s);
    std::fflush(stdout);
}

nlohmann::json load_scenario_file(const std::string& name) {
    const std::string path = std::string(HERMES_SCENARIO_DIR) + "/" + name;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario " + path);
    return nlohmann::json::parse(in);
}

double median5(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    return xs[xs.size() / 2];
}

std::string fmt(double x, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, x);
    return buf;
}

// ---------------------------------------------------------------- C1 ------

void criterion_1() {
    const auto start = Clock::now();
    const double eps = 0.2;

    const auto lenient = metrics::expectation_table(metrics::lenient_toy_payoffs(), eps);
    const double alice_rr = lenient[0][0].alice;
    const bool value_ok = std::abs(alice_rr - 0.09) <= 1e-12;

    const auto ne_lenient = metrics::nash_equilibria(lenient);
    const auto ne_punish =
        metrics::nash_equilibria(metrics::expectation_table(metrics::punishing_toy_payoffs(), eps));
    const bool ne_ok =
        ne_lenient == std::vector<std::pair<int, int>>{{0, 0}} &&
        ne_punish == std::vector<std::pair<int, int>>{{0, 1}, {1, 0}};

    const double el = seconds_since(start);
    report(1, "toy game expectations and equilibria", value_ok && ne_ok && el < 1.0,
           "both-request expectation " + fmt(alice_rr, 12) + (value_ok ? " == 0.09" : " != 0.09") +
               (ne_ok ? "; equilibrium sets match" : "; equilibrium sets WRONG"),
           el);
}

// ---------------------------------------------------------------- C2 ------

void criterion_2() {
    const auto start = Clock::now();
    Stream rng = Stream::derived(2026, "acceptance-matching");
    int bad_sum = 0, bad_bottleneck = 0;

    for (int trial = 0; trial < 1000; ++trial) {
        const int n = rng.next_int(1, 8);
        Eigen::MatrixXd e(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) e(i, j) = static_cast<double>(rng.next_int(-50, 50));

        // exhaustive search over all n! assignments
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        double best_sum = -1e18, best_min = -1e18;
        do {
            double s = 0.0, lo = 1e18;
            for (int i = 0; i < n; ++i) {
                const double v = e(i, perm[static_cast<std::size_t>(i)]);
                s += v;
                lo = std::min(lo, v);
            }
            best_sum = std::max(best_sum, s);
            best_min = std::max(best_min, lo);
        } while (std::next_permutation(perm.begin(), perm.end()));

        const shuffle::Matching km = shuffle::km_matching(e);
        const shuffle::Matching mm = shuffle::maximin_matching(e);
        if (!km.perfect || shuffle::matching_total(e, km) != best_sum) ++bad_sum;
        if (!mm.perfect || shuffle::matching_bottleneck(e, mm) != best_min) ++bad_bottleneck;
    }

    const double el = seconds_since(start);
    report(2, "matching equals exhaustive search",
           bad_sum == 0 && bad_bottleneck == 0 && el < 30.0,
           "1000 matrices; max-sum mismatches " + std::to_string(bad_sum) +
               ", bottleneck mismatches " + std::to_string(bad_bottleneck),
           el);
}

// ---------------------------------------------------------------- C3 ------

void criterion_3() {
    const auto start = Clock::now();
    const double h = 1e-6;
    int accepted = 0, bad_components = 0;
    std::uint64_t trial = 0;

    while (accepted < 100 && trial < 1000) {
        ++trial;
        Stream dims = Stream::derived(trial, "acceptance-fd-dims");
        const int d = dims.next_int(3, 7);
        const int l = dims.next_int(2, 6);
        const int a = dims.next_int(2, 5);
        Stream ms = Stream::derived(trial, "acceptance-fd-model");
        Stream ts = Stream::derived(trial, "acceptance-fd-target");
        QNetworkModel m = nnet::random_model(d, l, a, ms);
        QNetworkModel t = nnet::random_model(d, l, a, ts);

        Stream bs = Stream::derived(trial, "acceptance-fd-batch");
        TrainBatch batch;
        const int b = bs.next_int(1, 6);
        for (int k = 0; k < b; ++k) {
            Experience e;
            e.state = Eigen::VectorXd::NullaryExpr(d, [&](Eigen::Index) {
                return bs.next_range(-1.5, 1.5);
            });
            e.next_state = Eigen::VectorXd::NullaryExpr(d, [&](Eigen::Index) {
                return bs.next_range(-1.5, 1.5);
            });
            e.action = bs.next_int(0, a - 1);
            e.reward = bs.next_unit();
            batch.push_back(std::move(e));
        }

        // skip instances whose hidden pre-activations sit near the relu kink,
        // where the central-difference quotient cannot be trusted
        bool near_kink = false;
        for (const Experience& e : batch) {
            const Eigen::VectorXd z1 = m.w1 * e.state + m.b1;
            for (int i = 0; i < z1.size(); ++i)
                if (std::abs(z1(i)) < 1e-4) near_kink = true;
        }
        if (near_kink) continue;
        ++accepted;

        const double gamma = 0.5 + 0.45 * Stream::derived(trial, "acceptance-fd-gamma").next_unit();
        const nnet::GradientSet g = nnet::td_gradient(m, t, batch, gamma);
        auto check = [&](double analytic, double* param) {
            const double keep = *param;
            *param = keep + h;
            const double up = nnet::td_loss(m, t, batch, gamma);
            *param = keep - h;
            const double down = nnet::td_loss(m, t, batch, gamma);
            *param = keep;
            const double fd = (up - down) / (2.0 * h);
            const double rel = std::abs(analytic - fd) /
                               std::max({std::abs(analytic), std::abs(fd), 1e-6});
            if (rel >= 1e-4) ++bad_components;
        };
        for (int r = 0; r < l; ++r)
            for (int c = 0; c < d; ++c) check(g.dw1(r, c), &m.w1(r, c));
        for (int i = 0; i < l; ++i) check(g.db1(i), &m.b1(i));
        for (int r = 0; r < a; ++r)
            for (int c = 0; c < l; ++c) check(g.dw2(r, c), &m.w2(r, c));
        for (int i = 0; i < a; ++i) check(g.db2(i), &m.b2(i));
    }

    const double el = seconds_since(start);
    report(3, "analytic TD gradient matches finite differences",
           accepted >= 100 && bad_components == 0 && el < 30.0,
           std::to_string(accepted) + " instances, every parameter within rel 1e-4; " +
               std::to_string(bad_components) + " component mismatches",
           el);
}

// ---------------------------------------------------------------- C4 ------

// a slot is "clean" when every channel carries exactly one transmission
bool clean_slot(const env5g::SlotOutcome& out) {
    for (std::size_t r = 0; r < out.rbg_status.size(); ++r) {
        if (!out.rbg_active[r]) return false;
        if (out.rbg_status[r] != env5g::RbgStatus::utilized) return false;
    }
    return true;
}

void criterion_4() {
    const auto start = Clock::now();
    const nlohmann::json doc = load_scenario_file("10ue-3rbg-100f.json");
    int seeds_ok = 0;
    double max_seed_s = 0.0;
    std::string detail = "clean-slot fraction per seed:";

    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto seed_start = Clock::now();
        simctl::ScenarioConfig cfg = simctl::load_scenario(doc);
        cfg.master_seed = seed;
        const simctl::RunArtifacts run = simctl::run_scenario(cfg);
        const std::size_t total = run.outcomes.size();
        int good = 0;
        for (std::size_t s = total - 200; s < total; ++s)
            if (clean_slot(run.outcomes[s])) ++good;
        const double frac = good / 200.0;
        if (frac >= 0.7) ++seeds_ok;
        detail += " " + fmt(frac, 3);
        max_seed_s = std::max(max_seed_s, seconds_since(seed_start));
    }

    const double el = seconds_since(start);
    report(4, "small-scenario convergence to clean channel use",
           seeds_ok >= 3 && max_seed_s < 120.0,
           detail + "; " + std::to_string(seeds_ok) + "/5 at or above 0.7", el);
}

// ---------------------------------------------------------- C5 / C6 / C7 --

struct TailStats {
    double jfi = 0.0;
    double utilized = 0.0;
    double throughput = 0.0;
};

void criteria_5_6_7() {
    const auto start = Clock::now();
    const nlohmann::json doc = load_scenario_file("20ue-6rbg-500f.json");
    std::map<simctl::Method, TailStats> med;
    double max_seed_s = 0.0;

    for (simctl::Method method :
         {simctl::Method::hermes, simctl::Method::pf, simctl::Method::dqsa}) {
        std::vector<double> jfis, utils, thrs;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto seed_start = Clock::now();
            simctl::ScenarioConfig cfg = simctl::load_scenario(doc);
            cfg.method = method;
            cfg.master_seed = seed;
            const simctl::RunArtifacts run = simctl::run_scenario(cfg);
            const nlohmann::json& tail = run.summary.at("tail");
            jfis.push_back(tail.at("jfi").get<double>());
            utils.push_back(tail.at("cue").at("utilized").get<double>());
            thrs.push_back(tail.at("avg_throughput_bps").get<double>());
            max_seed_s = std::max(max_seed_s, seconds_since(seed_start));
        }
        med[method] = {median5(jfis), median5(utils), median5(thrs)};
    }

    const TailStats& hm = med[simctl::Method::hermes];
    const TailStats& pf = med[simctl::Method::pf];
    const TailStats& dq = med[simctl::Method::dqsa];
    const double el = seconds_since(start);
    const bool in_budget = max_seed_s < 600.0;

    report(5, "fairness separation across methods",
           hm.jfi >= 0.90 && dq.jfi <= 0.65 && pf.jfi >= 0.90 && in_budget,
           "median tail JFI: shuffled " + fmt(hm.jfi) + " (>= 0.90), shuffle-free " +
               fmt(dq.jfi) + " (<= 0.65), scheduler " + fmt(pf.jfi) + " (>= 0.90)",
           el);
    report(6, "channel utilization of the shuffled learner", hm.utilized >= 0.75 && in_budget,
           "median tail utilized proportion " + fmt(hm.utilized) + " (>= 0.75)", 0.0);
    report(7, "throughput ordering across methods",
           pf.throughput >= hm.throughput && hm.throughput >= 1.5 * dq.throughput && in_budget,
           "median tail bps: scheduler " + fmt(pf.throughput, 0) + " >= shuffled " +
               fmt(hm.throughput, 0) + " >= 1.5 x shuffle-free (" + fmt(1.5 * dq.throughput, 0) +
               ")",
           0.0);
}

// ---------------------------------------------------------------- C8 ------

void criterion_8() {
    const auto start = Clock::now();
    const nlohmann::json doc = load_scenario_file("dynamic-addrbg-600f.json");
    // scenario layout: channel 2 activates at slot 2000 (frame 200), channel 1
    // deactivates at slot 4500; steady state sampled over frames [350, 450)
    const int added_action = 3, removed_action = 2;
    const std::int64_t activation_frame = 200, deadline_frame = 300, removal_slot = 4500;

    int ramps_ok = 0;
    bool removal_clean = true;
    std::string detail = "ramp frame per seed:";

    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        simctl::ScenarioConfig cfg = simctl::load_scenario(doc);
        cfg.master_seed = seed;
        const simctl::RunArtifacts run = simctl::run_scenario(cfg);

        std::map<std::int64_t, double> frame_bits;
        for (const env5g::SlotOutcome& out : run.outcomes) {
            for (const env5g::UeSlotRecord& r : out.ue_records) {
                if (r.action == added_action)
                    frame_bits[out.slot_index / 10] += static_cast<double>(r.transmitted_bits);
                if (r.action == removed_action && out.slot_index >= removal_slot &&
                    r.transmitted_bits > 0)
                    removal_clean = false;
            }
        }

        double steady = 0.0;
        for (std::int64_t f = 350; f < 450; ++f) steady += frame_bits[f];
        steady /= 100.0;

        auto smoothed = [&](std::int64_t f) {
            double s = 0.0;
            for (std::int64_t g = f; g < f + 10; ++g) s += frame_bits[g];
            return s / 10.0;
        };
        std::optional<std::int64_t> reached;
        for (std::int64_t f = activation_frame; f <= deadline_frame; ++f) {
            if (smoothed(f) >= 0.6 * steady) {
                reached = f;
                break;
            }
        }
        if (reached) ++ramps_ok;
        detail += reached ? " " + std::to_string(*reached) : " never";
    }

    const double el = seconds_since(start);
    report(8, "adaptation to channel arrival and departure", ramps_ok >= 3 && removal_clean,
           detail + "; " + std::to_string(ramps_ok) + "/5 within 100 frames; removed channel " +
               (removal_clean ? "carried zero bits afterwards" : "STILL CARRIED BITS"),
           el);
}

// ---------------------------------------------------------------- C9 ------

void criterion_9() {
    const auto start = Clock::now();
    nlohmann::json doc = load_scenario_file("10ue-3rbg-100f.json");
    doc["frames"] = 20;

    simctl::ScenarioConfig cfg = simctl::load_scenario(doc);
    const simctl::RunArtifacts first = simctl::run_scenario(cfg);
    const simctl::RunArtifacts second = simctl::run_scenario(cfg);
    const bool identical = simctl::timeseries_csv(first.outcomes) ==
                           simctl::timeseries_csv(second.outcomes);

    simctl::ScenarioConfig other = cfg;
    other.master_seed = cfg.master_seed + 1;
    simctl::Simulation sim_a(cfg), sim_b(other);
    int differing = 0;
    for (int u = 0; u < cfg.n_ues; ++u)
        if (nnet::to_bytes(sim_a.agent_for(u).model()) !=
            nnet::to_bytes(sim_b.agent_for(u).model()))
            ++differing;

    const double el = seconds_since(start);
    report(9, "bit-level determinism and seed sensitivity",
           identical && differing == cfg.n_ues,
           std::string(identical ? "reruns byte-identical" : "reruns DIVERGED") + "; " +
               std::to_string(differing) + "/" + std::to_string(cfg.n_ues) +
               " agents re-seeded with different weights",
           el);
}

// ---------------------------------------------------------------- C10 -----

void criterion_10() {
    const auto start = Clock::now();
    std::vector<std::string> broken;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok && std::find(broken.begin(), broken.end(), what) == broken.end())
            broken.push_back(what);
    };

    // normalization: idempotent and argmax-preserving
    for (std::uint64_t s = 1; s <= 30; ++s) {
        Stream ms = Stream::derived(s, "acceptance-norm");
        QNetworkModel m = nnet::random_model(6, 5, 4, ms);
        const QNetworkModel once = shuffle::normalize_model(m);
        const QNetworkModel twice = shuffle::normalize_model(once);
        expect((once.w2 - twice.w2).cwiseAbs().maxCoeff() < 1e-15 &&
                   (once.b2 - twice.b2).cwiseAbs().maxCoeff() < 1e-15,
               "normalization idempotence");
        Stream xs = Stream::derived(s, "acceptance-norm-probe");
        for (int trial = 0; trial < 10; ++trial) {
            Eigen::VectorXd x =
                Eigen::VectorXd::NullaryExpr(6, [&](Eigen::Index) { return xs.next_range(-2, 2); });
            const Eigen::VectorXd h = (m.w1 * x + m.b1).array().max(0.0).matrix();
            const Eigen::VectorXd qo = m.w2 * h + m.b2;
            const Eigen::VectorXd qn = once.w2 * h + once.b2;
            int ao = 0, an = 0;
            for (int a = 1; a < 4; ++a) {
                if (qo(a) > qo(ao)) ao = a;
                if (qn(a) > qn(an)) an = a;
            }
            expect(ao == an, "normalization argmax invariance");
        }
    }

    // model distance: pseudo-metric properties on its square root
    for (std::uint64_t s = 1; s <= 20; ++s) {
        Stream sa = Stream::derived(s, "acceptance-md-a");
        Stream sb = Stream::derived(s, "acceptance-md-b");
        Stream sc = Stream::derived(s, "acceptance-md-c");
        QNetworkModel a = nnet::random_model(5, 4, 3, sa);
        QNetworkModel b = nnet::random_model(5, 4, 3, sb);
        QNetworkModel c = nnet::random_model(5, 4, 3, sc);
        expect(shuffle::model_distance(a, a) == 0.0, "distance self-zero");
        expect(shuffle::model_distance(a, b) == shuffle::model_distance(b, a),
               "distance symmetry");
        expect(shuffle::model_distance(a, b) >= 0.0, "distance nonnegative");
        const double ab = std::sqrt(shuffle::model_distance(a, b));
        const double bc = std::sqrt(shuffle::model_distance(b, c));
        const double ac = std::sqrt(shuffle::model_distance(a, c));
        expect(ac <= ab + bc + 1e-12, "distance triangle inequality");
    }

    // shuffling: every round hands each uploaded model to exactly one UE
    {
        shuffle::MlaTable table(6);
        Stream seeds = Stream::derived(7, "acceptance-bijection");
        for (int round = 0; round < 10; ++round) {
            std::map<int, QNetworkModel> uploads;
            for (int u = 0; u < 6; ++u) {
                Stream ms = Stream::derived(seeds.next_u64(), "acceptance-bijection-model");
                uploads.emplace(u, nnet::random_model(9, 4, 4, ms));
            }
            const shuffle::ShuffleOutcome out =
                shuffle::shuffle_round(uploads, table, 1.0, shuffle::MatchStrategy::maximin);
            std::set<int> sources;
            expect(out.assigned.size() == 6, "shuffle bijection");
            for (const auto& [ue, src] : out.source_ue) {
                expect(uploads.count(ue) == 1 && sources.insert(src).second, "shuffle bijection");
            }
            expect(sources.size() == 6, "shuffle bijection");
        }
    }

    // utilization proportions partition exactly, on random traffic
    {
        std::vector<env5g::UeSpec> specs;
        for (int u = 0; u < 5; ++u) specs.push_back({400.0 + 50.0 * u, {{1, 700}}, true});
        env5g::Environment env(specs, 4);
        Stream cqi = Stream::derived(11, "acceptance-cue-cqi");
        Stream act = Stream::derived(11, "acceptance-cue-act");
        std::vector<env5g::SlotOutcome> window;
        for (std::int64_t s = 0; s < 300; ++s) {
            if (s % env5g::kCqiRefreshPeriodSlots == 0) env.cqi_tick(cqi);
            env.traffic_tick(s);
            std::vector<int> actions;
            for (int u = 0; u < 5; ++u) actions.push_back(act.next_int(1, 5));
            window.push_back(env.resolve_slot(s, actions));
            const metrics::CueBreakdown b = metrics::cue(window);
            expect(b.utilized + (b.collided + b.idle) == 1.0, "utilization partition");
            expect(b.utilized >= 0 && b.collided >= 0 && b.idle >= 0, "utilization partition");
        }

        // buffers: offered arrivals either transmit or stay queued, exactly
        for (int u = 0; u < 5; ++u) {
            expect(env.cumulative_offered_bits(u) ==
                       env.cumulative_transmitted_bits(u) + env.buffer_bits(u),
                   "buffer conservation");
        }
    }

    // fairness index: scale-free and bounded
    {
        Stream vs = Stream::derived(13, "acceptance-jfi");
        for (int trial = 0; trial < 50; ++trial) {
            const int n = vs.next_int(1, 11);
            std::vector<double> x, scaled;
            for (int i = 0; i < n; ++i) x.push_back(vs.next_range(0.1, 9.0));
            const double k = vs.next_range(0.5, 100.0);
            for (double v : x) scaled.push_back(k * v);
            const double j = metrics::jfi(x);
            expect(std::abs(j - metrics::jfi(scaled)) < 1e-12, "fairness scale invariance");
            expect(j > 0.0 && j <= 1.0 + 1e-15, "fairness bounds");
        }
    }

    // per-UE feedback is blind to non-conflicting peer choices
    {
        auto build = [] {
            std::vector<env5g::UeSpec> specs{{250.0, {{1, 300}}, true}, {750.0, {{1, 300}}, true}};
            env5g::Environment env(specs, 3);
            Stream rng = Stream::derived(17, "acceptance-isolation");
            env.cqi_tick(rng);
            env.traffic_tick(0);
            return env;
        };
        env5g::Environment a = build();
        env5g::Environment b = build();
        const env5g::SlotOutcome oa = a.resolve_slot(0, {1, 2});
        const env5g::SlotOutcome ob = b.resolve_slot(0, {1, 4});
        expect(oa.ue_records[0].success == ob.ue_records[0].success &&
                   oa.ue_records[0].transmitted_bits == ob.ue_records[0].transmitted_bits &&
                   oa.ue_records[0].achievable_rate_bits == ob.ue_records[0].achievable_rate_bits,
               "feedback isolation");
    }

    const double el = seconds_since(start);
    std::string detail = "normalization, distance, bijection, partition, buffers, fairness, "
                         "isolation all hold";
    if (!broken.empty()) {
        detail = "violated:";
        for (const std::string& b : broken) detail += " [" + b + "]";
    }
    report(10, "library invariant sweep", broken.empty(), detail, el);
}

}  // namespace

int main() {
    std::printf("acceptance gate: %s\n", HERMES_SCENARIO_DIR);
    try {
        criterion_1();
        criterion_2();
        criterion_3();
        criterion_4();
        criteria_5_6_7();
        criterion_8();
        criterion_9();
        criterion_10();
    } catch (const std::exception& e) {
        std::printf("aborted: %s\n", e.what());
        return 2;
    }
    std::printf("acceptance: %d/10 criteria passed\n", 10 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
