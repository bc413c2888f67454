#include "hermes/simctl.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hermes/metrics.hpp"

namespace hermes::simctl {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) {
    throw std::invalid_argument("scenario: " + msg);
}

void check_keys(const json& obj, const char* where,
                std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* k : allowed) known = known || item.key() == k;
        if (!known) fail("unknown key \"" + item.key() + "\" in " + where);
    }
}

int int_field(const json& obj, const char* key, int dflt) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) fail(std::string(key) + " must be an integer");
    return v.get<int>();
}

int int_required(const json& obj, const char* key) {
    if (!obj.contains(key)) fail(std::string(key) + " is required");
    return int_field(obj, key, 0);
}

double num_field(const json& obj, const char* key, double dflt) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_number()) fail(std::string(key) + " must be a number");
    return v.get<double>();
}

std::string str_field(const json& obj, const char* key, const std::string& dflt) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_string()) fail(std::string(key) + " must be a string");
    return v.get<std::string>();
}

std::uint64_t seed_field(const json& obj, const char* key, std::uint64_t dflt) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    fail(std::string(key) + " must be a non-negative integer");
}

env5g::Application app_from_json(const json& a, const char* where) {
    if (!a.is_object()) fail(std::string("each application in ") + where + " must be an object");
    check_keys(a, where, {"packet_interval_slots", "packet_size_bytes"});
    env5g::Application app;
    app.packet_interval_slots = int_required(a, "packet_interval_slots");
    app.packet_size_bytes = int_required(a, "packet_size_bytes");
    if (app.packet_interval_slots < 1) fail("packet_interval_slots must be >= 1");
    if (app.packet_size_bytes < 1) fail("packet_size_bytes must be >= 1");
    return app;
}

const char* strategy_name(shuffle::MatchStrategy s) {
    return s == shuffle::MatchStrategy::maximin ? "maximin" : "km";
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::hermes: return "hermes";
        case Method::pf: return "pf";
        case Method::dqsa: return "dqsa";
    }
    throw std::logic_error("unreachable method");
}

Method method_from_name(const std::string& name) {
    if (name == "hermes") return Method::hermes;
    if (name == "pf") return Method::pf;
    if (name == "dqsa") return Method::dqsa;
    fail("method must be one of hermes, pf, dqsa (got \"" + name + "\")");
}

ScenarioConfig load_scenario(const json& doc) {
    if (!doc.is_object()) fail("document must be a JSON object");
    check_keys(doc, "scenario",
               {"n_ues", "m_rbgs", "frames", "method", "master_seed", "distances_m",
                "deployment", "applications", "initial_active_ues", "initial_active_rbgs",
                "epsilon", "gamma", "alpha", "hidden_dim", "lr", "batch_size",
                "steps_per_epoch", "buffer_capacity", "age_cap_slots", "train_period_slots",
                "shuffle_period_slots", "shuffle_latency_slots", "lambda", "num_shufflers",
                "strategy", "pf_beta", "coverage_radius_m", "events"});

    ScenarioConfig cfg;
    cfg.n_ues = int_required(doc, "n_ues");
    cfg.m_rbgs = int_required(doc, "m_rbgs");
    cfg.frames = int_required(doc, "frames");
    if (cfg.n_ues < 1) fail("n_ues must be >= 1");
    if (cfg.m_rbgs < 1) fail("m_rbgs must be >= 1");
    if (cfg.frames < 1) fail("frames must be >= 1");

    cfg.method = method_from_name(str_field(doc, "method", "hermes"));
    cfg.master_seed = seed_field(doc, "master_seed", 1);
    cfg.coverage_radius_m = num_field(doc, "coverage_radius_m", 1000.0);
    if (!(cfg.coverage_radius_m > 0)) fail("coverage_radius_m must be positive");

    // deployment: explicit list, the evenly-spaced-line shorthand, or every
    // UE at the anchor distance (the identical-channel default)
    if (doc.contains("distances_m") && doc.contains("deployment"))
        fail("give either distances_m or deployment, not both");
    if (doc.contains("distances_m")) {
        const json& d = doc.at("distances_m");
        if (!d.is_array() || static_cast<int>(d.size()) != cfg.n_ues)
            fail("distances_m must be an array with one entry per UE");
        for (const json& v : d) {
            if (!v.is_number()) fail("distances_m entries must be numbers");
            cfg.distances_m.push_back(v.get<double>());
        }
    } else if (doc.contains("deployment")) {
        const json& dep = doc.at("deployment");
        if (!dep.is_object()) fail("deployment must be an object");
        check_keys(dep, "deployment", {"interval_d", "anchor_m"});
        const double interval = num_field(dep, "interval_d", -1.0);
        const double anchor = num_field(dep, "anchor_m", -1.0);
        if (!dep.contains("interval_d") || !(interval > 0))
            fail("deployment.interval_d must be a positive number");
        if (!dep.contains("anchor_m") || !(anchor > 0))
            fail("deployment.anchor_m must be a positive number");
        // UEs in a line at the given spacing; the middle UE sits on the anchor
        const int mid = (cfg.n_ues - 1) / 2;
        for (int i = 0; i < cfg.n_ues; ++i)
            cfg.distances_m.push_back(anchor + (i - mid) * interval);
    } else {
        cfg.distances_m.assign(static_cast<std::size_t>(cfg.n_ues), 500.0);
    }
    for (double d : cfg.distances_m)
        if (!(d > 0) || d > cfg.coverage_radius_m)
            fail("every UE distance must lie in (0, coverage_radius_m]");

    // traffic: one shared application list, or one list per UE
    if (doc.contains("applications")) {
        const json& apps = doc.at("applications");
        if (!apps.is_array()) fail("applications must be an array");
        const bool per_ue = !apps.empty() && apps.front().is_array();
        if (per_ue) {
            if (static_cast<int>(apps.size()) != cfg.n_ues)
                fail("per-UE applications must have one list per UE");
            for (const json& list : apps) {
                if (!list.is_array()) fail("applications lists must all be arrays");
                std::vector<env5g::Application> ue_apps;
                for (const json& a : list) ue_apps.push_back(app_from_json(a, "applications"));
                cfg.applications.push_back(std::move(ue_apps));
            }
        } else {
            std::vector<env5g::Application> shared;
            for (const json& a : apps) shared.push_back(app_from_json(a, "applications"));
            cfg.applications.assign(static_cast<std::size_t>(cfg.n_ues), shared);
        }
    } else {
        // saturating default: one 800-byte packet per slot exceeds the best
        // achievable per-slot rate, so buffers never run dry
        const std::vector<env5g::Application> shared{{1, 800}};
        cfg.applications.assign(static_cast<std::size_t>(cfg.n_ues), shared);
    }

    cfg.initial_active_ues = int_field(doc, "initial_active_ues", cfg.n_ues);
    cfg.initial_active_rbgs = int_field(doc, "initial_active_rbgs", cfg.m_rbgs);
    if (cfg.initial_active_ues < 0 || cfg.initial_active_ues > cfg.n_ues)
        fail("initial_active_ues must lie in [0, n_ues]");
    if (cfg.initial_active_rbgs < 0 || cfg.initial_active_rbgs > cfg.m_rbgs)
        fail("initial_active_rbgs must lie in [0, m_rbgs]");

    cfg.epsilon = num_field(doc, "epsilon", 0.05);
    cfg.gamma = num_field(doc, "gamma", 0.95);
    cfg.alpha = num_field(doc, "alpha", 1.0);
    cfg.hidden_dim = int_field(doc, "hidden_dim", 64);
    cfg.lr = num_field(doc, "lr", 0.01);
    cfg.batch_size = int_field(doc, "batch_size", 32);
    cfg.steps_per_epoch = int_field(doc, "steps_per_epoch", 4);
    cfg.buffer_capacity = int_field(doc, "buffer_capacity", 500);
    cfg.age_cap_slots = int_field(doc, "age_cap_slots", 50);
    if (cfg.epsilon < 0 || cfg.epsilon > 1) fail("epsilon must lie in [0, 1]");
    if (cfg.gamma < 0 || cfg.gamma >= 1) fail("gamma must lie in [0, 1)");
    if (cfg.alpha < 0) fail("alpha must be >= 0");
    if (cfg.hidden_dim < 1) fail("hidden_dim must be >= 1");
    if (!(cfg.lr > 0)) fail("lr must be positive");
    if (cfg.batch_size < 1) fail("batch_size must be >= 1");
    if (cfg.steps_per_epoch < 1) fail("steps_per_epoch must be >= 1");
    if (cfg.buffer_capacity < cfg.batch_size)
        fail("buffer_capacity must be >= batch_size");
    if (cfg.age_cap_slots < 1) fail("age_cap_slots must be >= 1");

    cfg.train_period_slots = int_field(doc, "train_period_slots", 10);
    cfg.shuffle_period_slots = int_field(doc, "shuffle_period_slots", 50);
    cfg.shuffle_latency_slots = int_field(doc, "shuffle_latency_slots", 0);
    if (cfg.train_period_slots < 1) fail("train_period_slots must be >= 1");
    if (cfg.shuffle_period_slots < 1) fail("shuffle_period_slots must be >= 1");
    if (cfg.shuffle_latency_slots < 0 || cfg.shuffle_latency_slots >= cfg.shuffle_period_slots)
        fail("shuffle_latency_slots must lie in [0, shuffle_period_slots)");

    cfg.lambda = num_field(doc, "lambda", 1.0);
    cfg.num_shufflers = int_field(doc, "num_shufflers", 1);
    if (cfg.lambda < 0) fail("lambda must be >= 0");
    if (cfg.num_shufflers < 1) fail("num_shufflers must be >= 1");
    const std::string strat = str_field(doc, "strategy", "maximin");
    if (strat == "maximin") cfg.strategy = shuffle::MatchStrategy::maximin;
    else if (strat == "km") cfg.strategy = shuffle::MatchStrategy::km;
    else fail("strategy must be maximin or km (got \"" + strat + "\")");

    cfg.pf_beta = num_field(doc, "pf_beta", 0.01);
    if (!(cfg.pf_beta > 0) || cfg.pf_beta > 1) fail("pf_beta must lie in (0, 1]");

    if (doc.contains("events")) {
        const json& events = doc.at("events");
        if (!events.is_array()) fail("events must be an array");
        for (const json& e : events) {
            if (!e.is_object()) fail("each event must be an object");
            check_keys(e, "events", {"slot", "kind", "id"});
            DynamicEvent ev;
            ev.slot = int_required(e, "slot");
            ev.kind = str_field(e, "kind", "");
            ev.id = int_required(e, "id");
            if (!e.contains("kind")) fail("event kind is required");
            const std::int64_t horizon =
                static_cast<std::int64_t>(cfg.frames) * env5g::kSlotsPerFrame;
            if (ev.slot < 0 || ev.slot >= horizon)
                fail("event slot " + std::to_string(ev.slot) + " is outside the run horizon");
            const bool ue_kind = ev.kind == "add_ue" || ev.kind == "remove_ue";
            const bool rbg_kind = ev.kind == "add_rbg" || ev.kind == "remove_rbg";
            if (!ue_kind && !rbg_kind)
                fail("event kind must be add_ue, remove_ue, add_rbg or remove_rbg (got \"" +
                     ev.kind + "\")");
            if (ue_kind && (ev.id < 0 || ev.id >= cfg.n_ues))
                fail("event id " + std::to_string(ev.id) + " is not a configured UE");
            if (rbg_kind && (ev.id < 0 || ev.id >= cfg.m_rbgs))
                fail("event id " + std::to_string(ev.id) + " is not a configured RBG");
            cfg.events.push_back(std::move(ev));
        }
    }
    std::stable_sort(cfg.events.begin(), cfg.events.end(),
                     [](const DynamicEvent& a, const DynamicEvent& b) { return a.slot < b.slot; });

    // replay the membership timeline so impossible toggles fail at load time
    std::vector<bool> ue_on(static_cast<std::size_t>(cfg.n_ues));
    std::vector<bool> rbg_on(static_cast<std::size_t>(cfg.m_rbgs));
    for (int u = 0; u < cfg.n_ues; ++u) ue_on[u] = u < cfg.initial_active_ues;
    for (int r = 0; r < cfg.m_rbgs; ++r) rbg_on[r] = r < cfg.initial_active_rbgs;
    for (const DynamicEvent& ev : cfg.events) {
        std::vector<bool>& flags = ev.kind == "add_ue" || ev.kind == "remove_ue" ? ue_on : rbg_on;
        const bool adding = ev.kind == "add_ue" || ev.kind == "add_rbg";
        if (flags[static_cast<std::size_t>(ev.id)] == adding)
            fail("event " + ev.kind + " id " + std::to_string(ev.id) + " at slot " +
                 std::to_string(ev.slot) + (adding ? " targets an already active"
                                                   : " targets an already inactive") +
                 (ev.kind.ends_with("ue") ? " UE" : " RBG"));
        flags[static_cast<std::size_t>(ev.id)] = adding;
    }

    return cfg;
}

json resolved_config_json(const ScenarioConfig& cfg) {
    json apps = json::array();
    for (const auto& list : cfg.applications) {
        json ue_apps = json::array();
        for (const env5g::Application& a : list)
            ue_apps.push_back({{"packet_interval_slots", a.packet_interval_slots},
                               {"packet_size_bytes", a.packet_size_bytes}});
        apps.push_back(std::move(ue_apps));
    }
    json events = json::array();
    for (const DynamicEvent& e : cfg.events)
        events.push_back({{"slot", e.slot}, {"kind", e.kind}, {"id", e.id}});
    return json{{"n_ues", cfg.n_ues},
                {"m_rbgs", cfg.m_rbgs},
                {"frames", cfg.frames},
                {"method", method_name(cfg.method)},
                {"master_seed", cfg.master_seed},
                {"distances_m", cfg.distances_m},
                {"applications", std::move(apps)},
                {"initial_active_ues", cfg.initial_active_ues},
                {"initial_active_rbgs", cfg.initial_active_rbgs},
                {"epsilon", cfg.epsilon},
                {"gamma", cfg.gamma},
                {"alpha", cfg.alpha},
                {"hidden_dim", cfg.hidden_dim},
                {"lr", cfg.lr},
                {"batch_size", cfg.batch_size},
                {"steps_per_epoch", cfg.steps_per_epoch},
                {"buffer_capacity", cfg.buffer_capacity},
                {"age_cap_slots", cfg.age_cap_slots},
                {"train_period_slots", cfg.train_period_slots},
                {"shuffle_period_slots", cfg.shuffle_period_slots},
                {"shuffle_latency_slots", cfg.shuffle_latency_slots},
                {"lambda", cfg.lambda},
                {"num_shufflers", cfg.num_shufflers},
                {"strategy", strategy_name(cfg.strategy)},
                {"pf_beta", cfg.pf_beta},
                {"coverage_radius_m", cfg.coverage_radius_m},
                {"events", std::move(events)}};
}

SharedStreams seed_streams(std::uint64_t master_seed) {
    SharedStreams s;
    s.env_cqi = rng::Stream::derived(master_seed, "env-cqi");
    s.env_traffic = rng::Stream::derived(master_seed, "env-traffic");
    s.shuffler_partition = rng::Stream::derived(master_seed, "shuffler-partition");
    return s;
}

namespace {
rng::Stream agent_stream(std::uint64_t master, const char* role, int ue, int rejoin) {
    std::string key = std::string("agent-") + role + ":" + std::to_string(ue);
    // a UE that left and came back is a new participant with a fresh lineage
    if (rejoin > 0) key += ":rejoin" + std::to_string(rejoin);
    return rng::Stream::derived(master, key);
}
}  // namespace

rng::Stream agent_init_stream(std::uint64_t master_seed, int ue, int rejoin) {
    return agent_stream(master_seed, "init", ue, rejoin);
}
rng::Stream agent_eps_stream(std::uint64_t master_seed, int ue, int rejoin) {
    return agent_stream(master_seed, "eps", ue, rejoin);
}
rng::Stream agent_train_stream(std::uint64_t master_seed, int ue, int rejoin) {
    return agent_stream(master_seed, "train", ue, rejoin);
}

namespace {
std::vector<env5g::UeSpec> build_specs(const ScenarioConfig& cfg) {
    std::vector<env5g::UeSpec> specs;
    for (int u = 0; u < cfg.n_ues; ++u) {
        env5g::UeSpec spec;
        spec.distance_m = cfg.distances_m[static_cast<std::size_t>(u)];
        spec.applications = cfg.applications[static_cast<std::size_t>(u)];
        spec.initially_active = u < cfg.initial_active_ues;
        specs.push_back(std::move(spec));
    }
    return specs;
}
}  // namespace

Simulation::Simulation(ScenarioConfig cfg)
    : cfg_(std::move(cfg)),
      env_(build_specs(cfg_), cfg_.m_rbgs, cfg_.coverage_radius_m),
      cqi_stream_(rng::Stream::derived(cfg_.master_seed, "env-cqi")),
      partition_stream_(rng::Stream::derived(cfg_.master_seed, "shuffler-partition")),
      mla_(cfg_.n_ues) {
    for (int r = cfg_.initial_active_rbgs; r < cfg_.m_rbgs; ++r) env_.remove_rbg(r);
    x_max_ = env_.max_rate_bits();
    if (cfg_.method == Method::pf) {
        pf_ = baselines::make_pf_state(cfg_.n_ues, 1.0, cfg_.pf_beta, 1);
    } else {
        for (int u = 0; u < cfg_.initial_active_ues; ++u) spawn_agent(u);
    }
}

std::int64_t Simulation::total_slots() const {
    return static_cast<std::int64_t>(cfg_.frames) * env5g::kSlotsPerFrame;
}

bool Simulation::has_agent(int ue) const { return agents_.count(ue) > 0; }

const agent::Agent& Simulation::agent_for(int ue) const {
    const auto it = agents_.find(ue);
    if (it == agents_.end())
        throw std::invalid_argument("no agent for UE " + std::to_string(ue));
    return *it->second;
}

void Simulation::spawn_agent(int ue) {
    agent::AgentConfig ac;
    ac.m_rbgs = cfg_.m_rbgs;
    ac.hidden_dim = cfg_.hidden_dim;
    ac.epsilon = cfg_.epsilon;
    ac.gamma = cfg_.gamma;
    ac.alpha = cfg_.alpha;
    ac.lr = cfg_.lr;
    ac.batch_size = cfg_.batch_size;
    ac.steps_per_epoch = cfg_.steps_per_epoch;
    ac.buffer_capacity = cfg_.buffer_capacity;
    ac.x_max = x_max_;
    ac.age_cap_slots = cfg_.age_cap_slots;
    ac.reward_kind = cfg_.method == Method::dqsa ? agent::RewardKind::non_punishing
                                                 : agent::RewardKind::punishing;
    const int rejoin = joins_seen_[ue]++;
    agents_[ue] = std::make_unique<agent::Agent>(
        ue, ac, agent_init_stream(cfg_.master_seed, ue, rejoin),
        agent_eps_stream(cfg_.master_seed, ue, rejoin),
        agent_train_stream(cfg_.master_seed, ue, rejoin));
    last_feedback_.erase(ue);
}

void Simulation::apply_events(std::int64_t slot) {
    while (next_event_ < cfg_.events.size() && cfg_.events[next_event_].slot == slot) {
        const DynamicEvent& ev = cfg_.events[next_event_++];
        if (ev.kind == "add_ue") {
            env_.add_ue(ev.id);
            if (cfg_.method != Method::pf) spawn_agent(ev.id);
        } else if (ev.kind == "remove_ue") {
            env_.remove_ue(ev.id);
            agents_.erase(ev.id);
            last_feedback_.erase(ev.id);
            std::erase_if(pending_deliveries_,
                          [&](const PendingDelivery& d) { return d.ue == ev.id; });
        } else if (ev.kind == "add_rbg") {
            env_.add_rbg(ev.id);
        } else {
            env_.remove_rbg(ev.id);
        }
    }
}

std::vector<int> Simulation::agent_actions() {
    std::vector<int> actions(static_cast<std::size_t>(cfg_.n_ues), 0);
    for (auto& [ue, ag] : agents_) {
        std::optional<agent::SlotFeedback> fb;
        if (const auto it = last_feedback_.find(ue); it != last_feedback_.end()) fb = it->second;
        actions[static_cast<std::size_t>(ue)] =
            ag->step(env_.rates_for_ue(ue), env_.buffer_bits(ue), fb);
    }
    return actions;
}

std::vector<int> Simulation::pf_actions() {
    std::vector<std::vector<std::int64_t>> rates(static_cast<std::size_t>(cfg_.n_ues));
    std::vector<std::int64_t> buffers(static_cast<std::size_t>(cfg_.n_ues), 0);
    std::vector<bool> ue_on(static_cast<std::size_t>(cfg_.n_ues));
    std::vector<bool> rbg_on(static_cast<std::size_t>(cfg_.m_rbgs));
    for (int u = 0; u < cfg_.n_ues; ++u) {
        rates[u] = env_.rates_for_ue(u);
        buffers[u] = env_.buffer_bits(u);
        ue_on[u] = env_.ue_active(u);
    }
    for (int r = 0; r < cfg_.m_rbgs; ++r) rbg_on[r] = env_.rbg_active(r);
    const std::vector<int> alloc = baselines::pf_schedule(rates, buffers, ue_on, rbg_on, *pf_);
    std::vector<int> actions(static_cast<std::size_t>(cfg_.n_ues), 0);
    for (int u = 0; u < cfg_.n_ues; ++u)
        if (ue_on[u]) actions[u] = cfg_.m_rbgs + 1;  // silent unless allocated below
    for (int r = 0; r < cfg_.m_rbgs; ++r)
        if (alloc[r] >= 0) actions[static_cast<std::size_t>(alloc[r])] = r + 1;
    return actions;
}

void Simulation::advance_slot() {
    if (finished()) throw std::logic_error("simulation already finished");
    const std::int64_t s = slot_;
    apply_events(s);
    env_.traffic_tick(s);
    if (s % env5g::kCqiRefreshPeriodSlots == 0) env_.cqi_tick(cqi_stream_);
    const std::vector<int> actions =
        cfg_.method == Method::pf ? pf_actions() : agent_actions();
    env5g::SlotOutcome outcome = env_.resolve_slot(s, actions);
    for (const env5g::UeSlotRecord& rec : outcome.ue_records)
        last_feedback_[rec.ue_id] = {rec.success, rec.achievable_rate_bits};
    if (cfg_.method == Method::pf) {
        std::vector<std::int64_t> served(static_cast<std::size_t>(cfg_.n_ues), 0);
        std::vector<bool> ue_on(static_cast<std::size_t>(cfg_.n_ues));
        for (int u = 0; u < cfg_.n_ues; ++u) ue_on[u] = env_.ue_active(u);
        for (const env5g::UeSlotRecord& rec : outcome.ue_records)
            served[static_cast<std::size_t>(rec.ue_id)] = rec.transmitted_bits;
        baselines::pf_update(*pf_, served, ue_on);
    }
    outcomes_.push_back(std::move(outcome));
    end_of_slot(s);
    ++slot_;
}

void Simulation::end_of_slot(std::int64_t s) {
    if (cfg_.method != Method::pf && (s + 1) % cfg_.train_period_slots == 0)
        for (auto& [ue, ag] : agents_) ag->train_epoch();
    if (cfg_.method == Method::hermes && (s + 1) % cfg_.shuffle_period_slots == 0)
        run_shuffle(s);
    for (auto it = pending_deliveries_.begin(); it != pending_deliveries_.end();) {
        if (it->due_slot <= s) {
            if (const auto ag = agents_.find(it->ue); ag != agents_.end())
                ag->second->receive_model(it->model);
            it = pending_deliveries_.erase(it);
        } else {
            ++it;
        }
    }
}

void Simulation::run_shuffle(std::int64_t s) {
    std::vector<int> ues;
    for (const auto& [ue, ag] : agents_) ues.push_back(ue);
    if (ues.empty()) return;
    std::map<int, nnet::QNetworkModel> uploads;
    for (int ue : ues) uploads[ue] = agents_.at(ue)->upload_model();
    std::vector<std::vector<int>> groups;
    if (cfg_.num_shufflers <= 1) {
        groups.push_back(ues);
    } else {
        const int k = std::min(cfg_.num_shufflers, static_cast<int>(ues.size()));
        groups = shuffle::partition_ues(ues, k, partition_stream_);
    }
    // all subsets score against the same round, then the clock ticks once
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        std::map<int, nnet::QNetworkModel> part;
        for (int ue : groups[gi]) part[ue] = uploads.at(ue);
        const shuffle::ShuffleOutcome out =
            shuffle::shuffle_round(part, mla_, cfg_.lambda, cfg_.strategy, false);
        ShuffleLogEntry entry;
        entry.slot = s;
        entry.round = out.round;
        entry.shuffler_index = static_cast<int>(gi);
        entry.participants = groups[gi];
        entry.bottleneck = out.bottleneck;
        entry.total = out.total;
        shuffle_log_.push_back(std::move(entry));
        for (const auto& [ue, model] : out.assigned)
            pending_deliveries_.push_back({s + cfg_.shuffle_latency_slots, ue, model});
    }
    mla_.advance_round();
}

void Simulation::run_to_end() {
    while (!finished()) advance_slot();
}

RunArtifacts run_scenario(const ScenarioConfig& cfg) {
    Simulation sim(cfg);
    sim.run_to_end();
    RunArtifacts art;
    art.config = sim.config();
    art.outcomes = sim.outcomes();
    art.shuffle_log = sim.shuffle_log();
    art.x_max_bits = sim.x_max_bits();
    art.summary = build_summary(art.config, art.outcomes, art.shuffle_log, art.x_max_bits);
    return art;
}

namespace {

// cue / throughput / fairness / per-UE bits over one window of slots
json window_metrics(const std::vector<env5g::SlotOutcome>& window) {
    json block;
    try {
        const metrics::CueBreakdown b = metrics::cue(window);
        block["cue"] = {{"utilized", b.utilized}, {"collided", b.collided}, {"idle", b.idle}};
    } catch (const std::invalid_argument&) {
        block["cue"] = nullptr;  // no active channel-slots in the window
    }
    const double duration_s = static_cast<double>(window.size()) / 1000.0;  // 1 ms slots
    block["avg_throughput_bps"] =
        window.empty() ? 0.0 : metrics::avg_throughput_bps(window, duration_s);
    const std::map<int, std::int64_t> bits = metrics::per_ue_bits(window);
    json per_ue = json::object();
    std::vector<double> xs;
    bool any_positive = false;
    for (const auto& [ue, b] : bits) {
        per_ue[std::to_string(ue)] = b;
        xs.push_back(static_cast<double>(b));
        any_positive = any_positive || b > 0;
    }
    block["per_ue_bits"] = std::move(per_ue);
    block["jfi"] = any_positive ? json(metrics::jfi(xs)) : json(nullptr);
    return block;
}

}  // namespace

json build_summary(const ScenarioConfig& cfg, const std::vector<env5g::SlotOutcome>& outcomes,
                   const std::vector<ShuffleLogEntry>& shuffle_log, std::int64_t x_max_bits) {
    json s;
    s["method"] = method_name(cfg.method);
    s["master_seed"] = cfg.master_seed;
    s["frames"] = cfg.frames;
    s["slots"] = outcomes.size();
    s["n_ues"] = cfg.n_ues;
    s["m_rbgs"] = cfg.m_rbgs;
    s["x_max_bits_per_slot"] = x_max_bits;
    const std::optional<std::int64_t> conv = metrics::convergence_slot(outcomes);
    s["convergence_slot"] = conv ? json(*conv) : json(nullptr);
    s["full_run"] = window_metrics(outcomes);
    const int tail_frames = std::min(cfg.frames, 100);
    const std::size_t tail_slots =
        static_cast<std::size_t>(tail_frames) * env5g::kSlotsPerFrame;
    const std::vector<env5g::SlotOutcome> tail(outcomes.end() - tail_slots, outcomes.end());
    s["tail"] = window_metrics(tail);
    s["tail"]["frames"] = tail_frames;
    json shuffles = json::array();
    for (const ShuffleLogEntry& e : shuffle_log)
        shuffles.push_back({{"slot", e.slot},
                            {"round", e.round},
                            {"shuffler", e.shuffler_index},
                            {"participants", e.participants},
                            {"bottleneck", e.bottleneck},
                            {"total", e.total}});
    s["shuffles"] = std::move(shuffles);
    return s;
}

namespace {

constexpr const char* kCsvHeader = "slot,ue_id,action,success,bits,rbg_statuses";

char status_char(env5g::RbgStatus st, bool active) {
    if (!active) return 'x';
    switch (st) {
        case env5g::RbgStatus::idle: return 'i';
        case env5g::RbgStatus::utilized: return 'u';
        case env5g::RbgStatus::collided: return 'c';
    }
    return '?';
}

}  // namespace

std::string timeseries_csv(const std::vector<env5g::SlotOutcome>& outcomes) {
    std::string out = kCsvHeader;
    out += '\n';
    for (const env5g::SlotOutcome& o : outcomes) {
        std::string statuses;
        for (std::size_t r = 0; r < o.rbg_status.size(); ++r)
            statuses.push_back(status_char(o.rbg_status[r], o.rbg_active[r]));
        for (const env5g::UeSlotRecord& rec : o.ue_records) {
            out += std::to_string(o.slot_index);
            out += ',';
            out += std::to_string(rec.ue_id);
            out += ',';
            out += std::to_string(rec.action);
            out += ',';
            out += rec.success ? '1' : '0';
            out += ',';
            out += std::to_string(rec.transmitted_bits);
            out += ',';
            out += statuses;
            out += '\n';
        }
    }
    return out;
}

std::vector<env5g::SlotOutcome> parse_timeseries_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader)
        throw std::invalid_argument("timeseries: missing or unexpected header row");
    std::vector<env5g::SlotOutcome> outcomes;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::array<std::string, 6> field;
        std::size_t start = 0;
        for (int f = 0; f < 6; ++f) {
            const std::size_t comma = line.find(',', start);
            if (f < 5 && comma == std::string::npos)
                throw std::invalid_argument("timeseries: malformed row at line " +
                                            std::to_string(line_no));
            field[f] = line.substr(start, comma == std::string::npos ? comma : comma - start);
            start = comma + 1;
        }
        const std::int64_t slot = std::stoll(field[0]);
        env5g::UeSlotRecord rec;
        rec.ue_id = std::stoi(field[1]);
        rec.action = std::stoi(field[2]);
        rec.success = field[3] == "1";
        rec.transmitted_bits = std::stoll(field[4]);
        if (outcomes.empty() || outcomes.back().slot_index != slot) {
            env5g::SlotOutcome o;
            o.slot_index = slot;
            for (char c : field[5]) {
                switch (c) {
                    case 'x': o.rbg_status.push_back(env5g::RbgStatus::idle); break;
                    case 'i': o.rbg_status.push_back(env5g::RbgStatus::idle); break;
                    case 'u': o.rbg_status.push_back(env5g::RbgStatus::utilized); break;
                    case 'c': o.rbg_status.push_back(env5g::RbgStatus::collided); break;
                    default:
                        throw std::invalid_argument("timeseries: unknown channel state '" +
                                                    std::string(1, c) + "' at line " +
                                                    std::to_string(line_no));
                }
                o.rbg_active.push_back(c != 'x');
            }
            outcomes.push_back(std::move(o));
        }
        outcomes.back().ue_records.push_back(rec);
    }
    return outcomes;
}

void write_outputs(const RunArtifacts& artifacts, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw std::runtime_error("cannot create output directory " + out_dir + ": " +
                                 ec.message());
    const auto write_file = [&](const char* name, const std::string& content) {
        const fs::path path = fs::path(out_dir) / name;
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
        f << content;
        f.flush();
        if (!f) throw std::runtime_error("write failed for " + path.string());
    };
    write_file("timeseries.csv", timeseries_csv(artifacts.outcomes));
    write_file("summary.json", artifacts.summary.dump(2) + "\n");
    write_file("config.resolved.json", resolved_config_json(artifacts.config).dump(2) + "\n");
}

json analyze_directory(const std::string& dir) {
    const std::filesystem::path path = std::filesystem::path(dir) / "timeseries.csv";
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << f.rdbuf();
    const std::vector<env5g::SlotOutcome> outcomes = parse_timeseries_csv(buf.str());
    json s;
    s["slots"] = outcomes.size();
    const std::optional<std::int64_t> conv = metrics::convergence_slot(outcomes);
    s["convergence_slot"] = conv ? json(*conv) : json(nullptr);
    s["full_run"] = window_metrics(outcomes);
    const std::size_t tail_slots =
        std::min<std::size_t>(outcomes.size(), 100 * env5g::kSlotsPerFrame);
    const std::vector<env5g::SlotOutcome> tail(outcomes.end() - tail_slots, outcomes.end());
    s["tail"] = window_metrics(tail);
    s["tail"]["frames"] = tail_slots / env5g::kSlotsPerFrame;
    return s;
}

}  // namespace hermes::simctl
