#pragma once

// Scenario configuration, named seed streams, and the master slot loop that
// ties the environment, the learning agents, the baselines and the shuffler
// together. Also owns the run artifacts: time-series CSV, summary JSON, and
// the resolved-config echo.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hermes/agent.hpp"
#include "hermes/baselines.hpp"
#include "hermes/env5g.hpp"
#include "hermes/rng.hpp"
#include "hermes/shuffle.hpp"

namespace hermes::simctl {

enum class Method { hermes, pf, dqsa };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

// one membership change, taking effect at the start of its slot
struct DynamicEvent {
    std::int64_t slot = 0;
    std::string kind;  // add_ue | remove_ue | add_rbg | remove_rbg
    int id = 0;
};

struct ScenarioConfig {
    int n_ues = 1;
    int m_rbgs = 1;  // channel count the models are sized for; the active set
                     // can start smaller and change through events
    int frames = 1;
    Method method = Method::hermes;
    std::uint64_t master_seed = 1;

    std::vector<double> distances_m;                             // per configured UE
    std::vector<std::vector<env5g::Application>> applications;   // per configured UE
    int initial_active_ues = -1;   // first k UEs start active (-1 = all)
    int initial_active_rbgs = -1;  // first k RBGs start active (-1 = all)

    // learner hyperparameters
    double epsilon = 0.05;
    double gamma = 0.95;
    double alpha = 1.0;
    int hidden_dim = 64;
    double lr = 0.01;
    int batch_size = 32;
    int steps_per_epoch = 4;
    int buffer_capacity = 500;
    int age_cap_slots = 50;

    // cadences, in slots
    int train_period_slots = 10;
    int shuffle_period_slots = 50;
    int shuffle_latency_slots = 0;

    // shuffler
    double lambda = 1.0;
    int num_shufflers = 1;
    shuffle::MatchStrategy strategy = shuffle::MatchStrategy::maximin;

    // pf baseline
    double pf_beta = 0.01;

    double coverage_radius_m = 1000.0;
    std::vector<DynamicEvent> events;  // sorted by slot after load
};

// Validates a JSON document against the schema above, fills defaults, expands
// the line-deployment shorthand, and rejects unknown keys by name.
ScenarioConfig load_scenario(const nlohmann::json& doc);

nlohmann::json resolved_config_json(const ScenarioConfig& cfg);

// Named stream derivation. Every random consumer in a run draws from its own
// keyed stream so that adding or removing one consumer never shifts another's
// sequence. Keys are part of the output-stability contract.
struct SharedStreams {
    rng::Stream env_cqi;
    rng::Stream env_traffic;  // reserved; traffic is currently periodic
    rng::Stream shuffler_partition;
};
SharedStreams seed_streams(std::uint64_t master_seed);
rng::Stream agent_init_stream(std::uint64_t master_seed, int ue, int rejoin = 0);
rng::Stream agent_eps_stream(std::uint64_t master_seed, int ue, int rejoin = 0);
rng::Stream agent_train_stream(std::uint64_t master_seed, int ue, int rejoin = 0);

struct ShuffleLogEntry {
    std::int64_t slot = 0;   // boundary slot the round ran at (end of slot)
    std::int64_t round = 0;  // shared round counter value used for scoring
    int shuffler_index = 0;
    std::vector<int> participants;
    double bottleneck = 0.0;
    double total = 0.0;
};

// The master loop. One advance_slot() call runs: membership events -> traffic
// -> periodic channel refresh -> observations/actions -> slot resolution ->
// end-of-slot training / shuffle / model deliveries.
class Simulation {
  public:
    explicit Simulation(ScenarioConfig cfg);

    void advance_slot();
    void run_to_end();
    bool finished() const { return slot_ >= total_slots(); }
    std::int64_t next_slot() const { return slot_; }
    std::int64_t total_slots() const;

    const ScenarioConfig& config() const { return cfg_; }
    const env5g::Environment& environment() const { return env_; }
    const std::vector<env5g::SlotOutcome>& outcomes() const { return outcomes_; }
    const std::vector<ShuffleLogEntry>& shuffle_log() const { return shuffle_log_; }
    bool has_agent(int ue) const;
    const agent::Agent& agent_for(int ue) const;
    std::int64_t x_max_bits() const { return x_max_; }

  private:
    void apply_events(std::int64_t slot);
    void spawn_agent(int ue);
    void end_of_slot(std::int64_t slot);
    void run_shuffle(std::int64_t slot);
    std::vector<int> pf_actions();
    std::vector<int> agent_actions();

    ScenarioConfig cfg_;
    env5g::Environment env_;
    rng::Stream cqi_stream_;
    rng::Stream partition_stream_;
    std::map<int, std::unique_ptr<agent::Agent>> agents_;  // active learners
    std::map<int, int> joins_seen_;                        // rejoin salt per UE
    std::map<int, agent::SlotFeedback> last_feedback_;
    shuffle::MlaTable mla_;
    std::optional<baselines::PfState> pf_;

    struct PendingDelivery {
        std::int64_t due_slot;
        int ue;
        nnet::QNetworkModel model;
    };
    std::vector<PendingDelivery> pending_deliveries_;

    std::vector<env5g::SlotOutcome> outcomes_;
    std::vector<ShuffleLogEntry> shuffle_log_;
    std::size_t next_event_ = 0;
    std::int64_t slot_ = 0;
    std::int64_t x_max_ = 0;
};

struct RunArtifacts {
    ScenarioConfig config;
    std::vector<env5g::SlotOutcome> outcomes;
    std::vector<ShuffleLogEntry> shuffle_log;
    std::int64_t x_max_bits = 0;
    nlohmann::json summary;
};

RunArtifacts run_scenario(const ScenarioConfig& cfg);

// window metrics + convergence + shuffle diagnostics
nlohmann::json build_summary(const ScenarioConfig& cfg,
                             const std::vector<env5g::SlotOutcome>& outcomes,
                             const std::vector<ShuffleLogEntry>& shuffle_log,
                             std::int64_t x_max_bits);

// Emits timeseries.csv, summary.json and config.resolved.json into out_dir
// (created if missing). I/O failures throw std::runtime_error.
void write_outputs(const RunArtifacts& artifacts, const std::string& out_dir);

// Recomputes the metric blocks of the summary from a written timeseries.csv.
nlohmann::json analyze_directory(const std::string& dir);

// CSV codec, exposed so tests can check the schema and round-trip exactly.
// One row per (slot, active UE); the last column packs all configured channel
// states into one string: u=utilized, c=collided, i=idle, x=inactive.
std::string timeseries_csv(const std::vector<env5g::SlotOutcome>& outcomes);
std::vector<env5g::SlotOutcome> parse_timeseries_csv(const std::string& text);

}  // namespace hermes::simctl
