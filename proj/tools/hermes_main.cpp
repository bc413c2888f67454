// Command-line front end: run a scenario to its artifact directory, recompute
// summary metrics from a written time series, or drive the matching library
// standalone on a preference matrix.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hermes/shuffle.hpp"
#include "hermes/simctl.hpp"

namespace {

using nlohmann::json;

json parse_json_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    return json::parse(f);  // throws with line/column context on bad input
}

int run_command(const std::string& config_path, const std::optional<std::uint64_t>& seed,
                const std::optional<int>& frames, const std::optional<std::string>& method,
                const std::string& out_dir) {
    json doc = parse_json_file(config_path);
    // overrides land in the document so they pass the same validation
    if (seed) doc["master_seed"] = *seed;
    if (frames) doc["frames"] = *frames;
    if (method) doc["method"] = *method;
    const hermes::simctl::ScenarioConfig cfg = hermes::simctl::load_scenario(doc);
    const hermes::simctl::RunArtifacts art = hermes::simctl::run_scenario(cfg);
    hermes::simctl::write_outputs(art, out_dir);
    json printed = art.summary;
    printed["out_dir"] = out_dir;
    std::cout << printed.dump(2) << "\n";
    return 0;
}

int analyze_command(const std::string& in_dir) {
    std::cout << hermes::simctl::analyze_directory(in_dir).dump(2) << "\n";
    return 0;
}

int match_command(const std::string& matrix_path, const std::string& strategy) {
    const json doc = parse_json_file(matrix_path);
    if (!doc.is_array() || doc.empty())
        throw std::runtime_error("matrix file must hold a non-empty JSON array of rows");
    const std::size_t n = doc.size();
    Eigen::MatrixXd e(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const json& row = doc.at(i);
        if (!row.is_array() || row.size() != n)
            throw std::runtime_error("matrix must be square; row " + std::to_string(i) +
                                     " has " + std::to_string(row.size()) + " entries");
        for (std::size_t j = 0; j < n; ++j) {
            if (!row.at(j).is_number())
                throw std::runtime_error("matrix entries must be numbers");
            e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                row.at(j).get<double>();
        }
    }
    const hermes::shuffle::Matching m = strategy == "km" ? hermes::shuffle::km_matching(e)
                                                         : hermes::shuffle::maximin_matching(e);
    json out;
    out["strategy"] = strategy;
    out["assign"] = m.assign;
    out["perfect"] = m.perfect;
    out["total"] = hermes::shuffle::matching_total(e, m);
    out["bottleneck"] = hermes::shuffle::matching_bottleneck(e, m);
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"decentralized dynamic spectrum access simulator"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "execute a scenario and write its artifacts");
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> frames;
    std::optional<std::string> method;
    std::string out_dir = "out";
    run->add_option("--config", config_path, "scenario JSON file")->required();
    run->add_option("--seed", seed, "override master_seed");
    run->add_option("--frames", frames, "override frames");
    run->add_option("--method", method, "override method: hermes, pf or dqsa");
    run->add_option("--out", out_dir, "artifact directory (default: out)");

    auto* analyze = app.add_subcommand("analyze", "recompute summary metrics from a time series");
    std::string in_dir;
    analyze->add_option("--in", in_dir, "artifact directory holding timeseries.csv")->required();

    auto* match = app.add_subcommand("match", "run one matching on a JSON preference matrix");
    std::string matrix_path;
    std::string strategy = "maximin";
    match->add_option("--matrix", matrix_path, "JSON file with a square numeric matrix")
        ->required();
    match->add_option("--strategy", strategy, "maximin or km")
        ->check(CLI::IsMember({"maximin", "km"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return run_command(config_path, seed, frames, method, out_dir);
        if (analyze->parsed()) return analyze_command(in_dir);
        return match_command(matrix_path, strategy);
    } catch (const std::exception& e) {
        const json err{{"error", {{"command", app.get_subcommands().front()->get_name()},
                                  {"message", e.what()}}}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
}
