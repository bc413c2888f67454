#pragma once

// Model shuffler: zero-mean normalization of the decision layer, pairwise
// model distances, last-appearance bookkeeping, preference scoring, and the
// bottleneck-optimal (or max-sum) assignment that redistributes uploaded
// models among UEs.

#include <cstdint>
#include <map>
#include <vector>

#include "hermes/qnet.hpp"
#include "hermes/rng.hpp"

namespace hermes::shuffle {

enum class MatchStrategy { maximin, km };

struct Matching {
    std::vector<int> assign;  // row i matched to column assign[i]; -1 unmatched
    int size = 0;             // matched pair count
    bool perfect = false;
};

// Copy with each column of the last layer's weight matrix shifted to zero
// mean, and the whole bias vector shifted by its scalar mean. Earlier layers
// are untouched. Shifting every action value by a constant cannot change the
// argmax, so the policy is preserved.
nnet::QNetworkModel normalize_model(const nnet::QNetworkModel& model);

// Squared Euclidean distance between the two normalized decision layers,
// divided by the entry count of (W2, b2) so the scale is architecture-free.
double model_distance(const nnet::QNetworkModel& a, const nnet::QNetworkModel& b);

// Tracks, per (UE, model lineage), the shuffle round in which that model was
// last assigned to that UE (-1 = never).
class MlaTable {
  public:
    explicit MlaTable(int n_ues);

    int size() const { return static_cast<int>(last_.size()); }
    std::int64_t current_round() const { return round_; }
    std::int64_t last_assigned(int ue, int model) const;

    // score = current_round - last_assigned; never-assigned scores one higher
    // than anything seen (current_round + 1)
    double score(int ue, int model) const;
    Eigen::MatrixXd scores(const std::vector<int>& participants) const;

    void record_assignment(int ue, int model);
    void advance_round() { ++round_; }

  private:
    std::vector<std::vector<std::int64_t>> last_;
    std::int64_t round_ = 0;
};

// E = E_mla - lambda * E_md over the participants' uploaded models
Eigen::MatrixXd preference_matrix(const std::vector<nnet::QNetworkModel>& models,
                                  const Eigen::MatrixXd& mla_scores, double lambda);

// Maximum-cardinality matching on a 0/1 adjacency matrix via augmenting
// paths in row-major order (deterministic).
Matching max_bipartite_matching(const std::vector<std::vector<bool>>& adjacency);

// Perfect matching maximizing the summed weight (Kuhn-Munkres potentials).
Matching km_matching(const Eigen::MatrixXd& e);

// Perfect matching maximizing the minimum matched weight: discrete threshold
// search over the sorted distinct entries, feasibility-checked with
// max_bipartite_matching.
Matching maximin_matching(const Eigen::MatrixXd& e);

double matching_total(const Eigen::MatrixXd& e, const Matching& m);
double matching_bottleneck(const Eigen::MatrixXd& e, const Matching& m);

struct ShuffleOutcome {
    std::map<int, nnet::QNetworkModel> assigned;  // ue -> model to install
    std::map<int, int> source_ue;                 // ue -> uploader of that model
    std::int64_t round = 0;                       // round index the scores used
    double bottleneck = 0.0;
    double total = 0.0;
};

// One redistribution round over the uploading UEs: score preferences, match,
// record assignments. The round advances afterwards unless the caller runs
// several shufflers against one table at the same boundary, in which case it
// advances the round itself once all subsets are done.
ShuffleOutcome shuffle_round(const std::map<int, nnet::QNetworkModel>& uploads, MlaTable& table,
                             double lambda, MatchStrategy strategy, bool advance_round = true);

// Random near-equal partition of the UE list, redrawn per call; subset sizes
// differ by at most one.
std::vector<std::vector<int>> partition_ues(const std::vector<int>& ues, int num_shufflers,
                                            rng::Stream& rng);

}  // namespace hermes::shuffle
