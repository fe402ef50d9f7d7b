#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "garag/corpus.hpp"
#include "garag/objective.hpp"
#include "garag/perturb.hpp"
#include "garag/scoring.hpp"

namespace garag::engine {

/// Attack hyperparameters. The defaults are the standard configuration:
/// 25 iterations, 10 parent pairs, population 25, rates 0.2/0.2/0.4.
struct AttackConfig {
  int n_iter = 25;
  int n_parents = 10;
  int population_size = 25;
  double pr_per = 0.2;
  double pr_cross = 0.2;
  double pr_mut = 0.4;
  std::uint64_t seed = 0;
  perturb::OperatorSet ops = perturb::OperatorSet::defaults();

  void validate() const;  // throws ConfigError
};

struct TraceRow {
  int generation = 0;
  double min_rsr = 0.0;
  double min_gpr = 0.0;
  std::size_t front_size = 0;
};

/// Per-generation snapshot handed to observers: survivors of the previous
/// generation, the mutated offspring, and the evaluated merged pool.
/// Generation 0 carries only the initial population.
struct PopulationState {
  int generation = 0;
  const std::vector<perturb::Candidate>& members;
  const std::vector<perturb::Candidate>& offspring;
  const std::vector<perturb::Candidate>& merged;
};

using GenerationObserver = std::function<void(const PopulationState&)>;

/// Result of one attack run. `success` implies both retrieval_success and
/// generation_flipped at the moment the run returned.
struct AttackOutcome {
  std::string id;
  bool skipped = false;
  std::string skip_reason;

  std::optional<perturb::Candidate> best;
  ObjectiveVector objectives;
  bool retrieval_success = false;
  bool generation_flipped = false;
  bool success = false;
  int iterations_used = 0;
  std::string prediction;
  std::string baseline_prediction;
  std::vector<TraceRow> trace;

  // echoed for reporting
  std::string question;
  std::vector<std::string> answers;
  std::string adversarial_document;
  std::vector<std::size_t> perturbed_indices;
};

/// Pairs parents uniformly, swaps entries of each parent's unique perturbed
/// set into the other (shared identical entries excluded), two offspring per
/// pair. Offspring may transiently exceed the budget; mutation restores it.
std::vector<perturb::Candidate> crossover(const std::vector<perturb::Candidate>& population,
                                          int n_parents, double pr_cross, RngStream& rng);

/// Restores the budget B (dropping crossover overfill, topping up shortfall),
/// then reverts m = round(pr_mut * B) perturbed tokens and perturbs m fresh
/// clean ones. Overlay size is exactly B afterwards.
perturb::Candidate mutate(perturb::Candidate candidate, double pr_mut, double pr_per,
                          const perturb::OperatorSet& ops, RngStream& rng);

/// The full genetic attack loop on one instance: initialization, then
/// crossover / mutation / evaluation / selection per generation, with an
/// early stop as soon as the best candidate both out-scores the clean
/// document and flips the reader's prediction.
AttackOutcome run_attack(corpus::TripleInstance& instance, const AttackConfig& config,
                         const scoring::ScorerHandles& scorers,
                         scoring::ScoreCache* cache = nullptr,
                         const GenerationObserver& observer = nullptr);

nlohmann::json outcome_to_json(const AttackOutcome& outcome, bool include_trace = false);
AttackOutcome outcome_from_json(const nlohmann::json& row);

nlohmann::json config_to_json(const AttackConfig& config);

}  // namespace garag::engine
