#include "garag/engine.hpp"

#include <algorithm>
#include <limits>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "garag/error.hpp"
#include "garag/log.hpp"
#include "garag/metrics.hpp"
#include "garag/pareto.hpp"

namespace garag::engine {

using nlohmann::json;
using perturb::Candidate;

void AttackConfig::validate() const {
  const auto check_rate = [](double rate, const char* name) {
    if (!(rate > 0.0 && rate <= 1.0)) {
      throw ConfigError(std::string(name) + " must be in (0, 1], got " + std::to_string(rate));
    }
  };
  check_rate(pr_per, "pr_per");
  check_rate(pr_cross, "pr_cross");
  check_rate(pr_mut, "pr_mut");
  if (n_iter < 1) throw ConfigError("n_iter must be >= 1");
  if (population_size < 1) throw ConfigError("population_size must be >= 1");
  if (n_parents < 1) throw ConfigError("n_parents must be >= 1");
  if (n_parents > population_size) {
    throw ConfigError("n_parents (" + std::to_string(n_parents) + ") exceeds population size (" +
                      std::to_string(population_size) + ")");
  }
  if (ops.enabled.empty()) throw ConfigError("operator set is empty");
}

std::vector<Candidate> crossover(const std::vector<Candidate>& population, int n_parents,
                                 double pr_cross, RngStream& rng) {
  std::vector<Candidate> offspring;
  offspring.reserve(static_cast<std::size_t>(2 * n_parents));

  if (population.size() < 2) {
    // Nothing to recombine; offspring are plain copies awaiting mutation.
    for (int p = 0; p < 2 * n_parents; ++p) offspring.push_back(population.front());
    return offspring;
  }

  for (int p = 0; p < n_parents; ++p) {
    const std::size_t first = rng.uniform_index(population.size());
    std::size_t second = rng.uniform_index(population.size() - 1);
    if (second >= first) ++second;
    const Candidate& parent_a = population[first];
    const Candidate& parent_b = population[second];

    // Unique perturbed entries: overlay keys where the parents disagree
    // (absent in the other, or present with different perturbed text).
    std::vector<std::pair<std::size_t, const std::string*>> unique_a;
    std::vector<std::pair<std::size_t, const std::string*>> unique_b;
    for (const auto& [index, text] : parent_a.overlay) {
      auto it = parent_b.overlay.find(index);
      if (it == parent_b.overlay.end() || it->second != text) unique_a.emplace_back(index, &text);
    }
    for (const auto& [index, text] : parent_b.overlay) {
      auto it = parent_a.overlay.find(index);
      if (it == parent_a.overlay.end() || it->second != text) unique_b.emplace_back(index, &text);
    }

    Candidate child_a = parent_a;
    Candidate child_b = parent_b;
    if (!unique_a.empty() && !unique_b.empty()) {
      const std::size_t k = std::max<std::size_t>(
          1, perturb::round_half_up(pr_cross * static_cast<double>(unique_a.size())));
      const std::size_t k_a = std::min(k, unique_a.size());
      const std::size_t k_b = std::min(k, unique_b.size());
      for (std::size_t i : rng.sample_indices(unique_b.size(), k_b)) {
        child_a.overlay[unique_b[i].first] = *unique_b[i].second;
      }
      for (std::size_t i : rng.sample_indices(unique_a.size(), k_a)) {
        child_b.overlay[unique_a[i].first] = *unique_a[i].second;
      }
      child_a.objectives.reset();
      child_b.objectives.reset();
    }
    offspring.push_back(std::move(child_a));
    offspring.push_back(std::move(child_b));
  }
  return offspring;
}

namespace {

std::vector<std::size_t> clean_unprotected_indices(const Candidate& candidate) {
  std::vector<std::size_t> clean;
  const auto& tokens = candidate.base->tokens;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!tokens[i].is_protected && candidate.overlay.find(i) == candidate.overlay.end()) {
      clean.push_back(i);
    }
  }
  return clean;
}

std::vector<std::size_t> overlay_keys(const Candidate& candidate) {
  std::vector<std::size_t> keys;
  keys.reserve(candidate.overlay.size());
  for (const auto& [index, text] : candidate.overlay) keys.push_back(index);
  return keys;
}

/// Walks a shuffled pool of clean indices and returns up to `wanted`
/// successful perturbations.
std::vector<std::pair<std::size_t, std::string>> draw_perturbations(
    const Candidate& candidate, std::vector<std::size_t> pool, std::size_t wanted,
    const perturb::OperatorSet& ops, RngStream& rng) {
  rng.shuffle(pool);
  std::vector<std::pair<std::size_t, std::string>> drawn;
  for (std::size_t index : pool) {
    if (drawn.size() == wanted) break;
    const std::string& original = candidate.base->tokens[index].text;
    std::string perturbed = perturb_token(original, ops, rng);
    if (perturbed != original) drawn.emplace_back(index, std::move(perturbed));
  }
  return drawn;
}

}  // namespace

Candidate mutate(Candidate candidate, double pr_mut, double pr_per,
                 const perturb::OperatorSet& ops, RngStream& rng) {
  const std::size_t budget = perturb::perturbation_budget(pr_per, candidate.base->token_count());
  bool changed = false;

  // Budget restoration: crossover may have overfilled the overlay.
  if (candidate.overlay.size() > budget) {
    const std::size_t excess = candidate.overlay.size() - budget;
    const std::vector<std::size_t> keys = overlay_keys(candidate);
    for (std::size_t i : rng.sample_indices(keys.size(), excess)) {
      candidate.overlay.erase(keys[i]);
    }
    changed = true;
  } else if (candidate.overlay.size() < budget) {
    const auto added = draw_perturbations(candidate, clean_unprotected_indices(candidate),
                                          budget - candidate.overlay.size(), ops, rng);
    for (auto& [index, text] : added) candidate.overlay[index] = std::move(text);
    if (candidate.overlay.size() < budget) {
      log::warn("mutate: budget shortfall, " + std::to_string(candidate.overlay.size()) + " of " +
                std::to_string(budget) + " perturbations");
    }
    changed = true;
  }

  const std::size_t m = perturb::round_half_up(pr_mut * static_cast<double>(budget));
  if (m > 0) {
    // Fresh perturbations are drawn first so the revert count can shrink to
    // match and the overlay size stays exactly at the budget.
    const auto added =
        draw_perturbations(candidate, clean_unprotected_indices(candidate), m, ops, rng);
    if (added.size() < m) {
      log::debug("mutate: m reduced from " + std::to_string(m) + " to " +
                 std::to_string(added.size()));
    }
    const std::size_t effective = std::min(added.size(), candidate.overlay.size());
    if (effective > 0) {
      const std::vector<std::size_t> keys = overlay_keys(candidate);
      for (std::size_t i : rng.sample_indices(keys.size(), effective)) {
        candidate.overlay.erase(keys[i]);  // revert to original
      }
      for (std::size_t i = 0; i < effective; ++i) {
        candidate.overlay[added[i].first] = added[i].second;
      }
      changed = true;
    }
  }

  if (changed) candidate.objectives.reset();
  return candidate;
}

namespace {

AttackOutcome skipped_outcome(const corpus::TripleInstance& instance, std::string reason) {
  AttackOutcome outcome;
  outcome.id = instance.id;
  outcome.skipped = true;
  outcome.skip_reason = std::move(reason);
  outcome.question = instance.question;
  outcome.answers = instance.answers;
  return outcome;
}

}  // namespace

AttackOutcome run_attack(corpus::TripleInstance& instance, const AttackConfig& config,
                         const scoring::ScorerHandles& scorers, scoring::ScoreCache* cache,
                         const GenerationObserver& observer) {
  config.validate();

  auto doc = std::make_shared<corpus::TokenizedDocument>(corpus::tokenize(instance.document));
  corpus::locate_answer_spans(*doc, instance.answers);
  const std::size_t budget = perturb::perturbation_budget(config.pr_per, doc->token_count());
  if (doc->unprotected_count() < budget) {
    return skipped_outcome(instance, "too few unprotected tokens (" +
                                         std::to_string(doc->unprotected_count()) + " < budget " +
                                         std::to_string(budget) + ")");
  }

  scoring::ensure_baselines(instance, scorers);
  RngStream rng(config.seed);

  std::vector<Candidate> population;
  try {
    population = perturb::init_population(doc, config.pr_per, config.ops,
                                          static_cast<std::size_t>(config.population_size), rng);
  } catch (const DataError& e) {
    return skipped_outcome(instance, e.what());
  }

  AttackOutcome outcome;
  outcome.id = instance.id;
  outcome.question = instance.question;
  outcome.answers = instance.answers;
  outcome.baseline_prediction = *instance.baseline_prediction;

  static const std::vector<Candidate> kNoCandidates;
  if (observer) observer(PopulationState{0, population, kNoCandidates, kNoCandidates});

  // One generation per iteration on the same d* text gives the same
  // prediction; memoize to spare expensive backends.
  std::unordered_map<std::string, std::string> prediction_memo;
  const auto predict = [&](const std::string& text) -> const std::string& {
    auto it = prediction_memo.find(text);
    if (it == prediction_memo.end()) {
      it = prediction_memo.emplace(text, scorers.generation->generate(text, instance.question))
               .first;
    }
    return it->second;
  };

  const auto finish = [&](const Candidate& best, const std::string& prediction, bool success,
                          int iterations) {
    outcome.best = best;
    outcome.objectives = *best.objectives;
    outcome.retrieval_success = best.objectives->rsr < 1.0;
    outcome.generation_flipped = !metrics::exact_match(prediction, instance.answers);
    outcome.success = success;
    outcome.iterations_used = iterations;
    outcome.prediction = prediction;
    outcome.adversarial_document = best.text();
    for (const auto& [index, text] : best.overlay) {
      (void)text;
      outcome.perturbed_indices.push_back(index);
    }
    return outcome;
  };

  for (int iteration = 1; iteration <= config.n_iter; ++iteration) {
    std::vector<Candidate> offspring =
        crossover(population, config.n_parents, config.pr_cross, rng);
    for (Candidate& child : offspring) {
      child = mutate(std::move(child), config.pr_mut, config.pr_per, config.ops, rng);
    }

    std::vector<Candidate> merged = population;
    merged.insert(merged.end(), offspring.begin(), offspring.end());
    scoring::evaluate_population(merged, instance, scorers, cache);

    std::vector<ObjectiveVector> objectives;
    objectives.reserve(merged.size());
    double min_rsr = std::numeric_limits<double>::infinity();
    double min_gpr = std::numeric_limits<double>::infinity();
    for (const Candidate& candidate : merged) {
      objectives.push_back(*candidate.objectives);
      min_rsr = std::min(min_rsr, candidate.objectives->rsr);
      min_gpr = std::min(min_gpr, candidate.objectives->gpr);
    }
    pareto::FrontAssignment assignment;
    const std::vector<std::size_t> order = pareto::selection_order(objectives, &assignment);
    std::size_t front_size = 0;
    for (std::size_t rank : assignment.rank) {
      if (rank == 0) ++front_size;
    }
    outcome.trace.push_back(TraceRow{iteration, min_rsr, min_gpr, front_size});

    if (observer) observer(PopulationState{iteration, population, offspring, merged});

    const Candidate& best = merged[order.front()];
    const std::string& prediction = predict(best.text());
    const bool flipped = !metrics::exact_match(prediction, instance.answers);
    if (flipped && best.objectives->rsr < 1.0) {
      return finish(best, prediction, true, iteration);
    }

    std::vector<Candidate> survivors;
    survivors.reserve(static_cast<std::size_t>(config.population_size));
    for (int s = 0; s < config.population_size; ++s) {
      survivors.push_back(merged[order[static_cast<std::size_t>(s)]]);
    }
    population = std::move(survivors);
  }

  // The cap was reached; the per-iteration success check already failed for
  // this best candidate, so report it as a failure-or-partial outcome.
  const Candidate& best = pareto::select_best(population);
  return finish(best, predict(best.text()), false, config.n_iter);
}

json config_to_json(const AttackConfig& config) {
  std::vector<std::string> op_names;
  for (perturb::Op op : config.ops.enabled) op_names.emplace_back(perturb::op_name(op));
  return json{{"n_iter", config.n_iter},
              {"n_parents", config.n_parents},
              {"population_size", config.population_size},
              {"pr_per", config.pr_per},
              {"pr_cross", config.pr_cross},
              {"pr_mut", config.pr_mut},
              {"seed", config.seed},
              {"ops", op_names}};
}

json outcome_to_json(const AttackOutcome& outcome, bool include_trace) {
  json row{{"id", outcome.id}, {"status", outcome.skipped ? "skipped" : "attacked"}};
  if (outcome.skipped) {
    row["skip_reason"] = outcome.skip_reason;
    row["question"] = outcome.question;
    row["answers"] = outcome.answers;
    return row;
  }
  row["question"] = outcome.question;
  row["answers"] = outcome.answers;
  row["rsr"] = outcome.objectives.rsr;
  row["gpr"] = outcome.objectives.gpr;
  row["retrieval_success"] = outcome.retrieval_success;
  row["generation_flipped"] = outcome.generation_flipped;
  row["success"] = outcome.success;
  row["iterations_used"] = outcome.iterations_used;
  row["prediction"] = outcome.prediction;
  row["baseline_prediction"] = outcome.baseline_prediction;
  row["adversarial_document"] = outcome.adversarial_document;
  row["perturbed_indices"] = outcome.perturbed_indices;
  if (include_trace) {
    json trace = json::array();
    for (const TraceRow& t : outcome.trace) {
      trace.push_back(json{{"generation", t.generation},
                           {"min_rsr", t.min_rsr},
                           {"min_gpr", t.min_gpr},
                           {"front_size", t.front_size}});
    }
    row["trace"] = trace;
  }
  return row;
}

AttackOutcome outcome_from_json(const json& row) {
  AttackOutcome outcome;
  outcome.id = row.at("id").get<std::string>();
  outcome.skipped = row.at("status").get<std::string>() == "skipped";
  outcome.question = row.value("question", "");
  outcome.answers = row.value("answers", std::vector<std::string>{});
  if (outcome.skipped) {
    outcome.skip_reason = row.value("skip_reason", "");
    return outcome;
  }
  outcome.objectives.rsr = row.at("rsr").get<double>();
  outcome.objectives.gpr = row.at("gpr").get<double>();
  outcome.retrieval_success = row.at("retrieval_success").get<bool>();
  outcome.generation_flipped = row.at("generation_flipped").get<bool>();
  outcome.success = row.at("success").get<bool>();
  outcome.iterations_used = row.at("iterations_used").get<int>();
  outcome.prediction = row.at("prediction").get<std::string>();
  outcome.baseline_prediction = row.at("baseline_prediction").get<std::string>();
  outcome.adversarial_document = row.value("adversarial_document", "");
  outcome.perturbed_indices = row.value("perturbed_indices", std::vector<std::size_t>{});
  if (row.contains("trace")) {
    for (const json& t : row.at("trace")) {
      outcome.trace.push_back(TraceRow{t.at("generation").get<int>(),
                                       t.at("min_rsr").get<double>(),
                                       t.at("min_gpr").get<double>(),
                                       t.at("front_size").get<std::size_t>()});
    }
  }
  return outcome;
}

}  // namespace garag::engine
