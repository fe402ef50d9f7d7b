#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "garag/engine.hpp"

namespace garag::metrics {

/// SQuAD-style answer normalization: lowercase, strip punctuation, drop the
/// articles a/an/the, collapse whitespace.
std::string normalize(std::string_view text);

/// Normalized prediction equals any normalized answer.
bool exact_match(std::string_view prediction, const std::vector<std::string>& answers);

/// Any normalized answer is a substring of the normalized prediction.
bool accuracy(std::string_view prediction, const std::vector<std::string>& answers);

/// Attack success ratios in percent over attacked (non-skipped) outcomes:
/// asr_r counts rsr < 1, asr_l counts gpr < 1, asr_t counts both.
struct AsrSummary {
  double asr_r = 0.0;
  double asr_l = 0.0;
  double asr_t = 0.0;
};
AsrSummary attack_success(const std::vector<engine::AttackOutcome>& outcomes);

/// retrieval_error: mean rsr of the best candidate over holistic successes.
/// grounding_error: fraction of attacked outcomes whose stored final
/// prediction still exact-matches the gold answers (see README for the
/// definitional caveat). Both n/a when there are no holistic successes.
struct ComponentErrors {
  std::optional<double> retrieval_error;
  std::optional<double> grounding_error;
};
ComponentErrors component_errors(const std::vector<engine::AttackOutcome>& outcomes);

/// End-to-end EM / Accuracy in percent. Failed attacks fall back to the
/// cached clean-document baseline prediction.
struct EndToEnd {
  double em = 0.0;
  double acc = 0.0;
};
EndToEnd end_to_end(const std::vector<engine::AttackOutcome>& outcomes);

struct ReportCounts {
  std::size_t total = 0;
  std::size_t attacked = 0;
  std::size_t skipped = 0;
};

struct InstanceRow {
  std::string id;
  bool skipped = false;
  double rsr = 0.0;
  double gpr = 0.0;
  bool success = false;
  bool em = false;
  bool acc = false;
};

struct EvaluationReport {
  AsrSummary asr;
  ComponentErrors component;
  EndToEnd e2e;
  ReportCounts counts;
  std::vector<InstanceRow> rows;
  std::string config_echo;  // JSON text of the attack config, empty if unknown
};

/// Builds the full report. Throws DataError on an empty outcome set.
EvaluationReport build_report(const std::vector<engine::AttackOutcome>& outcomes,
                              std::string config_echo = "");

/// Schema-stable, machine-diffable JSON form.
nlohmann::json report_to_json(const EvaluationReport& report);

/// Seven-column table: ASR_R ASR_L ASR_T R.E. G.E. EM Acc.
std::string report_table(const EvaluationReport& report);

enum class ReportFormat { table, json };
void emit_report(const EvaluationReport& report, ReportFormat format, const std::string& path);

/// Fraction of incorrect final predictions per ascending-gpr bucket
/// (quantile split over attacked outcomes). Used for the directional
/// check that lower gpr correlates with more wrong answers.
std::vector<double> incorrect_fraction_by_gpr_bucket(
    const std::vector<engine::AttackOutcome>& outcomes, std::size_t buckets = 3);

/// Reads an outcomes JSON-lines file; errors name the offending line.
std::vector<engine::AttackOutcome> load_outcomes(const std::string& path);

}  // namespace garag::metrics
