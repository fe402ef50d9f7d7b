#include "garag/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "garag/error.hpp"

namespace garag::metrics {

using engine::AttackOutcome;
using nlohmann::json;

std::string normalize(std::string_view text) {
  std::string lowered;
  lowered.reserve(text.size());
  for (char c : text) {
    if (std::ispunct(static_cast<unsigned char>(c))) continue;
    lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  std::istringstream words(lowered);
  std::string word;
  std::string out;
  while (words >> word) {
    if (word == "a" || word == "an" || word == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

bool exact_match(std::string_view prediction, const std::vector<std::string>& answers) {
  const std::string p = normalize(prediction);
  for (const std::string& answer : answers) {
    if (p == normalize(answer)) return true;
  }
  return false;
}

bool accuracy(std::string_view prediction, const std::vector<std::string>& answers) {
  const std::string p = normalize(prediction);
  for (const std::string& answer : answers) {
    const std::string a = normalize(answer);
    if (!a.empty() && p.find(a) != std::string::npos) return true;
  }
  return false;
}

namespace {

std::vector<const AttackOutcome*> attacked_only(const std::vector<AttackOutcome>& outcomes) {
  std::vector<const AttackOutcome*> attacked;
  for (const AttackOutcome& outcome : outcomes) {
    if (!outcome.skipped) attacked.push_back(&outcome);
  }
  return attacked;
}

double percent(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

}  // namespace

AsrSummary attack_success(const std::vector<AttackOutcome>& outcomes) {
  const auto attacked = attacked_only(outcomes);
  if (attacked.empty()) throw DataError("attack_success: no attacked outcomes");
  std::size_t r = 0;
  std::size_t l = 0;
  std::size_t t = 0;
  for (const AttackOutcome* outcome : attacked) {
    const bool retrieval = outcome->objectives.rsr < 1.0;
    const bool grounding = outcome->objectives.gpr < 1.0;
    if (retrieval) ++r;
    if (grounding) ++l;
    if (retrieval && grounding) ++t;
  }
  return AsrSummary{percent(r, attacked.size()), percent(l, attacked.size()),
                    percent(t, attacked.size())};
}

ComponentErrors component_errors(const std::vector<AttackOutcome>& outcomes) {
  const auto attacked = attacked_only(outcomes);
  double rsr_sum = 0.0;
  std::size_t holistic = 0;
  std::size_t still_matching = 0;
  for (const AttackOutcome* outcome : attacked) {
    if (outcome->objectives.rsr < 1.0 && outcome->objectives.gpr < 1.0) {
      ++holistic;
      rsr_sum += outcome->objectives.rsr;
    }
    if (exact_match(outcome->prediction, outcome->answers)) ++still_matching;
  }
  ComponentErrors errors;
  if (holistic > 0) {
    errors.retrieval_error = rsr_sum / static_cast<double>(holistic);
    errors.grounding_error =
        static_cast<double>(still_matching) / static_cast<double>(attacked.size());
  }
  return errors;
}

EndToEnd end_to_end(const std::vector<AttackOutcome>& outcomes) {
  const auto attacked = attacked_only(outcomes);
  std::size_t em_hits = 0;
  std::size_t acc_hits = 0;
  for (const AttackOutcome* outcome : attacked) {
    // Failed attacks fall back to the clean-document prediction.
    const std::string& scored =
        outcome->success ? outcome->prediction : outcome->baseline_prediction;
    if (exact_match(scored, outcome->answers)) ++em_hits;
    if (accuracy(scored, outcome->answers)) ++acc_hits;
  }
  return EndToEnd{percent(em_hits, attacked.size()), percent(acc_hits, attacked.size())};
}

EvaluationReport build_report(const std::vector<AttackOutcome>& outcomes,
                              std::string config_echo) {
  if (outcomes.empty()) throw DataError("cannot build a report from an empty outcome set");
  EvaluationReport report;
  report.counts.total = outcomes.size();
  for (const AttackOutcome& outcome : outcomes) {
    if (outcome.skipped) {
      ++report.counts.skipped;
    } else {
      ++report.counts.attacked;
    }
  }
  if (report.counts.attacked == 0) {
    throw DataError("cannot build a report: every instance was skipped");
  }
  report.asr = attack_success(outcomes);
  report.component = component_errors(outcomes);
  report.e2e = end_to_end(outcomes);
  report.config_echo = std::move(config_echo);

  for (const AttackOutcome& outcome : outcomes) {
    InstanceRow row;
    row.id = outcome.id;
    row.skipped = outcome.skipped;
    if (!outcome.skipped) {
      row.rsr = outcome.objectives.rsr;
      row.gpr = outcome.objectives.gpr;
      row.success = outcome.success;
      const std::string& scored =
          outcome.success ? outcome.prediction : outcome.baseline_prediction;
      row.em = exact_match(scored, outcome.answers);
      row.acc = accuracy(scored, outcome.answers);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

json report_to_json(const EvaluationReport& report) {
  json doc{{"asr_r", report.asr.asr_r},
           {"asr_l", report.asr.asr_l},
           {"asr_t", report.asr.asr_t},
           {"retrieval_error",
            report.component.retrieval_error ? json(*report.component.retrieval_error)
                                             : json(nullptr)},
           {"grounding_error",
            report.component.grounding_error ? json(*report.component.grounding_error)
                                             : json(nullptr)},
           {"em", report.e2e.em},
           {"acc", report.e2e.acc},
           {"counts",
            {{"total", report.counts.total},
             {"attacked", report.counts.attacked},
             {"skipped", report.counts.skipped}}}};
  if (!report.config_echo.empty()) {
    doc["config"] = json::parse(report.config_echo, nullptr, false);
  }
  json rows = json::array();
  for (const InstanceRow& row : report.rows) {
    if (row.skipped) {
      rows.push_back(json{{"id", row.id}, {"skipped", true}});
    } else {
      rows.push_back(json{{"id", row.id},
                          {"skipped", false},
                          {"rsr", row.rsr},
                          {"gpr", row.gpr},
                          {"success", row.success},
                          {"em", row.em},
                          {"acc", row.acc}});
    }
  }
  doc["per_instance"] = rows;
  return doc;
}

std::string report_table(const EvaluationReport& report) {
  const auto real_or_na = [](const std::optional<double>& value) {
    if (!value) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", *value);
    return std::string(buf);
  };
  char line[256];
  std::string out;
  std::snprintf(line, sizeof(line), "%8s %8s %8s %8s %8s %8s %8s\n", "ASR_R", "ASR_L", "ASR_T",
                "R.E.", "G.E.", "EM", "Acc");
  out += line;
  std::snprintf(line, sizeof(line), "%8.1f %8.1f %8.1f %8s %8s %8.1f %8.1f\n", report.asr.asr_r,
                report.asr.asr_l, report.asr.asr_t,
                real_or_na(report.component.retrieval_error).c_str(),
                real_or_na(report.component.grounding_error).c_str(), report.e2e.em,
                report.e2e.acc);
  out += line;
  std::snprintf(line, sizeof(line), "instances: %zu attacked, %zu skipped, %zu total\n",
                report.counts.attacked, report.counts.skipped, report.counts.total);
  out += line;
  return out;
}

void emit_report(const EvaluationReport& report, ReportFormat format, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write report to " + path);
  if (format == ReportFormat::json) {
    out << report_to_json(report).dump(2) << "\n";
  } else {
    out << report_table(report);
  }
  if (!out) throw DataError("I/O error while writing " + path);
}

std::vector<double> incorrect_fraction_by_gpr_bucket(const std::vector<AttackOutcome>& outcomes,
                                                     std::size_t buckets) {
  std::vector<const AttackOutcome*> attacked = attacked_only(outcomes);
  if (attacked.size() < buckets || buckets == 0) {
    throw DataError("too few outcomes for " + std::to_string(buckets) + " gpr buckets");
  }
  std::stable_sort(attacked.begin(), attacked.end(), [](const auto* a, const auto* b) {
    return a->objectives.gpr < b->objectives.gpr;
  });
  std::vector<double> fractions;
  const std::size_t n = attacked.size();
  for (std::size_t b = 0; b < buckets; ++b) {
    const std::size_t lo = b * n / buckets;
    const std::size_t hi = (b + 1) * n / buckets;
    std::size_t wrong = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      if (!exact_match(attacked[i]->prediction, attacked[i]->answers)) ++wrong;
    }
    fractions.push_back(static_cast<double>(wrong) / static_cast<double>(hi - lo));
  }
  return fractions;
}

std::vector<AttackOutcome> load_outcomes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open results file: " + path);
  std::vector<AttackOutcome> outcomes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      outcomes.push_back(engine::outcome_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": corrupt outcome row: " + e.what());
    }
  }
  if (in.bad()) throw DataError("I/O error while reading " + path);
  if (outcomes.empty()) throw DataError("results file is empty: " + path);
  return outcomes;
}

}  // namespace garag::metrics
