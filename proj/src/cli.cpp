#include "garag/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "garag/corpus.hpp"
#include "garag/error.hpp"
#include "garag/log.hpp"
#include "garag/metrics.hpp"
#include "garag/perturb.hpp"
#include "garag/scoring.hpp"

namespace garag::cli {

using nlohmann::json;

std::string file_fnv1a64(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for hashing: " + path);
  std::uint64_t hash = 14695981039346656037ULL;
  char buffer[4096];
  while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buffer[i]);
      hash *= 1099511628211ULL;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
  return hex;
}

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

perturb::OperatorSet build_operator_set(const std::vector<std::string>& op_names,
                                        const std::string& typo_table,
                                        const std::string& phonetic_table,
                                        const std::string& visual_table) {
  perturb::OperatorSet ops = perturb::OperatorSet::defaults();
  if (!op_names.empty()) {
    ops.enabled.clear();
    for (const std::string& name : op_names) {
      const perturb::Op op = perturb::op_from_name(name);
      if (!ops.is_enabled(op)) ops.enabled.push_back(op);
    }
  }
  if (!typo_table.empty()) ops.natural_typos = perturb::load_substitution_table(typo_table);
  if (!phonetic_table.empty()) ops.phonetic = perturb::load_substitution_table(phonetic_table);
  if (!visual_table.empty()) ops.visual = perturb::load_substitution_table(visual_table);
  return ops;
}

scoring::ScorerHandles build_scorers(const ScorerOptions& options,
                                     const std::vector<corpus::TripleInstance>& instances) {
  if (options.kind == "surrogate") {
    // Uniform trigram weights: desk-scale corpora are far too small for
    // meaningful IDF estimates, and fitted weights concentrate the document
    // norm on query trigrams, which flattens the retrieval objective.
    return scoring::make_surrogate_scorers(options.window);
  }
  if (options.kind == "remote") {
    if (options.url.empty()) throw ConfigError("remote scorer requires --scorer.url");
    scoring::RemoteConfig remote;
    remote.base_url = options.url;
    remote.timeout_ms = options.timeout_ms;
    remote.retries = options.retries;
    if (const char* key = std::getenv("GARAG_API_KEY")) remote.api_key = key;
    scoring::probe_remote(remote);
    scoring::ScorerHandles handles;
    handles.relevance = std::make_shared<scoring::RemoteRelevance>(remote);
    handles.generation = std::make_shared<scoring::RemoteGeneration>(remote);
    return handles;
  }
  throw ConfigError("unknown scorer kind \"" + options.kind + "\" (surrogate or remote)");
}

void write_manifest(const std::string& path, const json& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << manifest.dump(2) << "\n";
}

}  // namespace

int cmd_attack(const AttackOptions& options) {
  engine::AttackConfig config = options.config;
  config.ops = build_operator_set(options.ops, options.typo_table, options.phonetic_table,
                                  options.visual_table);
  config.validate();

  std::vector<corpus::TripleInstance> instances =
      corpus::load_triples(options.dataset, options.limit);
  if (instances.empty()) throw DataError("dataset has no instances: " + options.dataset);

  const scoring::ScorerHandles scorers = build_scorers(options.scorer, instances);

  const std::string manifest_path = options.out + ".manifest.json";
  json manifest{{"config", engine::config_to_json(config)},
                {"dataset", options.dataset},
                {"dataset_fnv1a64", file_fnv1a64(options.dataset)},
                {"outcomes", options.out},
                {"scorers",
                 {{"relevance", scorers.relevance->id()},
                  {"generation", scorers.generation->id()}}},
                {"seed", config.seed},
                {"started_at", utc_timestamp()}};
  write_manifest(manifest_path, manifest);

  scoring::ScoreCache cache;
  std::vector<engine::AttackOutcome> outcomes(instances.size());
  std::atomic<std::size_t> cursor{0};
  const auto work = [&]() {
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= instances.size()) break;
      engine::AttackConfig instance_config = config;
      instance_config.seed = config.seed ^ static_cast<std::uint64_t>(i);
      try {
        outcomes[i] = engine::run_attack(instances[i], instance_config, scorers, &cache);
      } catch (const std::exception& e) {
        engine::AttackOutcome failed;
        failed.id = instances[i].id;
        failed.skipped = true;
        failed.skip_reason = e.what();
        failed.question = instances[i].question;
        failed.answers = instances[i].answers;
        outcomes[i] = std::move(failed);
        log::warn("instance " + instances[i].id + " failed: " + e.what());
      }
    }
  };

  std::size_t worker_count = options.workers ? options.workers : std::thread::hardware_concurrency();
  worker_count = std::max<std::size_t>(1, std::min(worker_count, instances.size()));
  if (worker_count == 1) {
    work();
  } else {
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < worker_count; ++w) workers.emplace_back(work);
    for (std::thread& worker : workers) worker.join();
  }

  std::ofstream out(options.out, std::ios::binary);
  if (!out) throw DataError("cannot write outcomes: " + options.out);
  std::size_t skipped = 0;
  std::size_t successes = 0;
  for (const engine::AttackOutcome& outcome : outcomes) {
    out << engine::outcome_to_json(outcome, options.emit_trace).dump() << "\n";
    if (outcome.skipped) ++skipped;
    if (outcome.success) ++successes;
  }
  if (!out) throw DataError("I/O error while writing " + options.out);

  if (!options.trace_dir.empty()) {
    std::filesystem::create_directories(options.trace_dir);
    for (const engine::AttackOutcome& outcome : outcomes) {
      if (outcome.skipped) continue;
      json trace = json::array();
      for (const engine::TraceRow& row : outcome.trace) {
        trace.push_back(json{{"generation", row.generation},
                             {"min_rsr", row.min_rsr},
                             {"min_gpr", row.min_gpr},
                             {"front_size", row.front_size}});
      }
      std::ofstream trace_out(options.trace_dir + "/" + outcome.id + ".json", std::ios::binary);
      trace_out << trace.dump(2) << "\n";
    }
  }

  manifest["finished_at"] = utc_timestamp();
  manifest["counts"] = json{{"total", outcomes.size()},
                            {"attacked", outcomes.size() - skipped},
                            {"skipped", skipped},
                            {"successes", successes}};
  write_manifest(manifest_path, manifest);

  std::cerr << "attacked " << (outcomes.size() - skipped) << "/" << outcomes.size()
            << " instances (" << successes << " successes, " << skipped << " skipped) -> "
            << options.out << "\n";
  return 0;
}

int cmd_perturb(const PerturbOptions& options, std::istream& in, std::ostream& out) {
  perturb::OperatorSet ops = build_operator_set({options.op}, options.typo_table,
                                                options.phonetic_table, options.visual_table);
  RngStream rng(options.seed);
  std::string token;
  while (in >> token) {
    out << perturb::perturb_token(token, ops, rng) << "\n";
  }
  return 0;
}

int cmd_report(const ReportOptions& options, std::ostream& out) {
  const std::vector<engine::AttackOutcome> outcomes = metrics::load_outcomes(options.results);

  std::string config_echo;
  std::ifstream manifest_in(options.results + ".manifest.json");
  if (manifest_in) {
    try {
      json manifest;
      manifest_in >> manifest;
      if (manifest.contains("config")) config_echo = manifest["config"].dump();
    } catch (const json::exception&) {
      log::warn("ignoring unreadable manifest next to " + options.results);
    }
  }

  const metrics::EvaluationReport report = metrics::build_report(outcomes, config_echo);
  const metrics::ReportFormat format =
      options.format == "json" ? metrics::ReportFormat::json : metrics::ReportFormat::table;
  if (!options.out.empty()) {
    metrics::emit_report(report, format, options.out);
  } else if (format == metrics::ReportFormat::json) {
    out << metrics::report_to_json(report).dump(2) << "\n";
  } else {
    out << metrics::report_table(report);
  }
  return 0;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Genetic adversarial attack on retrieval-augmented QA"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "TOML config file with an [attack] section; command-line flags win");

  AttackOptions attack;
  CLI::App* attack_cmd = app.add_subcommand("attack", "Run the genetic attack over a dataset");
  attack_cmd->fallthrough();
  attack_cmd->add_option("--dataset", attack.dataset, "JSON-lines triples file")->required();
  attack_cmd->add_option("--out", attack.out, "Outcomes JSON-lines path");
  attack_cmd->add_option("--limit", attack.limit, "Attack only the first N instances");
  attack_cmd->add_option("--workers", attack.workers, "Worker threads (0 = hardware)");
  attack_cmd->add_flag("--emit-trace", attack.emit_trace, "Embed per-generation traces in rows");
  attack_cmd->add_option("--trace-dir", attack.trace_dir, "Write per-instance trace files here");
  attack_cmd->add_option("--seed", attack.config.seed, "Master seed");
  attack_cmd->add_option("--iters", attack.config.n_iter, "Iteration cap");
  attack_cmd->add_option("--parents", attack.config.n_parents, "Parent pairs per generation");
  attack_cmd->add_option("--pop", attack.config.population_size, "Population size");
  attack_cmd->add_option("--pr-per", attack.config.pr_per, "Perturbation rate");
  attack_cmd->add_option("--pr-cross", attack.config.pr_cross, "Crossover rate");
  attack_cmd->add_option("--pr-mut", attack.config.pr_mut, "Mutation rate");
  attack_cmd->add_option("--ops", attack.ops, "Comma-separated operator names")->delimiter(',');
  attack_cmd->add_option("--typo-table", attack.typo_table, "Natural-typo table file");
  attack_cmd->add_option("--phonetic-table", attack.phonetic_table, "Phonetic table file");
  attack_cmd->add_option("--visual-table", attack.visual_table, "Visual table file");
  attack_cmd->add_option("--scorer,--scorer.kind", attack.scorer.kind,
                         "Scorer kind: surrogate or remote");
  attack_cmd->add_option("--scorer.url", attack.scorer.url, "Remote scorer base URL");
  attack_cmd->add_option("--scorer.timeout_ms", attack.scorer.timeout_ms, "Remote timeout");
  attack_cmd->add_option("--scorer.retries", attack.scorer.retries, "Remote retry cap");
  attack_cmd->add_option("--window", attack.scorer.window, "Surrogate reader window");
  attack_cmd->add_flag_callback("--verbose",
                                []() { log::set_threshold(log::Level::debug); },
                                "Log debug detail");

  PerturbOptions perturb_opts;
  CLI::App* perturb_cmd =
      app.add_subcommand("perturb", "Apply one operator to stdin tokens (one result per line)");
  perturb_cmd->add_option("--op", perturb_opts.op, "Operator name")
      ->required()
      ->check(CLI::IsMember(perturb::all_op_names()));
  perturb_cmd->add_option("--seed", perturb_opts.seed, "Seed");
  perturb_cmd->add_option("--typo-table", perturb_opts.typo_table, "Natural-typo table file");
  perturb_cmd->add_option("--phonetic-table", perturb_opts.phonetic_table, "Phonetic table file");
  perturb_cmd->add_option("--visual-table", perturb_opts.visual_table, "Visual table file");

  ReportOptions report;
  CLI::App* report_cmd = app.add_subcommand("report", "Aggregate an outcomes file into metrics");
  report_cmd->add_option("--results", report.results, "Outcomes JSON-lines path")->required();
  report_cmd->add_option("--format", report.format, "table or json")
      ->check(CLI::IsMember({"table", "json"}));
  report_cmd->add_option("--out", report.out, "Write the report here instead of stdout");

  int rc = 0;
  attack_cmd->callback([&]() { rc = cmd_attack(attack); });
  perturb_cmd->callback([&]() { rc = cmd_perturb(perturb_opts, std::cin, std::cout); });
  report_cmd->callback([&]() { rc = cmd_report(report, std::cout); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}

}  // namespace garag::cli
