#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "garag/engine.hpp"

namespace garag::cli {

struct ScorerOptions {
  std::string kind = "surrogate";  // surrogate | remote
  std::string url;
  int timeout_ms = 30000;
  int retries = 2;
  std::size_t window = 10;
};

struct AttackOptions {
  std::string dataset;
  std::string out = "outcomes.jsonl";
  std::optional<std::size_t> limit;
  std::size_t workers = 0;  // 0 = hardware concurrency
  bool emit_trace = false;
  std::string trace_dir;

  engine::AttackConfig config;
  std::vector<std::string> ops;  // empty = defaults
  std::string typo_table;
  std::string phonetic_table;
  std::string visual_table;
  ScorerOptions scorer;
};

struct PerturbOptions {
  std::string op;
  std::uint64_t seed = 0;
  std::string typo_table;
  std::string phonetic_table;
  std::string visual_table;
};

struct ReportOptions {
  std::string results;
  std::string format = "table";
  std::string out;  // empty = stdout
};

/// Runs the attack over every instance in the dataset under a worker pool,
/// writes the manifest (before any attack starts) and one outcome row per
/// instance in input order. Per-instance failures are reported, not fatal.
int cmd_attack(const AttackOptions& options);

/// Applies one named operator to each whitespace token read from `in`,
/// one result per line.
int cmd_perturb(const PerturbOptions& options, std::istream& in, std::ostream& out);

int cmd_report(const ReportOptions& options, std::ostream& out);

/// Full argv entry point (subcommands attack / perturb / report).
int run(int argc, const char* const* argv);

/// 64-bit FNV-1a of a file's bytes, hex-encoded; used for the manifest's
/// dataset hash.
std::string file_fnv1a64(const std::string& path);

}  // namespace garag::cli
