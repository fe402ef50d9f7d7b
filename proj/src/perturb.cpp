#include "garag/perturb.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "garag/assets/natural_typos.hpp"
#include "garag/assets/phonetic_map.hpp"
#include "garag/assets/visual_map.hpp"
#include "garag/error.hpp"
#include "garag/log.hpp"

namespace garag::perturb {
namespace {

constexpr std::array<std::pair<Op, const char*>, 7> kOpNames = {{
    {Op::inner_shuffle, "inner_shuffle"},
    {Op::truncate, "truncate"},
    {Op::keyboard_typo, "keyboard_typo"},
    {Op::natural_typo, "natural_typo"},
    {Op::punctuation_insert, "punctuation_insert"},
    {Op::phonetic_swap, "phonetic_swap"},
    {Op::visual_swap, "visual_swap"},
}};

constexpr std::string_view kPunctuation = ",.'!?;";

bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
char to_lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }
char to_upper(char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); }

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = to_lower(c);
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

const char* op_name(Op op) {
  for (const auto& [value, name] : kOpNames) {
    if (value == op) return name;
  }
  return "?";
}

Op op_from_name(std::string_view name) {
  for (const auto& [value, known] : kOpNames) {
    if (name == known) return value;
  }
  std::string valid;
  for (const auto& [value, known] : kOpNames) {
    if (!valid.empty()) valid += ", ";
    valid += known;
  }
  throw ConfigError("unknown operator \"" + std::string(name) + "\" (valid: " + valid + ")");
}

std::vector<std::string> all_op_names() {
  std::vector<std::string> names;
  for (const auto& [value, name] : kOpNames) names.emplace_back(name);
  return names;
}

SubstitutionTable parse_substitution_table(std::string_view content) {
  SubstitutionTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t eol = content.find('\n', pos);
    std::string_view line =
        content.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? content.size() + 1 : eol + 1;
    ++line_no;

    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    std::size_t colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw DataError("substitution table line " + std::to_string(line_no) +
                      ": expected \"key: r1,r2\"");
    }
    std::string key = lowercase(trim(line.substr(0, colon)));
    if (key.empty()) {
      throw DataError("substitution table line " + std::to_string(line_no) + ": empty key");
    }
    std::vector<std::string> values;
    std::string_view rest = line.substr(colon + 1);
    while (!rest.empty()) {
      std::size_t comma = rest.find(',');
      std::string_view value = trim(rest.substr(0, comma));
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      if (value.empty()) continue;
      if (value.find_first_of(" \t") != std::string_view::npos) {
        throw DataError("substitution table line " + std::to_string(line_no) +
                        ": replacement contains whitespace");
      }
      values.emplace_back(value);
    }
    if (values.empty()) {
      throw DataError("substitution table line " + std::to_string(line_no) + ": no replacements");
    }
    table[std::move(key)] = std::move(values);
  }
  return table;
}

SubstitutionTable load_substitution_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open substitution table: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_substitution_table(buffer.str());
}

std::map<char, std::string> qwerty_adjacency() {
  // Staggered layout; two keys are adjacent when their horizontal offset is
  // at most one key width on the same or a neighboring row.
  struct Row {
    const char* keys;
    double offset;
  };
  constexpr Row rows[] = {
      {"1234567890", 0.0},
      {"qwertyuiop", 0.5},
      {"asdfghjkl", 0.75},
      {"zxcvbnm", 1.25},
  };
  std::map<char, std::string> adjacency;
  for (int r = 0; r < 4; ++r) {
    for (int i = 0; rows[r].keys[i]; ++i) {
      const char key = rows[r].keys[i];
      const double x = rows[r].offset + i;
      std::string neighbors;
      for (int s = 0; s < 4; ++s) {
        if (std::abs(r - s) > 1) continue;
        for (int j = 0; rows[s].keys[j]; ++j) {
          const char other = rows[s].keys[j];
          if (other == key) continue;
          const double dx = std::abs(rows[s].offset + j - x);
          if (dx <= 1.0 + 1e-9) neighbors.push_back(other);
        }
      }
      adjacency[key] = std::move(neighbors);
    }
  }
  return adjacency;
}

OperatorSet OperatorSet::defaults() {
  OperatorSet ops;
  ops.enabled = {Op::inner_shuffle, Op::truncate, Op::keyboard_typo, Op::natural_typo};
  ops.natural_typos = parse_substitution_table(assets::natural_typos);
  ops.keyboard_adjacency = qwerty_adjacency();
  ops.phonetic = parse_substitution_table(assets::phonetic_map);
  ops.visual = parse_substitution_table(assets::visual_map);
  return ops;
}

bool OperatorSet::is_enabled(Op op) const {
  return std::find(enabled.begin(), enabled.end(), op) != enabled.end();
}

std::size_t perturbation_budget(double pr_per, std::size_t token_count) {
  return std::max<std::size_t>(1, round_half_up(pr_per * static_cast<double>(token_count)));
}

std::string inner_shuffle(std::string_view token, RngStream& rng) {
  if (token.size() <= 3) return std::string(token);
  std::string out(token);
  const std::size_t lo = 1;
  const std::size_t hi = out.size() - 1;  // interior is [lo, hi)

  bool uniform = true;
  for (std::size_t i = lo + 1; i < hi; ++i) {
    if (out[i] != out[lo]) {
      uniform = false;
      break;
    }
  }
  if (uniform) return out;  // no differing permutation exists

  for (std::size_t i = hi; i > lo + 1; --i) {
    std::swap(out[i - 1], out[lo + rng.uniform_index(i - lo)]);
  }
  if (out == token) {
    // Force a difference: swap the first two distinct interior characters.
    for (std::size_t i = lo; i + 1 < hi; ++i) {
      if (out[i] != out[i + 1]) {
        std::swap(out[i], out[i + 1]);
        break;
      }
    }
  }
  return out;
}

std::string truncate(std::string_view token, RngStream& rng) {
  if (token.size() <= 3) return std::string(token);
  const std::size_t count = 1 + rng.uniform_index(3);
  const bool from_front = rng.uniform_index(2) == 0;
  return std::string(from_front ? token.substr(count) : token.substr(0, token.size() - count));
}

std::string keyboard_typo(std::string_view token, const std::map<char, std::string>& adjacency,
                          RngStream& rng) {
  std::vector<std::size_t> mappable;
  for (std::size_t i = 0; i < token.size(); ++i) {
    auto it = adjacency.find(to_lower(token[i]));
    if (it != adjacency.end() && !it->second.empty()) mappable.push_back(i);
  }
  if (mappable.empty()) {
    log::debug("keyboard_typo: no mappable character in \"" + std::string(token) + "\"");
    return std::string(token);
  }
  std::string out(token);
  const std::size_t at = mappable[rng.uniform_index(mappable.size())];
  const std::string& neighbors = adjacency.at(to_lower(out[at]));
  char replacement = neighbors[rng.uniform_index(neighbors.size())];
  if (is_upper(out[at]) && is_alpha(replacement)) replacement = to_upper(replacement);
  out[at] = replacement;
  return out;
}

std::string keyboard_typo(std::string_view token, RngStream& rng) {
  static const std::map<char, std::string> adjacency = qwerty_adjacency();
  return keyboard_typo(token, adjacency, rng);
}

std::string natural_typo(std::string_view token, const SubstitutionTable& table,
                         const std::map<char, std::string>& adjacency, RngStream& rng) {
  auto it = table.find(lowercase(token));
  if (it == table.end()) return keyboard_typo(token, adjacency, rng);
  const std::vector<std::string>& options = it->second;
  std::string out = options[rng.uniform_index(options.size())];
  if (!out.empty() && !token.empty() && is_upper(token.front())) out[0] = to_upper(out[0]);
  return out;
}

std::string punctuation_insert(std::string_view token, RngStream& rng) {
  const char mark = kPunctuation[rng.uniform_index(kPunctuation.size())];
  const std::size_t run = 1 + rng.uniform_index(3);
  const bool prepend = rng.uniform_index(2) == 0;
  std::string affix(run, mark);
  return prepend ? affix + std::string(token) : std::string(token) + affix;
}

std::string similarity_swap(std::string_view token, SimilarityMode mode,
                            const SubstitutionTable& table, RngStream& rng) {
  if (table.empty()) {
    throw ConfigError(std::string("similarity_swap: no ") +
                      (mode == SimilarityMode::phonetic ? "phonetic" : "visual") +
                      " table loaded");
  }
  const std::string folded = lowercase(token);

  // All (position, key) occurrences; one is chosen uniformly.
  std::vector<std::pair<std::size_t, const SubstitutionTable::value_type*>> matches;
  for (const auto& entry : table) {
    const std::string& key = entry.first;
    if (key.empty() || key.size() > folded.size()) continue;
    for (std::size_t at = 0; (at = folded.find(key, at)) != std::string::npos; ++at) {
      matches.emplace_back(at, &entry);
    }
  }
  if (matches.empty()) {
    log::debug("similarity_swap: no applicable key for \"" + std::string(token) + "\"");
    return std::string(token);
  }
  const auto& [at, entry] = matches[rng.uniform_index(matches.size())];
  const std::string& key = entry->first;
  std::string replacement = entry->second[rng.uniform_index(entry->second.size())];
  if (is_upper(token[at]) && !replacement.empty() && is_alpha(replacement[0])) {
    replacement[0] = to_upper(replacement[0]);
  }
  std::string out(token);
  out.replace(at, key.size(), replacement);
  return out;
}

namespace {

std::string apply_op(Op op, std::string_view token, const OperatorSet& ops, RngStream& rng) {
  switch (op) {
    case Op::inner_shuffle: return inner_shuffle(token, rng);
    case Op::truncate: return truncate(token, rng);
    case Op::keyboard_typo: return keyboard_typo(token, ops.keyboard_adjacency, rng);
    case Op::natural_typo:
      return natural_typo(token, ops.natural_typos, ops.keyboard_adjacency, rng);
    case Op::punctuation_insert: return punctuation_insert(token, rng);
    case Op::phonetic_swap:
      return similarity_swap(token, SimilarityMode::phonetic, ops.phonetic, rng);
    case Op::visual_swap: return similarity_swap(token, SimilarityMode::visual, ops.visual, rng);
  }
  throw ConfigError("unhandled operator");
}

}  // namespace

std::string perturb_token(std::string_view token, const OperatorSet& ops, RngStream& rng) {
  if (ops.enabled.empty()) throw ConfigError("perturb_token: no operators enabled");
  std::vector<Op> order = ops.enabled;
  rng.shuffle(order);
  for (Op op : order) {
    std::string result = apply_op(op, token, ops, rng);
    if (result != token) return result;
  }
  log::debug("perturb_token: all operators left \"" + std::string(token) + "\" unchanged");
  return std::string(token);
}

Candidate init_candidate(std::shared_ptr<const corpus::TokenizedDocument> doc, double pr_per,
                         const OperatorSet& ops, RngStream& rng) {
  const std::size_t budget = perturbation_budget(pr_per, doc->token_count());
  std::vector<std::size_t> pool = doc->unprotected_indices();
  if (pool.size() < budget) {
    throw DataError("too few unprotected tokens (" + std::to_string(pool.size()) + " < budget " +
                    std::to_string(budget) + ")");
  }
  // Walking a shuffled pool selects uniformly without replacement and gives
  // fresh indices when an operator leaves a token unchanged.
  rng.shuffle(pool);
  Candidate candidate;
  candidate.base = std::move(doc);
  for (std::size_t index : pool) {
    if (candidate.overlay.size() == budget) break;
    const std::string& original = candidate.base->tokens[index].text;
    std::string perturbed = perturb_token(original, ops, rng);
    if (perturbed != original) candidate.overlay[index] = std::move(perturbed);
  }
  if (candidate.overlay.size() < budget) {
    throw DataError("too few perturbable tokens: budget " + std::to_string(budget) + ", managed " +
                    std::to_string(candidate.overlay.size()));
  }
  return candidate;
}

std::vector<Candidate> init_population(std::shared_ptr<const corpus::TokenizedDocument> doc,
                                       double pr_per, const OperatorSet& ops,
                                       std::size_t population_size, RngStream& rng) {
  std::vector<Candidate> population;
  population.reserve(population_size);
  for (std::size_t i = 0; i < population_size; ++i) {
    population.push_back(init_candidate(doc, pr_per, ops, rng));
  }
  return population;
}

void validate_candidate(const Candidate& candidate) {
  if (!candidate.base) throw Error("candidate has no base document");
  for (const auto& [index, text] : candidate.overlay) {
    if (index >= candidate.base->token_count()) {
      throw Error("overlay index " + std::to_string(index) + " out of range");
    }
    if (candidate.base->tokens[index].is_protected) {
      throw Error("overlay touches protected token " + std::to_string(index));
    }
    if (text == candidate.base->tokens[index].text) {
      throw Error("overlay value equals base token at " + std::to_string(index));
    }
  }
}

}  // namespace garag::perturb
