#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "garag/corpus.hpp"
#include "garag/objective.hpp"
#include "garag/rng.hpp"

namespace garag::perturb {

enum class Op {
  inner_shuffle,
  truncate,
  keyboard_typo,
  natural_typo,
  punctuation_insert,
  phonetic_swap,
  visual_swap,
};

const char* op_name(Op op);
Op op_from_name(std::string_view name);  // throws ConfigError on unknown names
std::vector<std::string> all_op_names();

/// key -> candidate replacements; used for natural typos and for the
/// phonetic/visual similarity tables. Ordered map for deterministic draws.
using SubstitutionTable = std::map<std::string, std::vector<std::string>, std::less<>>;

/// Parses the bundled "key: r1,r2" format. Values must be single words.
SubstitutionTable parse_substitution_table(std::string_view content);
SubstitutionTable load_substitution_table(const std::string& path);

/// QWERTY adjacency including the digit row ('u' neighbors '7' and '8').
std::map<char, std::string> qwerty_adjacency();

/// The transformation toolbox: which operators are enabled plus the lookup
/// tables they draw from.
struct OperatorSet {
  std::vector<Op> enabled;
  SubstitutionTable natural_typos;
  std::map<char, std::string> keyboard_adjacency;
  SubstitutionTable phonetic;
  SubstitutionTable visual;

  /// Typo suite (inner shuffle, truncate, keyboard typo, natural typo) with
  /// the bundled tables.
  static OperatorSet defaults();

  bool is_enabled(Op op) const;
};

/// An adversarial document as a sparse overlay of perturbed tokens on a
/// shared base document. Overlay keys never touch protected indices and
/// every overlay value differs from the base token.
struct Candidate {
  std::shared_ptr<const corpus::TokenizedDocument> base;
  std::map<std::size_t, std::string> overlay;
  std::optional<ObjectiveVector> objectives;

  std::string text() const { return corpus::assemble(*base, overlay); }
};

/// Number of tokens to perturb: max(1, round(pr_per * token_count)),
/// half-up rounding.
std::size_t perturbation_budget(double pr_per, std::size_t token_count);

inline std::size_t round_half_up(double x) {
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

// --- low-level operators ---------------------------------------------------
// Each returns the input unchanged when the token is ineligible.

/// Permutes the interior characters; first and last stay fixed. Tokens of
/// three or fewer characters are ineligible.
std::string inner_shuffle(std::string_view token, RngStream& rng);

/// Drops 1-3 characters from a randomly chosen end. Tokens of three or fewer
/// characters are ineligible; the result is never empty.
std::string truncate(std::string_view token, RngStream& rng);

/// Replaces exactly one character with a keyboard-adjacent one; length
/// preserved. Unchanged (logged) when no character is in the map.
std::string keyboard_typo(std::string_view token, const std::map<char, std::string>& adjacency,
                          RngStream& rng);
std::string keyboard_typo(std::string_view token, RngStream& rng);

/// Replaces the token with a known human misspelling, restoring the casing
/// of the first letter. Falls back to keyboard_typo on a table miss.
std::string natural_typo(std::string_view token, const SubstitutionTable& table,
                         const std::map<char, std::string>& adjacency, RngStream& rng);

/// Prepends or appends a run of 1-3 identical punctuation characters drawn
/// from , . ' ! ? ;
std::string punctuation_insert(std::string_view token, RngStream& rng);

enum class SimilarityMode { phonetic, visual };

/// Swaps one character or character group for a table-listed similar glyph
/// or sound. Unchanged (logged) when no key applies.
std::string similarity_swap(std::string_view token, SimilarityMode mode,
                            const SubstitutionTable& table, RngStream& rng);

/// Applies one enabled operator chosen uniformly at random; when the result
/// equals the input, retries the remaining operators before giving up and
/// returning the input (logged).
std::string perturb_token(std::string_view token, const OperatorSet& ops, RngStream& rng);

// --- candidate construction -------------------------------------------------

/// Perturbs B distinct unprotected tokens chosen uniformly without
/// replacement, redrawing indices whose perturbation came back unchanged.
/// Throws DataError when the document has too few perturbable tokens.
Candidate init_candidate(std::shared_ptr<const corpus::TokenizedDocument> doc, double pr_per,
                         const OperatorSet& ops, RngStream& rng);

std::vector<Candidate> init_population(std::shared_ptr<const corpus::TokenizedDocument> doc,
                                       double pr_per, const OperatorSet& ops,
                                       std::size_t population_size, RngStream& rng);

/// Construction invariants: no protected overlay keys, every overlay value
/// differs from its base token, all keys in range. Throws on violation.
void validate_candidate(const Candidate& candidate);

}  // namespace garag::perturb
