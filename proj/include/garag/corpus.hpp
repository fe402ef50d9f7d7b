#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace garag::corpus {

/// One whitespace-delimited token with its byte span into the source text.
struct Token {
  std::string text;
  std::size_t begin = 0;  // byte offset, inclusive
  std::size_t end = 0;    // byte offset, exclusive
  bool is_protected = false;
};

/// Whitespace-token view of a document. Immutable after answer spans are
/// located; safe to share across attack workers.
struct TokenizedDocument {
  std::string source;
  std::vector<Token> tokens;

  std::size_t token_count() const { return tokens.size(); }
  std::size_t unprotected_count() const;
  std::vector<std::size_t> unprotected_indices() const;
};

/// Half-open token range [start_token, end_token) matching one answer string.
struct TokenSpan {
  std::size_t start_token = 0;
  std::size_t end_token = 0;
  std::string matched_answer;
};

/// One (query, clean document, gold answers) attack target. Baseline scores
/// are computed once per run and then frozen.
struct TripleInstance {
  std::string id;
  std::string question;
  std::string document;
  std::vector<std::string> answers;

  std::optional<double> baseline_relevance;
  std::optional<double> baseline_answer_logprob;
  std::optional<std::string> baseline_prediction;
};

/// Splits text into maximal runs of non-whitespace bytes. Punctuation stays
/// attached to its token. Empty text yields zero tokens.
TokenizedDocument tokenize(std::string_view text);

/// Case-folded token with leading/trailing punctuation stripped; the key used
/// for answer matching and query-overlap checks.
std::string normalize_token(std::string_view token);

/// Token spans whose normalized text equals `answer`, all occurrences,
/// non-overlapping left to right. Does not mark anything.
std::vector<TokenSpan> find_token_spans(const TokenizedDocument& doc, std::string_view answer);

/// Finds every occurrence of every answer and marks those tokens protected.
/// Zero matches is valid (logged); the instance stays attackable.
std::vector<TokenSpan> locate_answer_spans(TokenizedDocument& doc,
                                           const std::vector<std::string>& answers);

/// Rebuilds the document text with each overlaid token's byte span replaced
/// by its perturbed text; all other bytes (including inter-token whitespace)
/// are preserved exactly. Throws on an out-of-range index.
std::string assemble(const TokenizedDocument& base,
                     const std::map<std::size_t, std::string>& overlay);

/// Reads JSON-lines triples: one object per line with fields id, question,
/// document, answers. Errors name the offending line. Duplicate ids are
/// rejected.
std::vector<TripleInstance> load_triples(const std::string& path,
                                         std::optional<std::size_t> limit = std::nullopt);

}  // namespace garag::corpus
