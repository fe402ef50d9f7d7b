#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "garag/corpus.hpp"
#include "garag/objective.hpp"
#include "garag/perturb.hpp"

namespace garag::scoring {

/// Retrieval side: a relevance score r(d, q). Higher means more relevant.
/// Implementations must be deterministic for the duration of a run and
/// tolerate concurrent calls.
class RelevanceScorer {
 public:
  virtual ~RelevanceScorer() = default;
  virtual double score(std::string_view document, std::string_view query) = 0;
  virtual std::string id() const = 0;
};

/// Reader side: log p(answer | document, query) plus free-form generation.
class GenerationScorer {
 public:
  virtual ~GenerationScorer() = default;
  virtual double answer_logprob(std::string_view document, std::string_view query,
                                std::string_view answer) = 0;
  virtual std::string generate(std::string_view document, std::string_view query) = 0;
  virtual std::string id() const = 0;
};

struct ScorerHandles {
  std::shared_ptr<RelevanceScorer> relevance;
  std::shared_ptr<GenerationScorer> generation;
};

/// Memoizes scorer calls by (scorer id, content) key. Safe for concurrent
/// read/write; a hit returns the exact previously computed value.
class ScoreCache {
 public:
  double get_or_compute(const std::string& key, const std::function<double()>& compute);

  std::size_t hits() const;
  std::size_t misses() const;

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, double> values_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

/// Computes and freezes the clean-document baselines (relevance, answer
/// log-probability, prediction) if not already set. The first answer is the
/// canonical one for probability purposes.
void ensure_baselines(corpus::TripleInstance& instance, const ScorerHandles& scorers);

/// Relevance Score Ratio exp(r(d,q) - r(d',q)), computed in log space.
/// Values below 1 mean the perturbed document out-scores the clean one.
double rsr(const perturb::Candidate& candidate, const corpus::TripleInstance& instance,
           const ScorerHandles& scorers, ScoreCache* cache = nullptr);

/// Generation Probability Ratio exp(logp(a|d',q) - logp(a|d,q)), log space.
double gpr(const perturb::Candidate& candidate, const corpus::TripleInstance& instance,
           const ScorerHandles& scorers, ScoreCache* cache = nullptr);

/// Annotates every un-evaluated candidate with its ObjectiveVector.
/// Identical candidate texts hit the cache; order does not affect values.
void evaluate_population(std::vector<perturb::Candidate>& population,
                         const corpus::TripleInstance& instance, const ScorerHandles& scorers,
                         ScoreCache* cache = nullptr);

// --- offline surrogates ------------------------------------------------------

/// Cosine similarity of L2-normalized character-trigram TF-IDF vectors.
/// fit() learns IDF weights from a corpus; unfitted, all weights are 1.
/// Perturbing query-overlapping trigrams lowers the score; shrinking
/// non-overlapping trigram mass raises it.
class LexicalRelevance : public RelevanceScorer {
 public:
  void fit(const std::vector<std::string>& texts);

  double score(std::string_view document, std::string_view query) override;
  std::string id() const override { return "lexical-trigram"; }

 private:
  double idf(const std::string& gram) const;
  std::unordered_map<std::string, std::size_t> doc_freq_;
  std::size_t fitted_count_ = 0;
};

/// Window-overlap reader. Grounding score: for each occurrence of the answer
/// and each distinct query token, count the query token's intact occurrences
/// within `window` tokens of the answer (capped at `window`); the score is
/// log((1 + total) / (1 + window * occurrences * |query tokens|)), with
/// absent answers scored at the smoothing floor. generate() returns the
/// non-query token whose surrounding window matches the most query tokens.
class WindowReader : public GenerationScorer {
 public:
  explicit WindowReader(std::size_t window = 10) : window_(window) {}

  double answer_logprob(std::string_view document, std::string_view query,
                        std::string_view answer) override;
  std::string generate(std::string_view document, std::string_view query) override;
  std::string id() const override { return "window-reader"; }

  std::size_t window() const { return window_; }

 private:
  std::size_t window_;
};

ScorerHandles make_surrogate_scorers(std::size_t window = 10);

// --- remote scorers ----------------------------------------------------------

struct RemoteConfig {
  std::string base_url;        // e.g. http://localhost:8080
  int timeout_ms = 30000;
  int retries = 2;             // additional attempts after the first
  std::string api_key;         // sent as a bearer token when non-empty
};

/// POST /relevance with {"context","question"}; expects {"score": real}.
class RemoteRelevance : public RelevanceScorer {
 public:
  explicit RemoteRelevance(RemoteConfig config) : config_(std::move(config)) {}
  double score(std::string_view document, std::string_view query) override;
  std::string id() const override { return "remote:" + config_.base_url; }

 private:
  RemoteConfig config_;
};

/// POST /answer_logprob with {"context","question","answer","prompt"};
/// expects {"token_logprobs": [...]}, which are summed. POST /generate with
/// {"context","question","prompt"}; expects {"text"}. The prompt field is
/// the filled QA template.
class RemoteGeneration : public GenerationScorer {
 public:
  explicit RemoteGeneration(RemoteConfig config) : config_(std::move(config)) {}
  double answer_logprob(std::string_view document, std::string_view query,
                        std::string_view answer) override;
  std::string generate(std::string_view document, std::string_view query) override;
  std::string id() const override { return "remote:" + config_.base_url; }

 private:
  RemoteConfig config_;
};

/// Cheap reachability probe against /relevance; throws ConfigError when the
/// endpoint cannot be reached.
void probe_remote(const RemoteConfig& config);

/// The zero-shot QA prompt template with {Document} and {Question}
/// placeholders, as shipped in assets/qa_template.txt.
std::string_view qa_template();

/// Fills the template with a document and question.
std::string render_prompt(std::string_view document, std::string_view question);

}  // namespace garag::scoring
