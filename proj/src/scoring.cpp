#include "garag/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "garag/assets/qa_template.hpp"
#include "garag/error.hpp"
#include "garag/log.hpp"

namespace garag::scoring {
namespace {

constexpr char kSep = '\x1f';

void require_finite(double value, const char* what, const std::string& instance_id) {
  if (!std::isfinite(value)) {
    throw ScorerError(std::string(what) + " is not finite", instance_id);
  }
}

/// Backend failures surface with the instance they broke on attached.
template <typename Fn>
auto with_instance_id(const std::string& id, Fn&& fn) {
  try {
    return fn();
  } catch (const ScorerError& e) {
    if (e.instance_id().empty()) throw ScorerError(e.what(), id);
    throw;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw ScorerError(e.what(), id);
  }
}

double ratio_from_log_delta(double log_delta, const char* what, const std::string& instance_id) {
  const double value = std::exp(log_delta);
  if (!std::isfinite(value) || value <= 0.0) {
    throw ScorerError(std::string(what) + " ratio out of range (log delta " +
                          std::to_string(log_delta) + ")",
                      instance_id);
  }
  return value;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// Distinct normalized query tokens, insertion order preserved.
std::vector<std::string> query_keys(std::string_view query) {
  const corpus::TokenizedDocument q = corpus::tokenize(query);
  std::vector<std::string> keys;
  std::set<std::string> seen;
  for (const corpus::Token& token : q.tokens) {
    std::string key = corpus::normalize_token(token.text);
    if (!key.empty() && seen.insert(key).second) keys.push_back(std::move(key));
  }
  return keys;
}

std::vector<std::string> token_keys(const corpus::TokenizedDocument& doc) {
  std::vector<std::string> keys;
  keys.reserve(doc.tokens.size());
  for (const corpus::Token& token : doc.tokens) keys.push_back(corpus::normalize_token(token.text));
  return keys;
}

}  // namespace

double ScoreCache::get_or_compute(const std::string& key, const std::function<double()>& compute) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = values_.find(key);
    if (it != values_.end()) {
      ++hits_;
      return it->second;
    }
  }
  const double value = compute();
  std::lock_guard<std::mutex> lock(mutex_);
  auto [it, inserted] = values_.emplace(key, value);
  if (inserted) ++misses_;
  return it->second;
}

std::size_t ScoreCache::hits() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return hits_;
}

std::size_t ScoreCache::misses() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return misses_;
}

void ensure_baselines(corpus::TripleInstance& instance, const ScorerHandles& scorers) {
  if (!instance.baseline_relevance) {
    const double r = with_instance_id(instance.id, [&]() {
      return scorers.relevance->score(instance.document, instance.question);
    });
    require_finite(r, "baseline relevance", instance.id);
    instance.baseline_relevance = r;
  }
  if (!instance.baseline_answer_logprob) {
    const double lp = with_instance_id(instance.id, [&]() {
      return scorers.generation->answer_logprob(instance.document, instance.question,
                                                instance.answers.front());
    });
    require_finite(lp, "baseline answer logprob", instance.id);
    instance.baseline_answer_logprob = lp;
  }
  if (!instance.baseline_prediction) {
    instance.baseline_prediction = with_instance_id(instance.id, [&]() {
      return scorers.generation->generate(instance.document, instance.question);
    });
  }
}

namespace {

double rsr_for_text(const std::string& text, const corpus::TripleInstance& instance,
                    const ScorerHandles& scorers, ScoreCache* cache) {
  if (!instance.baseline_relevance) {
    throw Error("rsr: baseline relevance not cached for instance " + instance.id);
  }
  const auto compute = [&]() {
    const double r = with_instance_id(
        instance.id, [&]() { return scorers.relevance->score(text, instance.question); });
    require_finite(r, "relevance score", instance.id);
    return r;
  };
  const double perturbed =
      cache ? cache->get_or_compute(
                  "rel|" + scorers.relevance->id() + "|" + instance.question + kSep + text, compute)
            : compute();
  return ratio_from_log_delta(*instance.baseline_relevance - perturbed, "rsr", instance.id);
}

double gpr_for_text(const std::string& text, const corpus::TripleInstance& instance,
                    const ScorerHandles& scorers, ScoreCache* cache) {
  if (!instance.baseline_answer_logprob) {
    throw Error("gpr: baseline answer logprob not cached for instance " + instance.id);
  }
  const std::string& answer = instance.answers.front();
  const auto compute = [&]() {
    const double lp = with_instance_id(instance.id, [&]() {
      return scorers.generation->answer_logprob(text, instance.question, answer);
    });
    require_finite(lp, "answer logprob", instance.id);
    return lp;
  };
  const double perturbed =
      cache ? cache->get_or_compute("gen|" + scorers.generation->id() + "|" + instance.question +
                                        kSep + answer + kSep + text,
                                    compute)
            : compute();
  return ratio_from_log_delta(perturbed - *instance.baseline_answer_logprob, "gpr", instance.id);
}

}  // namespace

double rsr(const perturb::Candidate& candidate, const corpus::TripleInstance& instance,
           const ScorerHandles& scorers, ScoreCache* cache) {
  return rsr_for_text(candidate.text(), instance, scorers, cache);
}

double gpr(const perturb::Candidate& candidate, const corpus::TripleInstance& instance,
           const ScorerHandles& scorers, ScoreCache* cache) {
  return gpr_for_text(candidate.text(), instance, scorers, cache);
}

void evaluate_population(std::vector<perturb::Candidate>& population,
                         const corpus::TripleInstance& instance, const ScorerHandles& scorers,
                         ScoreCache* cache) {
  for (perturb::Candidate& candidate : population) {
    if (candidate.objectives) continue;
    const std::string text = candidate.text();
    ObjectiveVector objectives;
    objectives.rsr = rsr_for_text(text, instance, scorers, cache);
    objectives.gpr = gpr_for_text(text, instance, scorers, cache);
    candidate.objectives = objectives;
  }
}

// --- LexicalRelevance --------------------------------------------------------

namespace {

std::unordered_map<std::string, double> trigram_counts(std::string_view text) {
  std::unordered_map<std::string, double> counts;
  if (text.size() < 3) return counts;
  const std::string folded = lowercase(text);
  for (std::size_t i = 0; i + 3 <= folded.size(); ++i) {
    counts[folded.substr(i, 3)] += 1.0;
  }
  return counts;
}

}  // namespace

void LexicalRelevance::fit(const std::vector<std::string>& texts) {
  doc_freq_.clear();
  fitted_count_ = texts.size();
  for (const std::string& text : texts) {
    const auto counts = trigram_counts(text);
    for (const auto& [gram, count] : counts) {
      (void)count;
      ++doc_freq_[gram];
    }
  }
}

double LexicalRelevance::idf(const std::string& gram) const {
  if (fitted_count_ == 0) return 1.0;
  auto it = doc_freq_.find(gram);
  const std::size_t df = it == doc_freq_.end() ? 0 : it->second;
  return std::log((1.0 + static_cast<double>(fitted_count_)) / (1.0 + static_cast<double>(df))) +
         1.0;
}

double LexicalRelevance::score(std::string_view document, std::string_view query) {
  const auto doc_counts = trigram_counts(document);
  const auto query_counts = trigram_counts(query);
  if (doc_counts.empty() || query_counts.empty()) return 0.0;

  double doc_norm = 0.0;
  for (const auto& [gram, tf] : doc_counts) {
    const double w = tf * idf(gram);
    doc_norm += w * w;
  }
  double query_norm = 0.0;
  double dot = 0.0;
  for (const auto& [gram, tf] : query_counts) {
    const double w = tf * idf(gram);
    query_norm += w * w;
    auto it = doc_counts.find(gram);
    if (it != doc_counts.end()) dot += w * it->second * idf(gram);
  }
  if (doc_norm <= 0.0 || query_norm <= 0.0) return 0.0;
  return dot / (std::sqrt(doc_norm) * std::sqrt(query_norm));
}

// --- WindowReader ------------------------------------------------------------

double WindowReader::answer_logprob(std::string_view document, std::string_view query,
                                    std::string_view answer) {
  const corpus::TokenizedDocument doc = corpus::tokenize(document);
  const std::vector<std::string> keys = token_keys(doc);
  const std::vector<std::string> q_keys = query_keys(query);
  const std::vector<corpus::TokenSpan> spans = corpus::find_token_spans(doc, answer);
  const double w = static_cast<double>(window_);

  double total = 0.0;
  for (const corpus::TokenSpan& span : spans) {
    const std::size_t lo = span.start_token >= window_ ? span.start_token - window_ : 0;
    const std::size_t hi = std::min(keys.size(), span.end_token + window_);
    for (const std::string& q_key : q_keys) {
      std::size_t matched = 0;
      for (std::size_t j = lo; j < hi; ++j) {
        if (j >= span.start_token && j < span.end_token) continue;
        if (keys[j] == q_key) ++matched;
      }
      total += std::min(static_cast<double>(matched), w);
    }
  }
  const double occurrences = static_cast<double>(std::max<std::size_t>(spans.size(), 1));
  const double denom = 1.0 + w * occurrences * static_cast<double>(q_keys.size());
  return std::log((1.0 + total) / denom);
}

std::string WindowReader::generate(std::string_view document, std::string_view query) {
  const corpus::TokenizedDocument doc = corpus::tokenize(document);
  const std::vector<std::string> keys = token_keys(doc);
  const std::vector<std::string> q_keys = query_keys(query);
  const std::set<std::string> q_set(q_keys.begin(), q_keys.end());

  double best_score = -1.0;
  std::size_t best_index = keys.size();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (keys[i].empty() || q_set.count(keys[i]) > 0) continue;  // query words never answer
    const std::size_t lo = i >= window_ ? i - window_ : 0;
    const std::size_t hi = std::min(keys.size(), i + window_ + 1);
    double score = 0.0;
    for (const std::string& q_key : q_keys) {
      std::size_t matched = 0;
      for (std::size_t j = lo; j < hi; ++j) {
        if (j == i) continue;
        if (keys[j] == q_key) ++matched;
      }
      score += std::min(static_cast<double>(matched), static_cast<double>(window_));
    }
    if (score > best_score) {
      best_score = score;
      best_index = i;
    }
  }
  if (best_index == keys.size()) return "";
  // Return the raw token with boundary punctuation stripped, casing kept.
  std::string_view token = doc.tokens[best_index].text;
  std::size_t begin = 0;
  std::size_t end = token.size();
  while (begin < end && std::ispunct(static_cast<unsigned char>(token[begin]))) ++begin;
  while (end > begin && std::ispunct(static_cast<unsigned char>(token[end - 1]))) --end;
  return std::string(token.substr(begin, end - begin));
}

ScorerHandles make_surrogate_scorers(std::size_t window) {
  ScorerHandles handles;
  handles.relevance = std::make_shared<LexicalRelevance>();
  handles.generation = std::make_shared<WindowReader>(window);
  return handles;
}

// --- prompt template ---------------------------------------------------------

std::string_view qa_template() {
  std::string_view tpl(assets::qa_template);
  // The asset file ends with a newline the prompt should not carry.
  while (!tpl.empty() && (tpl.back() == '\n' || tpl.back() == '\r')) tpl.remove_suffix(1);
  return tpl;
}

std::string render_prompt(std::string_view document, std::string_view question) {
  std::string prompt(qa_template());
  const auto fill = [&prompt](std::string_view placeholder, std::string_view value) {
    const std::size_t at = prompt.find(placeholder);
    if (at != std::string::npos) prompt.replace(at, placeholder.size(), value);
  };
  fill("{Document}", document);
  fill("{Question}", question);
  return prompt;
}

}  // namespace garag::scoring
