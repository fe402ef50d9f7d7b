#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "garag/corpus.hpp"
#include "garag/objective.hpp"
#include "garag/pareto.hpp"
#include "garag/perturb.hpp"
#include "garag/scoring.hpp"

namespace garag::testing {

inline corpus::TripleInstance make_instance(std::string id, std::string question,
                                            std::string document,
                                            std::vector<std::string> answers) {
  corpus::TripleInstance instance;
  instance.id = std::move(id);
  instance.question = std::move(question);
  instance.document = std::move(document);
  instance.answers = std::move(answers);
  return instance;
}

inline std::shared_ptr<corpus::TokenizedDocument> tokenize_shared(std::string_view text) {
  return std::make_shared<corpus::TokenizedDocument>(corpus::tokenize(text));
}

/// Independent O(n^2) dominance oracle: peel non-dominated layers.
inline std::vector<std::size_t> brute_force_ranks(const std::vector<ObjectiveVector>& vectors) {
  const std::size_t n = vectors.size();
  std::vector<std::size_t> ranks(n, 0);
  std::vector<bool> removed(n, false);
  std::size_t assigned = 0;
  std::size_t rank = 0;
  while (assigned < n) {
    std::vector<std::size_t> front;
    for (std::size_t i = 0; i < n; ++i) {
      if (removed[i]) continue;
      bool dominated = false;
      for (std::size_t j = 0; j < n && !dominated; ++j) {
        if (!removed[j] && pareto::dominates(vectors[j], vectors[i])) dominated = true;
      }
      if (!dominated) front.push_back(i);
    }
    for (std::size_t i : front) {
      ranks[i] = rank;
      removed[i] = true;
      ++assigned;
    }
    ++rank;
  }
  return ranks;
}

/// Relevance stub returning a fixed baseline for one pinned text and a fixed
/// perturbed value for everything else.
class PinnedRelevance : public scoring::RelevanceScorer {
 public:
  PinnedRelevance(std::string clean_text, double clean_score, double other_score)
      : clean_text_(std::move(clean_text)), clean_(clean_score), other_(other_score) {}

  double score(std::string_view document, std::string_view) override {
    ++calls;
    return document == clean_text_ ? clean_ : other_;
  }
  std::string id() const override { return "pinned-relevance"; }

  int calls = 0;

 private:
  std::string clean_text_;
  double clean_;
  double other_;
};

class PinnedGeneration : public scoring::GenerationScorer {
 public:
  PinnedGeneration(std::string clean_text, double clean_logprob, double other_logprob,
                   std::string clean_prediction, std::string other_prediction)
      : clean_text_(std::move(clean_text)),
        clean_lp_(clean_logprob),
        other_lp_(other_logprob),
        clean_pred_(std::move(clean_prediction)),
        other_pred_(std::move(other_prediction)) {}

  double answer_logprob(std::string_view document, std::string_view, std::string_view) override {
    ++logprob_calls;
    return document == clean_text_ ? clean_lp_ : other_lp_;
  }
  std::string generate(std::string_view document, std::string_view) override {
    ++generate_calls;
    return document == clean_text_ ? clean_pred_ : other_pred_;
  }
  std::string id() const override { return "pinned-generation"; }

  int logprob_calls = 0;
  int generate_calls = 0;

 private:
  std::string clean_text_;
  double clean_lp_;
  double other_lp_;
  std::string clean_pred_;
  std::string other_pred_;
};

/// RAII temp directory under the system tmp path.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("garag_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace garag::testing
