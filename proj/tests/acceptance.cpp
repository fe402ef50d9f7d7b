#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "garag/cli.hpp"
#include "garag/engine.hpp"
#include "garag/error.hpp"
#include "garag/metrics.hpp"
#include "garag/pareto.hpp"
#include "garag/scoring.hpp"
#include "helpers.hpp"

using namespace garag;
using namespace garag::testing;
using nlohmann::json;

namespace {

/// Prints one [acceptance] PASS/FAIL line per criterion, FAIL when the case
/// unwinds through a failed REQUIRE.
class Criterion {
 public:
  explicit Criterion(std::string name) : name_(std::move(name)) {}
  ~Criterion() {
    std::printf("[acceptance] %-28s %s\n", name_.c_str(), passed_ ? "PASS" : "FAIL");
    std::fflush(stdout);
  }
  void done() { passed_ = true; }

 private:
  std::string name_;
  bool passed_ = false;
};

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string data_path(const char* name) { return std::string(GARAG_DATA_DIR) + "/" + name; }

/// Sequential library-level run over a dataset, mirroring the CLI: unfitted
/// surrogate scorers, per-instance seed = master ^ ordinal, shared cache.
std::vector<engine::AttackOutcome> run_dataset(const std::string& path, double pr_per,
                                               std::uint64_t seed) {
  auto instances = corpus::load_triples(path);
  const scoring::ScorerHandles scorers = scoring::make_surrogate_scorers();
  scoring::ScoreCache cache;
  engine::AttackConfig config;
  config.pr_per = pr_per;
  std::vector<engine::AttackOutcome> outcomes;
  outcomes.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    engine::AttackConfig instance_config = config;
    instance_config.seed = seed ^ static_cast<std::uint64_t>(i);
    outcomes.push_back(engine::run_attack(instances[i], instance_config, scorers, &cache));
  }
  return outcomes;
}

const std::vector<engine::AttackOutcome>& seed42_toy_run() {
  static const std::vector<engine::AttackOutcome> outcomes =
      run_dataset(data_path("toy_corpus.jsonl"), 0.2, 42);
  return outcomes;
}

/// Crowding-distance oracle: literal per-objective accumulation, written
/// independently of the library implementation.
std::vector<double> crowding_oracle(const std::vector<ObjectiveVector>& front) {
  const std::size_t n = front.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> distance(n, 0.0);
  if (n <= 2) return std::vector<double>(n, inf);
  for (int axis = 0; axis < 2; ++axis) {
    const auto value = [&](std::size_t i) { return axis == 0 ? front[i].rsr : front[i].gpr; };
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
    distance[order.front()] = inf;
    distance[order.back()] = inf;
    const double range = value(order.back()) - value(order.front());
    if (range <= 0.0) continue;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (distance[order[i]] == inf) continue;
      distance[order[i]] += (value(order[i + 1]) - value(order[i - 1])) / range;
    }
  }
  return distance;
}

}  // namespace

TEST_CASE("pareto oracle equivalence") {
  Criterion criterion("pareto-oracle-equivalence");
  const auto start = std::chrono::steady_clock::now();

  RngStream rng(20240917);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(64);
    std::vector<ObjectiveVector> vectors;
    vectors.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      vectors.push_back(ObjectiveVector{
          2.0 * static_cast<double>(rng.uniform_index(1u << 20)) / static_cast<double>(1u << 20),
          2.0 * static_cast<double>(rng.uniform_index(1u << 20)) / static_cast<double>(1u << 20)});
    }
    const pareto::FrontAssignment assignment = pareto::non_dominated_sort(vectors);
    REQUIRE(assignment.rank == brute_force_ranks(vectors));

    // Crowding per front against the hand formula.
    const std::size_t front_count =
        1 + *std::max_element(assignment.rank.begin(), assignment.rank.end());
    for (std::size_t r = 0; r < front_count; ++r) {
      std::vector<ObjectiveVector> front;
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < n; ++i) {
        if (assignment.rank[i] == r) {
          front.push_back(vectors[i]);
          members.push_back(i);
        }
      }
      const std::vector<double> expected = crowding_oracle(front);
      for (std::size_t k = 0; k < members.size(); ++k) {
        const double got = assignment.crowding[members[k]];
        if (std::isinf(expected[k])) {
          REQUIRE(std::isinf(got));
        } else {
          REQUIRE(std::abs(got - expected[k]) <= 1e-12);
        }
      }
    }
  }
  REQUIRE(elapsed_seconds(start) < 5.0);
  criterion.done();
}

TEST_CASE("budget and protection sweep") {
  Criterion criterion("budget-protection-sweep");
  const auto start = std::chrono::steady_clock::now();

  auto instances = corpus::load_triples(data_path("budget_fixture.jsonl"));
  REQUIRE(instances.size() == 5);
  const scoring::ScorerHandles scorers = scoring::make_surrogate_scorers();

  std::size_t runs = 0;
  std::size_t candidates_checked = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    for (corpus::TripleInstance& instance : instances) {
      engine::AttackConfig config;
      config.seed = seed;

      const auto doc = corpus::tokenize(instance.document);
      const std::size_t budget = perturb::perturbation_budget(config.pr_per, doc.token_count());

      scoring::ScoreCache cache;
      const auto outcome = engine::run_attack(
          instance, config, scorers, &cache, [&](const engine::PopulationState& state) {
            const auto check_all = [&](const std::vector<perturb::Candidate>& pool) {
              for (const perturb::Candidate& candidate : pool) {
                REQUIRE(candidate.overlay.size() == budget);
                perturb::validate_candidate(candidate);  // throws on protected overlay
                ++candidates_checked;
              }
            };
            check_all(state.generation == 0 ? state.members : state.merged);
          });
      REQUIRE_FALSE(outcome.skipped);
      ++runs;
    }
  }
  REQUIRE(runs == 1000);
  REQUIRE(candidates_checked > 0);
  const double seconds = elapsed_seconds(start);
  std::printf("[acceptance]   swept %zu candidates across %zu runs in %.1fs\n",
              candidates_checked, runs, seconds);
  REQUIRE(seconds < 30.0);
  criterion.done();
}

TEST_CASE("objective identities") {
  Criterion criterion("objective-identities");

  // Clean-document identity through the surrogate scorers.
  auto instance = make_instance("id-1", "who copper lantern",
                                "stonemasons copper Marlowe lantern cobblestones", {"Marlowe"});
  const scoring::ScorerHandles surrogates = scoring::make_surrogate_scorers();
  scoring::ensure_baselines(instance, surrogates);
  perturb::Candidate clean;
  clean.base = tokenize_shared(instance.document);
  REQUIRE(scoring::rsr(clean, instance, surrogates) == 1.0);
  REQUIRE(scoring::gpr(clean, instance, surrogates) == 1.0);

  // Hand-substitution cases through pinned scorers.
  auto pinned_instance = make_instance("id-2", "q", "clean document body", {"a"});
  perturb::Candidate perturbed;
  perturbed.base = tokenize_shared(pinned_instance.document);
  perturbed.overlay[0] = "cl3an";

  const auto rsr_with = [&](double clean_score, double other_score) {
    pinned_instance.baseline_relevance.reset();
    scoring::ScorerHandles handles{
        std::make_shared<PinnedRelevance>(pinned_instance.document, clean_score, other_score),
        std::make_shared<PinnedGeneration>(pinned_instance.document, -1.0, -1.0, "a", "a")};
    scoring::ensure_baselines(pinned_instance, handles);
    return scoring::rsr(perturbed, pinned_instance, handles);
  };
  REQUIRE(std::abs(rsr_with(2.0, 1.0) - std::exp(1.0)) <= 1e-9);
  REQUIRE(std::abs(rsr_with(-0.5, 0.5) - std::exp(-1.0)) <= 1e-9);

  pinned_instance.baseline_answer_logprob.reset();
  scoring::ScorerHandles handles{
      std::make_shared<PinnedRelevance>(pinned_instance.document, 1.0, 1.0),
      std::make_shared<PinnedGeneration>(pinned_instance.document, -2.0, -4.0, "a", "b")};
  scoring::ensure_baselines(pinned_instance, handles);
  REQUIRE(std::abs(scoring::gpr(perturbed, pinned_instance, handles) - std::exp(-2.0)) <= 1e-9);
  criterion.done();
}

TEST_CASE("elitism monotonicity") {
  Criterion criterion("elitism-monotonicity");
  const auto& outcomes = seed42_toy_run();
  REQUIRE(outcomes.size() == 50);
  std::size_t rows_checked = 0;
  for (const engine::AttackOutcome& outcome : outcomes) {
    REQUIRE_FALSE(outcome.skipped);
    REQUIRE_FALSE(outcome.trace.empty());
    for (std::size_t i = 1; i < outcome.trace.size(); ++i) {
      REQUIRE(outcome.trace[i].min_rsr <= outcome.trace[i - 1].min_rsr);
      REQUIRE(outcome.trace[i].min_gpr <= outcome.trace[i - 1].min_gpr);
      ++rows_checked;
    }
  }
  REQUIRE(rows_checked > 0);
  criterion.done();
}

TEST_CASE("success flag consistency") {
  Criterion criterion("success-flag-consistency");
  const auto& outcomes = seed42_toy_run();
  std::size_t successes = 0;
  for (const engine::AttackOutcome& outcome : outcomes) {
    if (!outcome.success) continue;
    ++successes;
    REQUIRE(outcome.objectives.rsr < 1.0);
    REQUIRE_FALSE(metrics::exact_match(outcome.prediction, outcome.answers));
    REQUIRE(outcome.retrieval_success);
    REQUIRE(outcome.generation_flipped);
  }
  std::printf("[acceptance]   %zu early-stop successes re-verified\n", successes);
  REQUIRE(successes > 0);
  criterion.done();
}

TEST_CASE("surrogate attack efficacy") {
  Criterion criterion("surrogate-attack-efficacy");
  const auto start = std::chrono::steady_clock::now();

  const auto report_for = [](const std::vector<engine::AttackOutcome>& outcomes) {
    return metrics::build_report(outcomes);
  };
  const metrics::EvaluationReport defaults = report_for(seed42_toy_run());
  std::printf("[acceptance]   defaults: ASR_R=%.1f ASR_L=%.1f ASR_T=%.1f EM=%.1f\n",
              defaults.asr.asr_r, defaults.asr.asr_l, defaults.asr.asr_t, defaults.e2e.em);
  REQUIRE(defaults.asr.asr_r > 0.0);
  REQUIRE(defaults.asr.asr_t > 0.0);

  const metrics::EvaluationReport low =
      report_for(run_dataset(data_path("toy_corpus.jsonl"), 0.1, 42));
  const metrics::EvaluationReport high =
      report_for(run_dataset(data_path("toy_corpus.jsonl"), 0.5, 42));
  const bool trend_holds = low.asr.asr_t >= high.asr.asr_t - 10.0;
  std::printf("[acceptance]   pr_per trend: ASR_T@0.1=%.1f ASR_T@0.5=%.1f -> %s\n",
              low.asr.asr_t, high.asr.asr_t,
              trend_holds ? "low-rate trend holds" : "low-rate trend VIOLATED (recorded)");
  REQUIRE(elapsed_seconds(start) < 300.0);
  criterion.done();
}

TEST_CASE("gpr bucket monotonicity") {
  Criterion criterion("gpr-bucket-monotonicity");
  const std::vector<double> fractions =
      metrics::incorrect_fraction_by_gpr_bucket(seed42_toy_run(), 3);
  REQUIRE(fractions.size() == 3);
  std::printf("[acceptance]   incorrect fraction per ascending gpr bucket: %.2f %.2f %.2f\n",
              fractions[0], fractions[1], fractions[2]);
  for (std::size_t b = 1; b < fractions.size(); ++b) {
    REQUIRE(fractions[b] <= fractions[b - 1]);
  }
  criterion.done();
}

TEST_CASE("determinism") {
  Criterion criterion("determinism");
  TempDir dir("acceptance_determinism");

  const auto attack_into = [&](const std::string& out, std::size_t workers) {
    cli::AttackOptions options;
    options.dataset = data_path("toy_corpus.jsonl");
    options.out = dir.file(out);
    options.workers = workers;
    options.emit_trace = true;
    options.config.seed = 42;
    REQUIRE(cli::cmd_attack(options) == 0);
    return options.out;
  };
  const std::string first = attack_into("a.jsonl", 4);
  const std::string second = attack_into("b.jsonl", 1);
  REQUIRE(read_file(first) == read_file(second));
  REQUIRE_FALSE(read_file(first).empty());

  const auto report_into = [&](const std::string& results, const std::string& out) {
    cli::ReportOptions options;
    options.results = results;
    options.format = "json";
    options.out = dir.file(out);
    std::ostringstream sink;
    REQUIRE(cli::cmd_report(options, sink) == 0);
    return options.out;
  };
  const std::string report_a = report_into(first, "a.report.json");
  const std::string report_b = report_into(second, "b.report.json");
  REQUIRE(read_file(report_a) == read_file(report_b));
  criterion.done();
}

TEST_CASE("operator contracts") {
  Criterion criterion("operator-contracts");
  const perturb::OperatorSet ops = perturb::OperatorSet::defaults();

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RngStream rng(seed);

    const std::string shuffled = perturb::inner_shuffle("celebration", rng);
    REQUIRE(std::multiset<char>(shuffled.begin(), shuffled.end()) ==
            std::multiset<char>{'c', 'e', 'l', 'e', 'b', 'r', 'a', 't', 'i', 'o', 'n'});
    REQUIRE(shuffled.front() == 'c');
    REQUIRE(shuffled.back() == 'n');
    REQUIRE(shuffled != "celebration");
    REQUIRE(perturb::inner_shuffle("abc", rng) == "abc");

    const std::string truncated = perturb::truncate("celebration", rng);
    REQUIRE(truncated.size() >= 8);
    REQUIRE(truncated.size() <= 10);
    REQUIRE(perturb::truncate("abc", rng) == "abc");

    const std::string typo = perturb::keyboard_typo("celebration", ops.keyboard_adjacency, rng);
    REQUIRE(typo.size() == 11);
    std::size_t differing = 0;
    for (std::size_t i = 0; i < typo.size(); ++i) {
      if (typo[i] != "celebration"[i]) ++differing;
    }
    REQUIRE(differing == 1);

    const std::string natural =
        perturb::natural_typo("because", ops.natural_typos, ops.keyboard_adjacency, rng);
    REQUIRE((natural == "becuase" || natural == "becasue"));

    const std::string punct = perturb::punctuation_insert("role", rng);
    REQUIRE(punct.size() >= 5);
    REQUIRE(punct.size() <= 7);
    REQUIRE(punct.find("role") != std::string::npos);
    const std::string run =
        punct.find("role") == 0 ? punct.substr(4) : punct.substr(0, punct.size() - 4);
    REQUIRE(run.size() >= 1);
    REQUIRE(run.size() <= 3);
    for (char c : run) REQUIRE(c == run.front());
    REQUIRE(std::string(",.'!?;").find(run.front()) != std::string::npos);

    const std::string phonetic =
        perturb::similarity_swap("phone", perturb::SimilarityMode::phonetic, ops.phonetic, rng);
    REQUIRE(phonetic != "phone");
    const std::string visual =
        perturb::similarity_swap("role", perturb::SimilarityMode::visual, ops.visual, rng);
    REQUIRE(visual != "role");
  }
  criterion.done();
}

TEST_CASE("metric algebra") {
  Criterion criterion("metric-algebra");

  RngStream rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<engine::AttackOutcome> outcomes;
    const std::size_t n = 1 + rng.uniform_index(40);
    for (std::size_t i = 0; i < n; ++i) {
      engine::AttackOutcome outcome;
      outcome.id = "r" + std::to_string(i);
      outcome.objectives.rsr = 0.05 + static_cast<double>(rng.uniform_index(40)) / 20.0;
      outcome.objectives.gpr = 0.05 + static_cast<double>(rng.uniform_index(40)) / 20.0;
      const bool flipped = rng.uniform_index(2) == 0;
      outcome.prediction = flipped ? "wrong" : "Turkey";
      outcome.baseline_prediction = rng.uniform_index(2) == 0 ? "Turkey" : "other";
      outcome.answers = {"Turkey"};
      outcome.generation_flipped = flipped;
      outcome.retrieval_success = outcome.objectives.rsr < 1.0;
      outcome.success = flipped && outcome.retrieval_success && outcome.objectives.gpr < 1.0;
      outcomes.push_back(std::move(outcome));
    }
    const metrics::AsrSummary asr = metrics::attack_success(outcomes);
    REQUIRE(asr.asr_t <= std::min(asr.asr_r, asr.asr_l) + 1e-12);
    for (const engine::AttackOutcome& outcome : outcomes) {
      if (metrics::exact_match(outcome.prediction, outcome.answers)) {
        REQUIRE(metrics::accuracy(outcome.prediction, outcome.answers));
      }
    }
  }

  // All-failure run on a fixture whose baselines are all correct: the
  // fallback rule reproduces the clean-document row exactly.
  auto instances = corpus::load_triples(data_path("toy_corpus.jsonl"), 5);
  std::vector<engine::AttackOutcome> failures;
  for (corpus::TripleInstance& instance : instances) {
    scoring::ScorerHandles neutral{
        std::make_shared<PinnedRelevance>(instance.document, 1.0, 1.0),
        std::make_shared<PinnedGeneration>(instance.document, -1.0, -1.0,
                                           instance.answers.front(), instance.answers.front())};
    engine::AttackConfig config;
    config.seed = 7;
    config.n_iter = 3;
    failures.push_back(engine::run_attack(instance, config, neutral));
  }
  for (const engine::AttackOutcome& outcome : failures) {
    REQUIRE_FALSE(outcome.success);
  }
  const metrics::EndToEnd e2e = metrics::end_to_end(failures);
  REQUIRE(e2e.em == 100.0);
  REQUIRE(e2e.acc == 100.0);
  criterion.done();
}

TEST_CASE("wire contract conformance") {
  Criterion criterion("wire-contract");

  httplib::Server server;
  std::atomic<int> logprob_calls{0};
  std::atomic<int> fail_next{0};
  std::string last_logprob_body;
  server.Post("/relevance", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(json{{"score", 0.125}}.dump(), "application/json");
  });
  server.Post("/answer_logprob", [&](const httplib::Request& req, httplib::Response& res) {
    ++logprob_calls;
    last_logprob_body = req.body;
    if (fail_next > 0) {
      --fail_next;
      res.status = 500;
      return;
    }
    res.set_content(json{{"token_logprobs", {-0.25, -1.0, -0.75}}}.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread listener([&]() { server.listen_after_bind(); });
  server.wait_until_ready();

  scoring::RemoteConfig config;
  config.base_url = "http://127.0.0.1:" + std::to_string(port);
  config.timeout_ms = 2000;
  config.retries = 2;
  scoring::RemoteGeneration generation(config);

  // Exact summation of token logprobs.
  const std::string document = "History of basketball until his final championship in 1998.";
  const std::string question = "When did Michael Jordan get his last ring?";
  REQUIRE(generation.answer_logprob(document, question, "1998") == -2.0);

  // The outgoing prompt embeds the QA template verbatim, with both fields
  // filled. The expected text is pinned here independently of the asset.
  const std::string expected_prompt =
      "[INST] Documents:\n" + document +
      "\n\n"
      "Answer the following question with a very short phrase, such as \"1998\", "
      "\"May 16th, 1931\", or \"James Bond\", to meet the criteria of exact match datasets.\n\n"
      "Question: " + question + " [/INST]\n\nAnswer:";
  const json body = json::parse(last_logprob_body);
  REQUIRE(body.at("prompt").get<std::string>() == expected_prompt);
  REQUIRE(body.at("context").get<std::string>() == document);
  REQUIRE(body.at("answer").get<std::string>() == "1998");

  // Retry/backoff on injected 500s: cap 2 means three attempts total.
  fail_next = 2;
  logprob_calls = 0;
  REQUIRE(generation.answer_logprob("d", "q", "a") == -2.0);
  REQUIRE(logprob_calls == 3);

  fail_next = 3;
  logprob_calls = 0;
  REQUIRE_THROWS_AS(static_cast<void>(generation.answer_logprob("d", "q", "a")), ScorerError);
  REQUIRE(logprob_calls == 3);

  server.stop();
  listener.join();
  criterion.done();
}
