#include "garag/pareto.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "garag/error.hpp"

namespace garag::pareto {

bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
  return a.rsr <= b.rsr && a.gpr <= b.gpr && (a.rsr < b.rsr || a.gpr < b.gpr);
}

std::vector<double> crowding_distance(const std::vector<ObjectiveVector>& front) {
  const std::size_t n = front.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (n <= 2) return std::vector<double>(n, inf);

  std::vector<double> distance(n, 0.0);
  const auto accumulate = [&](auto objective) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return objective(front[a]) < objective(front[b]);
    });
    distance[order.front()] = inf;
    distance[order.back()] = inf;
    const double range = objective(front[order.back()]) - objective(front[order.front()]);
    if (range <= 0.0) return;  // zero-range objective contributes nothing
    for (std::size_t i = 1; i + 1 < n; ++i) {
      distance[order[i]] +=
          (objective(front[order[i + 1]]) - objective(front[order[i - 1]])) / range;
    }
  };
  accumulate([](const ObjectiveVector& v) { return v.rsr; });
  accumulate([](const ObjectiveVector& v) { return v.gpr; });
  return distance;
}

FrontAssignment non_dominated_sort(const std::vector<ObjectiveVector>& vectors) {
  const std::size_t n = vectors.size();
  if (n == 0) throw Error("non_dominated_sort: empty population");

  // Classic fast non-dominated sorting: dominance counts plus dominated lists.
  std::vector<std::size_t> dominated_by(n, 0);
  std::vector<std::vector<std::size_t>> dominated(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (dominates(vectors[i], vectors[j])) {
        dominated[i].push_back(j);
        ++dominated_by[j];
      } else if (dominates(vectors[j], vectors[i])) {
        dominated[j].push_back(i);
        ++dominated_by[i];
      }
    }
  }

  FrontAssignment assignment;
  assignment.rank.assign(n, 0);
  assignment.crowding.assign(n, 0.0);

  std::vector<std::size_t> current;
  for (std::size_t i = 0; i < n; ++i) {
    if (dominated_by[i] == 0) current.push_back(i);
  }
  std::size_t rank = 0;
  while (!current.empty()) {
    std::vector<ObjectiveVector> front_vectors;
    front_vectors.reserve(current.size());
    for (std::size_t i : current) {
      assignment.rank[i] = rank;
      front_vectors.push_back(vectors[i]);
    }
    const std::vector<double> distances = crowding_distance(front_vectors);
    for (std::size_t k = 0; k < current.size(); ++k) {
      assignment.crowding[current[k]] = distances[k];
    }

    std::vector<std::size_t> next;
    for (std::size_t i : current) {
      for (std::size_t j : dominated[i]) {
        if (--dominated_by[j] == 0) next.push_back(j);
      }
    }
    current = std::move(next);
    ++rank;
  }
  return assignment;
}

std::vector<std::size_t> selection_order(const std::vector<ObjectiveVector>& vectors,
                                         FrontAssignment* assignment_out) {
  FrontAssignment assignment = non_dominated_sort(vectors);
  std::vector<std::size_t> order(vectors.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (assignment.rank[a] != assignment.rank[b]) return assignment.rank[a] < assignment.rank[b];
    if (assignment.crowding[a] != assignment.crowding[b]) {
      return assignment.crowding[a] > assignment.crowding[b];
    }
    return a < b;  // stable, reproducible tie-break
  });
  if (assignment_out) *assignment_out = std::move(assignment);
  return order;
}

namespace {

std::vector<ObjectiveVector> objectives_of(const std::vector<perturb::Candidate>& population) {
  std::vector<ObjectiveVector> vectors;
  vectors.reserve(population.size());
  for (const perturb::Candidate& candidate : population) {
    if (!candidate.objectives) throw Error("candidate lacks objectives; evaluate first");
    vectors.push_back(*candidate.objectives);
  }
  return vectors;
}

}  // namespace

std::vector<perturb::Candidate> select_survivors(const std::vector<perturb::Candidate>& population,
                                                 std::size_t survivor_count) {
  if (population.size() < survivor_count) {
    throw Error("select_survivors: population " + std::to_string(population.size()) +
                " smaller than S=" + std::to_string(survivor_count));
  }
  const std::vector<std::size_t> order = selection_order(objectives_of(population));
  std::vector<perturb::Candidate> survivors;
  survivors.reserve(survivor_count);
  for (std::size_t i = 0; i < survivor_count; ++i) survivors.push_back(population[order[i]]);
  return survivors;
}

const perturb::Candidate& select_best(const std::vector<perturb::Candidate>& population) {
  if (population.empty()) throw Error("select_best: empty population");
  const std::vector<std::size_t> order = selection_order(objectives_of(population));
  return population[order.front()];
}

}  // namespace garag::pareto
