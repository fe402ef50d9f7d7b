#pragma once

#include <cstddef>
#include <vector>

#include "garag/objective.hpp"
#include "garag/perturb.hpp"

namespace garag::pareto {

/// Non-domination rank (0 = Pareto front) and crowding distance per member.
struct FrontAssignment {
  std::vector<std::size_t> rank;
  std::vector<double> crowding;
};

/// True iff a is no worse than b on both objectives and strictly better on
/// at least one (minimization).
bool dominates(const ObjectiveVector& a, const ObjectiveVector& b);

/// Fast non-dominated sorting plus per-front crowding distances.
FrontAssignment non_dominated_sort(const std::vector<ObjectiveVector>& vectors);

/// NSGA-II crowding distance for one front: boundary members get +infinity,
/// interior members accumulate (next - prev) / (max - min) per objective,
/// zero-range objectives contribute 0. Sorting is stable, so equal values
/// keep their original relative order.
std::vector<double> crowding_distance(const std::vector<ObjectiveVector>& front);

/// The full population ordered by (rank ascending, crowding descending,
/// original index ascending). `assignment_out`, when non-null, receives the
/// computed ranks and crowding values.
std::vector<std::size_t> selection_order(const std::vector<ObjectiveVector>& vectors,
                                         FrontAssignment* assignment_out = nullptr);

/// Top-S survivors under selection_order. All members must carry objectives.
/// Elitist: every rank-0 member survives whenever the front fits in S.
std::vector<perturb::Candidate> select_survivors(const std::vector<perturb::Candidate>& population,
                                                 std::size_t survivor_count);

/// Top-1 under the same ordering.
const perturb::Candidate& select_best(const std::vector<perturb::Candidate>& population);

}  // namespace garag::pareto
