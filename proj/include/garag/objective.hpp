#pragma once

namespace garag {

/// The two attack objectives for one candidate document, both minimized.
/// rsr < 1 means the perturbed document out-scores the clean one for the
/// query; gpr < 1 means the reader's probability of the gold answer dropped.
/// A value of exactly 1.0 on either axis means "no change vs clean".
struct ObjectiveVector {
  double rsr = 1.0;
  double gpr = 1.0;
};

}  // namespace garag
