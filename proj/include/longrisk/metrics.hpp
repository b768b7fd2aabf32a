#pragma once

#include <vector>

namespace longrisk {

/// Rank-based (Mann-Whitney) ROCAUC: the probability that a uniformly random
/// positive outranks a uniformly random negative, ties counted 0.5.
/// Throws MetricError when only one class is present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct SurvivalObservation {
  double risk = 0.0;  // predicted cumulative risk at the horizon
  int time = 0;       // years after the reference visit (capped at the horizon)
  bool event = false; // true: diagnosed at `time`; false: censored at `time`
};

/// Harrell-style concordance: over comparable pairs (i diagnosed at t_i, j
/// with known status beyond t_i), the fraction where the earlier-diagnosed
/// sample carries the higher risk; risk ties count 0.5.
/// Throws MetricError when no pair is comparable.
double concordance_index(const std::vector<SurvivalObservation>& observations);

}  // namespace longrisk
