#include "longrisk/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "longrisk/errors.hpp"

namespace longrisk {

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw ContractError("roc_auc: scores and labels differ in length");
  }
  std::size_t n_pos = 0, n_neg = 0;
  for (int l : labels) (l ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) {
    throw MetricError("roc_auc undefined: only one class present (" +
                      std::to_string(n_pos) + " positives, " +
                      std::to_string(n_neg) + " negatives)");
  }
  // average ranks over tied scores; the rank-sum formulation counts tied
  // positive/negative pairs as exactly 0.5 each
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) {
      if (labels[idx[t]]) pos_rank_sum += avg_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

double concordance_index(const std::vector<SurvivalObservation>& observations) {
  double concordant = 0.0;
  std::size_t comparable = 0;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& a = observations[i];
    if (!a.event) continue;
    for (std::size_t j = 0; j < observations.size(); ++j) {
      if (i == j) continue;
      const auto& b = observations[j];
      if (b.time <= a.time) continue;  // status not known beyond a.time
      ++comparable;
      if (a.risk > b.risk) concordant += 1.0;
      else if (a.risk == b.risk) concordant += 0.5;
    }
  }
  if (comparable == 0) {
    throw MetricError("concordance undefined: no comparable pair");
  }
  return concordant / static_cast<double>(comparable);
}

}  // namespace longrisk
