#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "longrisk/attention.hpp"
#include "longrisk/cohort.hpp"
#include "longrisk/tensor.hpp"

namespace longrisk {

/// Cumulative 1..5-year risks; nondecreasing and strictly inside (0, 1).
struct RiskCurve {
  std::array<double, 5> p{};

  bool nondecreasing() const {
    for (int k = 1; k < 5; ++k) {
      if (p[k] < p[k - 1]) return false;
    }
    return true;
  }
  std::string to_string() const;
};

/// Additive hazard head. A baseline linear map B and five independent linear
/// hazard maps H_1..H_5, each clamped nonnegative by a ReLU; the k-year
/// cumulative risk is sigmoid(B(m) + sum_{i<=k} H_i(m)), which makes the
/// curve nondecreasing in k by construction.
class HazardHead {
 public:
  HazardHead() = default;
  HazardHead(std::size_t d, Rng& rng);

  /// m: [d] or [1 x d]. Returns the pre-sigmoid cumulative logits [1 x 5].
  Tensor logits(const Tensor& m) const;
  RiskCurve risk(const Tensor& m) const;
  static RiskCurve curve_from_logits(const Tensor& logits);

  void collect_params(const std::string& prefix, NamedParams& out) const;
  void set_trainable(bool trainable);
  std::size_t width() const { return d_; }

 private:
  std::size_t d_ = 0;
  Tensor base_w_, base_b_;  // [d x 1], [1]
  Tensor haz_w_, haz_b_;    // [d x 5], [5]: column k is the H_{k+1} map
};

/// Per (follow-up year, label value) loss weights,
/// w[k][v] = N_known(k) / (2 * count(k, v)) with counts floored at 1.
/// Balanced per year: sum_v w[k][v] * count(k, v) == N_known(k).
struct LossWeights {
  std::array<std::array<double, 2>, 5> w{};  // [year][label]
};

LossWeights compute_loss_weights(const std::vector<TrajectorySample>& samples);

/// Reweighted masked binary cross-entropy over known follow-up years,
/// normalized by the number of known years. Censored years contribute
/// nothing to the value or the gradient. Returns nullopt when every year is
/// masked (the sample is skipped; the caller keeps the count).
std::optional<Tensor> survival_loss(const Tensor& logits,
                                    const std::array<int, 5>& labels,
                                    const std::array<bool, 5>& known,
                                    const LossWeights& weights);

}  // namespace longrisk
