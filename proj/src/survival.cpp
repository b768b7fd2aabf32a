#include "longrisk/survival.hpp"

#include <cmath>
#include <cstdio>

#include "longrisk/errors.hpp"
#include "longrisk/kernels.hpp"

namespace longrisk {

std::string RiskCurve::to_string() const {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %.6f %.6f", p[0], p[1], p[2],
                p[3], p[4]);
  return buf;
}

HazardHead::HazardHead(std::size_t d, Rng& rng) : d_(d) {
  const double std = 1.0 / std::sqrt(static_cast<double>(d));
  base_w_ = Tensor::randn({d, 1}, rng, std, true);
  base_b_ = Tensor::zeros({1}, true);
  haz_w_ = Tensor::randn({d, 5}, rng, std, true);
  haz_b_ = Tensor::zeros({5}, true);
}

Tensor HazardHead::logits(const Tensor& m) const {
  Tensor row;
  if (m.rank() == 1 && m.size() == d_) {
    row = ops::reshape(m, {1, d_});
  } else if (m.rank() == 2 && m.shape()[0] == 1 && m.shape()[1] == d_) {
    row = m;
  } else {
    throw ShapeError("hazard head expects an embedding of width " +
                     std::to_string(d_) + ", got " + shape_str(m.shape()));
  }
  Tensor base = ops::add_rowvec(ops::matmul(row, base_w_), base_b_);  // [1 x 1]
  Tensor hazards = ops::relu(ops::add_rowvec(ops::matmul(row, haz_w_), haz_b_));
  Tensor cumulative = ops::cumsum_last(hazards);  // [1 x 5]
  return ops::add(cumulative, base);              // scalar broadcast
}

RiskCurve HazardHead::curve_from_logits(const Tensor& logits) {
  if (logits.size() != 5) {
    throw ShapeError("risk curve needs 5 logits, got " +
                     shape_str(logits.shape()));
  }
  RiskCurve c;
  for (int k = 0; k < 5; ++k) c.p[k] = kernels::stable_sigmoid(logits[k]);
  return c;
}

RiskCurve HazardHead::risk(const Tensor& m) const {
  return curve_from_logits(logits(m));
}

void HazardHead::collect_params(const std::string& prefix,
                                NamedParams& out) const {
  out.emplace_back(prefix + "base_w", base_w_);
  out.emplace_back(prefix + "base_b", base_b_);
  out.emplace_back(prefix + "hazard_w", haz_w_);
  out.emplace_back(prefix + "hazard_b", haz_b_);
}

void HazardHead::set_trainable(bool trainable) {
  NamedParams params;
  collect_params("", params);
  for (auto& [name, tensor] : params) tensor.set_requires_grad(trainable);
}

LossWeights compute_loss_weights(const std::vector<TrajectorySample>& samples) {
  std::array<std::array<std::size_t, 2>, 5> counts{};
  for (const auto& s : samples) {
    for (int k = 0; k < 5; ++k) {
      if (s.known[k]) ++counts[k][s.labels[k] ? 1 : 0];
    }
  }
  LossWeights weights;
  for (int k = 0; k < 5; ++k) {
    const std::size_t n_known = counts[k][0] + counts[k][1];
    if (n_known == 0) {
      throw WeightingError("no known labels at follow-up year " +
                           std::to_string(k + 1) +
                           "; cannot balance the loss");
    }
    for (int v = 0; v < 2; ++v) {
      const std::size_t c = counts[k][v] == 0 ? 1 : counts[k][v];  // clamp
      weights.w[k][v] =
          static_cast<double>(n_known) / (2.0 * static_cast<double>(c));
    }
  }
  return weights;
}

std::optional<Tensor> survival_loss(const Tensor& logits,
                                    const std::array<int, 5>& labels,
                                    const std::array<bool, 5>& known,
                                    const LossWeights& weights) {
  if (logits.size() != 5) {
    throw ShapeError("survival loss needs 5 logits, got " +
                     shape_str(logits.shape()));
  }
  int n_known = 0;
  std::vector<double> targets(5), scaled_weights(5, 0.0);
  for (int k = 0; k < 5; ++k) {
    targets[k] = labels[k] ? 1.0 : 0.0;
    if (known[k]) {
      ++n_known;
      scaled_weights[k] = weights.w[k][labels[k] ? 1 : 0];
    }
  }
  if (n_known == 0) return std::nullopt;
  Tensor per_year = ops::bce_logits(logits, targets);
  Tensor mask = Tensor::from_data(logits.shape(), std::move(scaled_weights));
  Tensor weighted = ops::mul(per_year, mask);
  return ops::scale(ops::sum(weighted), 1.0 / static_cast<double>(n_known));
}

}  // namespace longrisk
