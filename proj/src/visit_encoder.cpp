#include "longrisk/visit_encoder.hpp"

#include <cmath>

#include "longrisk/errors.hpp"

namespace longrisk {

ImageEncoderStub::ImageEncoderStub(Mode mode, std::size_t d,
                                   std::size_t input_len, std::uint64_t seed)
    : mode_(mode), d_(d), input_len_(input_len) {
  if (mode_ == Mode::random_projection) {
    Rng rng(seed);
    const double std = 1.0 / std::sqrt(static_cast<double>(input_len));
    projection_ = Tensor::randn({d, input_len}, rng, std, false);
  }
}

Tensor ImageEncoderStub::encode(const Tensor& input) const {
  if (mode_ == Mode::passthrough) {
    if (input.rank() != 1 || input.size() != d_) {
      throw ShapeError("encoder stub (passthrough) expects a [" +
                       std::to_string(d_) + "] embedding, got " +
                       shape_str(input.shape()));
    }
    return input;
  }
  if (input.size() != input_len_) {
    throw ShapeError("encoder stub expects " + std::to_string(input_len_) +
                     " input values, got " + std::to_string(input.size()) +
                     " in " + shape_str(input.shape()));
  }
  Tensor flat = input.rank() == 1 ? input : ops::reshape(input, {input_len_});
  return ops::matvec(projection_, flat);
}

void ImageEncoderStub::collect_params(const std::string& prefix,
                                      NamedParams& out) const {
  if (mode_ == Mode::random_projection) {
    out.emplace_back(prefix + "projection", projection_);
  }
}

ViewConditioner::ViewConditioner(std::size_t d, Rng& rng) : d_(d) {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  for (auto& e : embeddings_) e = Tensor::randn({d}, rng, 1.0, true);
  w_scale_ = Tensor::randn({d, d}, rng, inv_sqrt_d, true);
  w_shift_ = Tensor::randn({d, d}, rng, 0.5 * inv_sqrt_d, true);
}

Tensor ViewConditioner::condition(const Tensor& x, int slot) const {
  if (slot < 0 || slot > 3) {
    throw ContractError("conditioner: slot must name one of L_CC, L_MLO, R_CC, "
                        "R_MLO (0..3), got " + std::to_string(slot));
  }
  if (x.rank() != 1 || x.size() != d_) {
    throw ShapeError("conditioner expects a [" + std::to_string(d_) +
                     "] embedding, got " + shape_str(x.shape()));
  }
  Tensor scale = ops::matvec(w_scale_, embeddings_[slot]);
  Tensor shift = ops::matvec(w_shift_, embeddings_[slot]);
  return ops::add(ops::mul(scale, x), shift);
}

void ViewConditioner::collect_params(const std::string& prefix,
                                     NamedParams& out) const {
  for (int slot = 0; slot < 4; ++slot) {
    out.emplace_back(prefix + "e_" + kSlotNames[slot], embeddings_[slot]);
  }
  out.emplace_back(prefix + "w_scale", w_scale_);
  out.emplace_back(prefix + "w_shift", w_shift_);
}

AttentionPooler::AttentionPooler(std::size_t d, Rng& rng) {
  w_ = Tensor::randn({d, 1}, rng, 1.0 / std::sqrt(static_cast<double>(d)), true);
  b_ = Tensor::zeros({1}, true);
}

AttentionPooler::Pooled AttentionPooler::pool(const Tensor& tokens) const {
  Tensor scores = ops::add_rowvec(ops::matmul(tokens, w_), b_);  // [T x 1]
  Tensor weights = ops::softmax(scores, 0);
  Tensor pooled = ops::matmul_tn(weights, tokens);  // [1 x d]
  return {ops::reshape(pooled, {tokens.shape()[1]}), weights};
}

void AttentionPooler::collect_params(const std::string& prefix,
                                     NamedParams& out) const {
  out.emplace_back(prefix + "w", w_);
  out.emplace_back(prefix + "b", b_);
}

VisitEncoder::VisitEncoder(std::size_t d, std::size_t n_heads, Rng& rng)
    : d_(d),
      conditioner_(d, rng),
      block_(d, n_heads, rng),
      pooler_(d, rng) {}

AttentionPooler::Pooled VisitEncoder::encode_with_weights(
    const std::array<Tensor, 4>& image_embeddings) const {
  std::vector<Tensor> conditioned;
  conditioned.reserve(4);
  for (int slot = 0; slot < 4; ++slot) {
    conditioned.push_back(conditioner_.condition(image_embeddings[slot], slot));
  }
  Tensor tokens = ops::stack_rows(conditioned);
  Rng unused(0);  // the visit block applies no dropout
  Tensor transformed = block_.forward(tokens, 0.0, unused, false);
  return pooler_.pool(transformed);
}

Tensor VisitEncoder::encode(const std::array<Tensor, 4>& image_embeddings) const {
  return encode_with_weights(image_embeddings).value;
}

void VisitEncoder::collect_params(const std::string& prefix,
                                  NamedParams& out) const {
  conditioner_.collect_params(prefix + "cond.", out);
  block_.collect_params(prefix + "block.", out);
  pooler_.collect_params(prefix + "pool.", out);
}

void VisitEncoder::set_trainable(bool trainable) {
  NamedParams params;
  collect_params("", params);
  for (auto& [name, tensor] : params) tensor.set_requires_grad(trainable);
}

}  // namespace longrisk
