#include "longrisk/attention.hpp"

#include <cmath>

#include "longrisk/errors.hpp"

namespace longrisk {

TransformerBlock::TransformerBlock(std::size_t d, std::size_t n_heads, Rng& rng)
    : d_(d), n_heads_(n_heads) {
  if (n_heads == 0 || d % n_heads != 0) {
    throw ConfigError("transformer block: width " + std::to_string(d) +
                      " is not divisible by " + std::to_string(n_heads) +
                      " heads");
  }
  const double attn_std = std::sqrt(1.0 / static_cast<double>(d));
  const double ffn1_std = std::sqrt(2.0 / static_cast<double>(5 * d));
  const double ffn2_std = std::sqrt(2.0 / static_cast<double>(5 * d));
  wq_ = Tensor::randn({d, d}, rng, attn_std, true);
  wk_ = Tensor::randn({d, d}, rng, attn_std, true);
  wv_ = Tensor::randn({d, d}, rng, attn_std, true);
  wo_ = Tensor::randn({d, d}, rng, attn_std, true);
  bq_ = Tensor::zeros({d}, true);
  bk_ = Tensor::zeros({d}, true);
  bv_ = Tensor::zeros({d}, true);
  bo_ = Tensor::zeros({d}, true);
  ln1_gamma_ = Tensor::full({d}, 1.0, true);
  ln1_beta_ = Tensor::zeros({d}, true);
  ln2_gamma_ = Tensor::full({d}, 1.0, true);
  ln2_beta_ = Tensor::zeros({d}, true);
  ffn_w1_ = Tensor::randn({d, 4 * d}, rng, ffn1_std, true);
  ffn_b1_ = Tensor::zeros({4 * d}, true);
  ffn_w2_ = Tensor::randn({4 * d, d}, rng, ffn2_std, true);
  ffn_b2_ = Tensor::zeros({d}, true);
}

Tensor TransformerBlock::forward(const Tensor& tokens, double dropout_p,
                                 Rng& rng, bool train) const {
  if (tokens.rank() != 2 || tokens.shape()[1] != d_) {
    throw ShapeError("transformer block expects [T x " + std::to_string(d_) +
                     "] tokens, got " + shape_str(tokens.shape()));
  }
  const std::size_t dh = d_ / n_heads_;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor h = ops::layer_norm(tokens, ln1_gamma_, ln1_beta_);
  Tensor q = ops::add_rowvec(ops::matmul(h, wq_), bq_);
  Tensor k = ops::add_rowvec(ops::matmul(h, wk_), bk_);
  Tensor v = ops::add_rowvec(ops::matmul(h, wv_), bv_);

  std::vector<Tensor> head_outputs;
  head_outputs.reserve(n_heads_);
  for (std::size_t head = 0; head < n_heads_; ++head) {
    Tensor qh = ops::slice_cols(q, head * dh, dh);
    Tensor kh = ops::slice_cols(k, head * dh, dh);
    Tensor vh = ops::slice_cols(v, head * dh, dh);
    Tensor scores = ops::scale(ops::matmul_nt(qh, kh), inv_sqrt_dh);
    Tensor attn = ops::softmax(scores, 1);
    attn = ops::dropout(attn, dropout_p, rng, train);
    head_outputs.push_back(ops::matmul(attn, vh));
  }
  Tensor attn_out = n_heads_ == 1 ? head_outputs[0] : ops::concat_cols(head_outputs);
  attn_out = ops::add_rowvec(ops::matmul(attn_out, wo_), bo_);
  attn_out = ops::dropout(attn_out, dropout_p, rng, train);
  Tensor x = ops::add(tokens, attn_out);

  Tensor h2 = ops::layer_norm(x, ln2_gamma_, ln2_beta_);
  Tensor f = ops::relu(ops::add_rowvec(ops::matmul(h2, ffn_w1_), ffn_b1_));
  f = ops::dropout(f, dropout_p, rng, train);
  f = ops::add_rowvec(ops::matmul(f, ffn_w2_), ffn_b2_);
  return ops::add(x, f);
}

void TransformerBlock::collect_params(const std::string& prefix,
                                      NamedParams& out) const {
  out.emplace_back(prefix + "wq", wq_);
  out.emplace_back(prefix + "wk", wk_);
  out.emplace_back(prefix + "wv", wv_);
  out.emplace_back(prefix + "wo", wo_);
  out.emplace_back(prefix + "bq", bq_);
  out.emplace_back(prefix + "bk", bk_);
  out.emplace_back(prefix + "bv", bv_);
  out.emplace_back(prefix + "bo", bo_);
  out.emplace_back(prefix + "ln1_gamma", ln1_gamma_);
  out.emplace_back(prefix + "ln1_beta", ln1_beta_);
  out.emplace_back(prefix + "ln2_gamma", ln2_gamma_);
  out.emplace_back(prefix + "ln2_beta", ln2_beta_);
  out.emplace_back(prefix + "ffn_w1", ffn_w1_);
  out.emplace_back(prefix + "ffn_b1", ffn_b1_);
  out.emplace_back(prefix + "ffn_w2", ffn_w2_);
  out.emplace_back(prefix + "ffn_b2", ffn_b2_);
}

void TransformerBlock::set_trainable(bool trainable) {
  NamedParams params;
  collect_params("", params);
  for (auto& [name, tensor] : params) tensor.set_requires_grad(trainable);
}

void TransformerBlock::zero_output_projections() {
  for (Tensor* t : {&wo_, &bo_, &ffn_w2_, &ffn_b2_}) {
    for (auto& v : t->mutable_data()) v = 0.0;
  }
}

}  // namespace longrisk
