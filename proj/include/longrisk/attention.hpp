#pragma once

#include <string>
#include <utility>
#include <vector>

#include "longrisk/autodiff.hpp"
#include "longrisk/rng.hpp"
#include "longrisk/tensor.hpp"

namespace longrisk {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

/// Pre-norm transformer encoder block: multi-head self-attention and a
/// ReLU feed-forward of width 4*d, both behind residual connections.
/// Optional dropout sits on the attention probabilities, the attention
/// output projection and the feed-forward hidden layer.
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(std::size_t d, std::size_t n_heads, Rng& rng);

  /// tokens: [T x d]. Returns [T x d].
  Tensor forward(const Tensor& tokens, double dropout_p, Rng& rng,
                 bool train) const;

  void collect_params(const std::string& prefix, NamedParams& out) const;
  void set_trainable(bool trainable);

  std::size_t width() const { return d_; }
  std::size_t heads() const { return n_heads_; }

  // test hook: zero the residual-branch output projections, turning the
  // block into an exact identity
  void zero_output_projections();

 private:
  std::size_t d_ = 0;
  std::size_t n_heads_ = 0;
  Tensor wq_, wk_, wv_, wo_;
  Tensor bq_, bk_, bv_, bo_;
  Tensor ln1_gamma_, ln1_beta_, ln2_gamma_, ln2_beta_;
  Tensor ffn_w1_, ffn_b1_, ffn_w2_, ffn_b2_;
};

}  // namespace longrisk
