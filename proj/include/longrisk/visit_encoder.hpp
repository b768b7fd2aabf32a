#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "longrisk/attention.hpp"
#include "longrisk/cohort.hpp"
#include "longrisk/tensor.hpp"

namespace longrisk {

/// Stand-in for a pretrained CNN: a frozen random projection from flattened
/// pixels to a d-wide embedding, or a passthrough for manifests that ship
/// precomputed per-image embeddings. Parameters never receive gradients;
/// gradients still flow through to the input for saliency.
class ImageEncoderStub {
 public:
  enum class Mode { random_projection, passthrough };

  ImageEncoderStub() = default;
  ImageEncoderStub(Mode mode, std::size_t d, std::size_t input_len,
                   std::uint64_t seed);

  Tensor encode(const Tensor& input) const;

  Mode mode() const { return mode_; }
  std::size_t dim() const { return d_; }
  std::size_t input_len() const { return input_len_; }
  const Tensor& projection() const { return projection_; }

  void collect_params(const std::string& prefix, NamedParams& out) const;

 private:
  Mode mode_ = Mode::passthrough;
  std::size_t d_ = 0;
  std::size_t input_len_ = 0;
  Tensor projection_;  // [d x input_len], frozen
};

/// FiLM-style view/laterality conditioning:
///   h = (W_scale e_slot) * x + (W_shift e_slot)
/// with the product taken elementwise. One learned embedding e per slot,
/// W_scale / W_shift shared across all four slots.
class ViewConditioner {
 public:
  ViewConditioner() = default;
  ViewConditioner(std::size_t d, Rng& rng);

  Tensor condition(const Tensor& x, int slot) const;

  void collect_params(const std::string& prefix, NamedParams& out) const;

 private:
  std::size_t d_ = 0;
  std::array<Tensor, 4> embeddings_;
  Tensor w_scale_, w_shift_;
};

/// Linear scorer + softmax over the four image tokens; weights always form
/// a probability distribution.
class AttentionPooler {
 public:
  AttentionPooler() = default;
  AttentionPooler(std::size_t d, Rng& rng);

  struct Pooled {
    Tensor value;    // [d]
    Tensor weights;  // [T x 1]
  };
  Pooled pool(const Tensor& tokens) const;

  void collect_params(const std::string& prefix, NamedParams& out) const;

 private:
  Tensor w_, b_;
};

/// Fuses the four per-image embeddings of one visit into a visit embedding:
/// conditioning, one self-attention block over the four tokens, attention
/// pooling. Token order carries no meaning; slot identity enters only
/// through the conditioning.
class VisitEncoder {
 public:
  VisitEncoder() = default;
  VisitEncoder(std::size_t d, std::size_t n_heads, Rng& rng);

  Tensor encode(const std::array<Tensor, 4>& image_embeddings) const;
  AttentionPooler::Pooled encode_with_weights(
      const std::array<Tensor, 4>& image_embeddings) const;

  Tensor condition(const Tensor& x, int slot) const {
    return conditioner_.condition(x, slot);
  }

  void collect_params(const std::string& prefix, NamedParams& out) const;
  void set_trainable(bool trainable);
  std::size_t width() const { return d_; }

 private:
  std::size_t d_ = 0;
  ViewConditioner conditioner_;
  TransformerBlock block_;
  AttentionPooler pooler_;
};

}  // namespace longrisk
