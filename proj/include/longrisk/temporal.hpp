#pragma once

#include <array>
#include <string>

#include "longrisk/attention.hpp"
#include "longrisk/tensor.hpp"

namespace longrisk {

/// Fixed sinusoidal encoding for a history slot. Slots are relative-year
/// offsets -4..0 mapped to positions 0..4 (oldest first); dimension 2i holds
/// sin(pos / 10000^(2i/d)) and 2i+1 the matching cosine. d must be even.
Tensor temporal_encoding(int offset, std::size_t d);

/// Which of the five history offsets (-4..0) carry a visit. Offset 0 (the
/// "now" visit) is always present. Serializes as a 5-character bitstring,
/// oldest offset first, e.g. "10101" for biennial 4-year history.
struct HistoryMask {
  std::array<bool, 5> present{{false, false, false, false, true}};

  static HistoryMask now_only() { return HistoryMask{}; }
  static HistoryMask all() { return HistoryMask{{true, true, true, true, true}}; }
  static HistoryMask from_string(const std::string& bits);
  std::string to_string() const;

  bool at_offset(int offset) const { return present[offset + 4]; }
  std::size_t count() const;
  bool operator==(const HistoryMask&) const = default;
};

/// Masked self-attention over up to five visit embeddings plus average
/// pooling over the present slots. Absent slots are excluded from attention
/// (as both keys and queries) and from the pooled mean: the computation runs
/// on the physically compacted present subsequence, so a masked-out visit
/// can not influence the output in any way. Dropout is applied before,
/// within and after the attention block during training.
class TimeAggregator {
 public:
  TimeAggregator() = default;
  TimeAggregator(std::size_t d, std::size_t n_heads, double dropout_p, Rng& rng);

  /// visits[i] corresponds to offset i-4 and must be defined exactly where
  /// the mask is present. Returns the history embedding [d].
  Tensor aggregate(const std::array<Tensor, 5>& visits, const HistoryMask& mask,
                   bool train, Rng& rng) const;

  void collect_params(const std::string& prefix, NamedParams& out) const;
  void set_trainable(bool trainable);
  std::size_t width() const { return d_; }
  double dropout() const { return dropout_p_; }

  TransformerBlock& block() { return block_; }  // test hook

 private:
  std::size_t d_ = 0;
  double dropout_p_ = 0.0;
  TransformerBlock block_;
  std::array<Tensor, 5> encodings_;  // constant, not trainable
};

}  // namespace longrisk
