#include "longrisk/temporal.hpp"

#include <cmath>

#include "longrisk/errors.hpp"

namespace longrisk {

Tensor temporal_encoding(int offset, std::size_t d) {
  if (offset < -4 || offset > 0) {
    throw ContractError("temporal encoding: offset must be in -4..0, got " +
                        std::to_string(offset));
  }
  if (d == 0 || d % 2 != 0) {
    throw ConfigError("temporal encoding: width must be even and positive, got " +
                      std::to_string(d));
  }
  const double pos = static_cast<double>(offset + 4);
  std::vector<double> data(d);
  for (std::size_t i = 0; 2 * i < d; ++i) {
    const double freq =
        std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(d));
    data[2 * i] = std::sin(pos / freq);
    data[2 * i + 1] = std::cos(pos / freq);
  }
  return Tensor::from_data({d}, std::move(data));
}

HistoryMask HistoryMask::from_string(const std::string& bits) {
  if (bits.size() != 5) {
    throw ParseError("history mask must be 5 characters of 0/1, got '" + bits +
                     "'");
  }
  HistoryMask m;
  for (std::size_t i = 0; i < 5; ++i) {
    if (bits[i] != '0' && bits[i] != '1') {
      throw ParseError("history mask must be 5 characters of 0/1, got '" + bits +
                       "'");
    }
    m.present[i] = bits[i] == '1';
  }
  if (!m.present[4]) {
    throw ContractError("history mask: the now visit (offset 0) is always present");
  }
  return m;
}

std::string HistoryMask::to_string() const {
  std::string s(5, '0');
  for (std::size_t i = 0; i < 5; ++i) s[i] = present[i] ? '1' : '0';
  return s;
}

std::size_t HistoryMask::count() const {
  std::size_t n = 0;
  for (bool p : present) n += p ? 1 : 0;
  return n;
}

TimeAggregator::TimeAggregator(std::size_t d, std::size_t n_heads,
                               double dropout_p, Rng& rng)
    : d_(d), dropout_p_(dropout_p), block_(d, n_heads, rng) {
  for (int slot = 0; slot < 5; ++slot) {
    encodings_[slot] = temporal_encoding(slot - 4, d);
  }
}

Tensor TimeAggregator::aggregate(const std::array<Tensor, 5>& visits,
                                 const HistoryMask& mask, bool train,
                                 Rng& rng) const {
  if (!mask.present[4]) {
    throw ContractError("aggregate: the now visit (offset 0) must be present");
  }
  std::vector<Tensor> tokens;
  tokens.reserve(5);
  for (int slot = 0; slot < 5; ++slot) {
    if (!mask.present[slot]) continue;
    const Tensor& v = visits[slot];
    if (!v.defined()) {
      throw ContractError("aggregate: mask marks offset " +
                          std::to_string(slot - 4) +
                          " present but no embedding was supplied");
    }
    if (v.rank() != 1 || v.size() != d_) {
      throw ShapeError("aggregate: visit embedding at offset " +
                       std::to_string(slot - 4) + " has shape " +
                       shape_str(v.shape()) + ", expected [" +
                       std::to_string(d_) + "]");
    }
    tokens.push_back(ops::add(v, encodings_[slot]));
  }
  Tensor seq = ops::stack_rows(tokens);
  seq = ops::dropout(seq, dropout_p_, rng, train);         // before
  seq = block_.forward(seq, dropout_p_, rng, train);       // within
  Tensor pooled = ops::mean_rows(seq);
  return ops::dropout(pooled, dropout_p_, rng, train);     // after
}

void TimeAggregator::collect_params(const std::string& prefix,
                                    NamedParams& out) const {
  block_.collect_params(prefix + "block.", out);
}

void TimeAggregator::set_trainable(bool trainable) {
  block_.set_trainable(trainable);
}

}  // namespace longrisk
