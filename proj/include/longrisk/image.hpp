#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "longrisk/tensor.hpp"

namespace longrisk {

/// Single-channel 2-D float image, row-major, row 0 at the top.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> px;

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), px(h * w, fill) {}

  double& at(std::size_t r, std::size_t c) { return px[r * width + c]; }
  double at(std::size_t r, std::size_t c) const { return px[r * width + c]; }
  bool empty() const { return px.empty(); }
};

/// Portable FloatMap ("Pf") I/O. Values are stored as float32 with a
/// negative scale marking little-endian, rows bottom-up per the format.
void write_pfm(const std::string& path, const Image& img);
Image read_pfm(const std::string& path);

/// Snap every pixel to its float32 representation. Generated cohorts are
/// quantized up front so a PFM round trip is exact.
void quantize_to_float32(Image& img);

/// Bilinear resample to (h, w) using the half-pixel-center convention,
/// anchored at the top-left. Resampling at the native resolution is the
/// identity.
Image resize_bilinear(const Image& img, std::size_t h, std::size_t w);

/// Full preprocessing contract: resize to (h, w), normalize by (mean, std),
/// replicate to 3 channels. Returns a [3 x h x w] tensor.
Tensor preprocess_image(const Image& img, std::size_t h, std::size_t w,
                        double mean, double stddev);

}  // namespace longrisk
