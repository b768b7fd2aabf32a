#include "longrisk/image.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "longrisk/errors.hpp"

namespace longrisk {

namespace {

float to_le_f32(float v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[4];
    std::memcpy(b, &v, 4);
    std::swap(b[0], b[3]);
    std::swap(b[1], b[2]);
    std::memcpy(&v, b, 4);
  }
  return v;
}

}  // namespace

void write_pfm(const std::string& path, const Image& img) {
  if (img.empty()) throw IoError("write_pfm: empty image for " + path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("write_pfm: cannot open " + path);
  out << "Pf\n" << img.width << " " << img.height << "\n-1.0\n";
  // PFM stores rows bottom-up
  std::vector<float> row(img.width);
  for (std::size_t r = img.height; r-- > 0;) {
    for (std::size_t c = 0; c < img.width; ++c)
      row[c] = to_le_f32(static_cast<float>(img.at(r, c)));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw IoError("write_pfm: short write to " + path);
}

Image read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_pfm: cannot open " + path);
  std::string tag;
  in >> tag;
  if (tag != "Pf") {
    throw ParseError("read_pfm: " + path + ": expected grayscale 'Pf' header, got '" +
                     tag + "'");
  }
  std::size_t w = 0, h = 0;
  double scale = 0.0;
  in >> w >> h >> scale;
  if (!in || w == 0 || h == 0 || scale == 0.0) {
    throw ParseError("read_pfm: " + path + ": malformed header");
  }
  in.get();  // single whitespace byte after the scale
  const bool file_le = scale < 0.0;
  Image img(h, w);
  std::vector<float> row(w);
  for (std::size_t r = h; r-- > 0;) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(w * sizeof(float)));
    if (!in) throw ParseError("read_pfm: " + path + ": truncated pixel data");
    for (std::size_t c = 0; c < w; ++c) {
      float v = row[c];
      if (file_le != (std::endian::native == std::endian::little)) {
        unsigned char b[4];
        std::memcpy(b, &v, 4);
        std::swap(b[0], b[3]);
        std::swap(b[1], b[2]);
        std::memcpy(&v, b, 4);
      }
      img.at(r, c) = static_cast<double>(v);
    }
  }
  return img;
}

void quantize_to_float32(Image& img) {
  for (auto& v : img.px) v = static_cast<double>(static_cast<float>(v));
}

Image resize_bilinear(const Image& img, std::size_t h, std::size_t w) {
  if (img.empty()) throw ValidationError("resize_bilinear: empty image");
  if (img.height == h && img.width == w) return img;
  Image out(h, w);
  const double sy = static_cast<double>(img.height) / static_cast<double>(h);
  const double sx = static_cast<double>(img.width) / static_cast<double>(w);
  const auto sample_axis = [](double dst, double s, std::size_t n,
                              std::size_t& lo, std::size_t& hi, double& frac) {
    double src = (dst + 0.5) * s - 0.5;
    if (src < 0.0) src = 0.0;
    const double max_src = static_cast<double>(n - 1);
    if (src > max_src) src = max_src;
    lo = static_cast<std::size_t>(src);
    hi = lo + 1 < n ? lo + 1 : lo;
    frac = src - static_cast<double>(lo);
  };
#pragma omp parallel for schedule(static) if (h * w > 4096)
  for (long long r = 0; r < static_cast<long long>(h); ++r) {
    std::size_t r0, r1;
    double fy;
    sample_axis(static_cast<double>(r), sy, img.height, r0, r1, fy);
    for (std::size_t c = 0; c < w; ++c) {
      std::size_t c0, c1;
      double fx;
      sample_axis(static_cast<double>(c), sx, img.width, c0, c1, fx);
      const double top = img.at(r0, c0) * (1.0 - fx) + img.at(r0, c1) * fx;
      const double bot = img.at(r1, c0) * (1.0 - fx) + img.at(r1, c1) * fx;
      out.at(static_cast<std::size_t>(r), c) = top * (1.0 - fy) + bot * fy;
    }
  }
  return out;
}

Tensor preprocess_image(const Image& img, std::size_t h, std::size_t w,
                        double mean, double stddev) {
  if (img.empty()) throw ValidationError("preprocess_image: empty image");
  if (stddev <= 0.0) {
    throw ConfigError("preprocess_image: std must be positive, got " +
                      std::to_string(stddev));
  }
  const Image resized = resize_bilinear(img, h, w);
  std::vector<double> data(3 * h * w);
  const double inv = 1.0 / stddev;
  for (std::size_t i = 0; i < h * w; ++i) {
    const double v = (resized.px[i] - mean) * inv;
    data[i] = v;
    data[h * w + i] = v;
    data[2 * h * w + i] = v;
  }
  return Tensor::from_data({3, h, w}, std::move(data));
}

}  // namespace longrisk
