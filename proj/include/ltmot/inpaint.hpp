#pragma once

// Diffusion-style hole filling: values are carried inward from the hole
// boundary layer by layer, then relaxed toward a harmonic (smooth) surface.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ltmot/error.hpp"
#include "ltmot/image.hpp"

namespace ltmot {

struct InpaintParams {
  int iterations = 300;
  double tolerance = 0.1;  // stop once the largest per-pixel update drops below this
};

struct InpaintStats {
  int iterations_run = 0;
  double last_max_update = 0.0;
};

/// Pixels outside `mask` are copied bit-exactly; pixels inside are filled.
inline Image inpaint(const Image& image, const Mask& mask, const InpaintParams& params = {},
                     InpaintStats* stats = nullptr) {
  require_same_size(image, mask, "inpaint mask differs from image size");
  if (params.iterations < 1) throw Error(ErrorCode::InvalidValue, "inpaint iterations must be >= 1");
  const std::size_t hole = mask.area();
  if (hole == 0) return image;
  const int w = image.width;
  const int h = image.height;
  const int c = image.channels;
  if (hole == static_cast<std::size_t>(w) * h) throw Error(ErrorCode::MaskCoversEverything, "no boundary data");

  std::vector<float> buf(image.data.begin(), image.data.end());
  std::vector<std::uint8_t> known(static_cast<std::size_t>(w) * h);
  std::vector<int> unknown_px;
  unknown_px.reserve(hole);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool in_hole = mask.at(x, y);
      known[static_cast<std::size_t>(y) * w + x] = in_hole ? 0 : 1;
      if (in_hole) unknown_px.push_back(y * w + x);
    }
  }

  // Onion peel: each layer takes the mean of its already-known 8-neighbours.
  std::vector<int> remaining = unknown_px;
  std::vector<int> layer;
  std::vector<int> deferred;
  std::vector<float> acc(static_cast<std::size_t>(c));
  while (!remaining.empty()) {
    layer.clear();
    deferred.clear();
    for (int p : remaining) {
      const int x = p % w;
      const int y = p / w;
      bool touches = false;
      for (int ny = std::max(0, y - 1); ny <= std::min(h - 1, y + 1) && !touches; ++ny) {
        for (int nx = std::max(0, x - 1); nx <= std::min(w - 1, x + 1); ++nx) {
          if (known[static_cast<std::size_t>(ny) * w + nx]) {
            touches = true;
            break;
          }
        }
      }
      (touches ? layer : deferred).push_back(p);
    }
    std::vector<float> values(layer.size() * static_cast<std::size_t>(c));
    for (std::size_t k = 0; k < layer.size(); ++k) {
      const int x = layer[k] % w;
      const int y = layer[k] / w;
      std::fill(acc.begin(), acc.end(), 0.0f);
      int n = 0;
      for (int ny = std::max(0, y - 1); ny <= std::min(h - 1, y + 1); ++ny) {
        for (int nx = std::max(0, x - 1); nx <= std::min(w - 1, x + 1); ++nx) {
          const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
          if (!known[q]) continue;
          for (int ch = 0; ch < c; ++ch) acc[ch] += buf[q * c + ch];
          ++n;
        }
      }
      for (int ch = 0; ch < c; ++ch) values[k * c + ch] = acc[ch] / static_cast<float>(n);
    }
    for (std::size_t k = 0; k < layer.size(); ++k) {
      const std::size_t q = static_cast<std::size_t>(layer[k]);
      std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(k * c), c, buf.begin() + static_cast<std::ptrdiff_t>(q * c));
      known[q] = 1;
    }
    remaining.swap(deferred);
  }

  // Gauss-Seidel relaxation of the Laplace equation inside the hole.
  InpaintStats st;
  for (int it = 0; it < params.iterations; ++it) {
    double max_update = 0.0;
    for (int p : unknown_px) {
      const int x = p % w;
      const int y = p / w;
      std::fill(acc.begin(), acc.end(), 0.0f);
      int n = 0;
      auto add = [&](int nx, int ny) {
        const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
        for (int ch = 0; ch < c; ++ch) acc[ch] += buf[q * c + ch];
        ++n;
      };
      if (x > 0) add(x - 1, y);
      if (x + 1 < w) add(x + 1, y);
      if (y > 0) add(x, y - 1);
      if (y + 1 < h) add(x, y + 1);
      for (int ch = 0; ch < c; ++ch) {
        float& v = buf[static_cast<std::size_t>(p) * c + ch];
        const float next = acc[ch] / static_cast<float>(n);
        max_update = std::max(max_update, static_cast<double>(std::fabs(next - v)));
        v = next;
      }
    }
    st.iterations_run = it + 1;
    st.last_max_update = max_update;
    if (max_update < params.tolerance) break;
  }
  if (stats) *stats = st;

  Image out = image;
  for (int p : unknown_px) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t i = static_cast<std::size_t>(p) * c + ch;
      out.data[i] = static_cast<std::uint8_t>(std::clamp(std::lround(buf[i]), 0L, 255L));
    }
  }
  return out;
}

}  // namespace ltmot
