#pragma once

// 8-bit interleaved rasters and binary masks. Codec work goes through
// OpenCV's imgcodecs; every pixel operation in the library works on these
// plain types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "ltmot/error.hpp"
#include "ltmot/mot_io.hpp"

namespace ltmot {

struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> data;  // row-major, interleaved

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t index(int x, int y) const { return (static_cast<std::size_t>(y) * width + x) * channels; }
  std::uint8_t* pixel(int x, int y) { return data.data() + index(x, y); }
  const std::uint8_t* pixel(int x, int y) const { return data.data() + index(x, y); }
  bool same_shape(const Image& o) const { return width == o.width && height == o.height && channels == o.channels; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Full-frame binary raster; nonzero = foreground.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int w, int h, std::uint8_t fill = 0) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  bool at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v = true) { data[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t area() const {
    return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
  }
  bool empty_foreground() const { return area() == 0; }

  friend bool operator==(const Mask&, const Mask&) = default;
};

inline void require_same_size(const Image& a, const Mask& m, const char* what) {
  if (a.width != m.width || a.height != m.height) throw Error(ErrorCode::DimensionMismatch, what);
}

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) throw Error(ErrorCode::DimensionMismatch, what);
}

/// Pixel coordinate of a fractional box edge; rounding happens only here.
inline int round_px(double v) { return static_cast<int>(std::floor(v + 0.5)); }

/// Rasterizes [round(left), round(left+w)) x [round(top), round(top+h)), clipped to the frame.
inline Mask rasterize_box(int width, int height, double left, double top, double box_w, double box_h) {
  Mask m(width, height);
  const int x0 = std::clamp(round_px(left), 0, width);
  const int y0 = std::clamp(round_px(top), 0, height);
  const int x1 = std::clamp(round_px(left + box_w), 0, width);
  const int y1 = std::clamp(round_px(top + box_h), 0, height);
  for (int y = y0; y < y1; ++y) {
    std::fill(m.data.begin() + static_cast<std::ptrdiff_t>(y) * width + x0,
              m.data.begin() + static_cast<std::ptrdiff_t>(y) * width + x1, std::uint8_t{1});
  }
  return m;
}

inline Mask rasterize_box(int width, int height, const TrackEntry& e) {
  return rasterize_box(width, height, e.left, e.top, e.width, e.height);
}

// ---------------------------------------------------------------------------
// codecs

inline Image from_mat(const cv::Mat& mat) {
  Image img(mat.cols, mat.rows, mat.channels());
  const std::size_t row_bytes = static_cast<std::size_t>(mat.cols) * mat.channels();
  for (int y = 0; y < mat.rows; ++y) {
    std::copy_n(mat.ptr<std::uint8_t>(y), row_bytes, img.data.begin() + static_cast<std::ptrdiff_t>(y) * row_bytes);
  }
  return img;
}

inline cv::Mat to_mat(const Image& img) {
  cv::Mat mat(img.height, img.width, CV_8UC(img.channels));
  const std::size_t row_bytes = static_cast<std::size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y) {
    std::copy_n(img.data.begin() + static_cast<std::ptrdiff_t>(y) * row_bytes, row_bytes, mat.ptr<std::uint8_t>(y));
  }
  return mat;
}

/// Loads any codec OpenCV understands as 3-channel 8-bit.
inline Image load_image(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::MissingFrame, path.string());
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (mat.empty()) throw Error(ErrorCode::Io, "cannot decode " + path.string());
  return from_mat(mat);
}

inline void save_png(const Image& img, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), to_mat(img), {cv::IMWRITE_PNG_COMPRESSION, 3})) {
    throw Error(ErrorCode::Io, "cannot write " + path.string());
  }
}

inline std::vector<std::uint8_t> encode_png(const Image& img) {
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", to_mat(img), buf, {cv::IMWRITE_PNG_COMPRESSION, 3})) {
    throw Error(ErrorCode::Io, "png encode failed");
  }
  return buf;
}

inline Image decode_image(std::span<const std::uint8_t> bytes) {
  cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat mat = cv::imdecode(raw, cv::IMREAD_COLOR);
  if (mat.empty()) throw Error(ErrorCode::Io, "cannot decode image payload");
  return from_mat(mat);
}

/// 8-bit grayscale PNG, nonzero = foreground.
inline Mask load_mask(const fs::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (mat.empty()) throw Error(ErrorCode::Io, "cannot decode mask " + path.string());
  Mask m(mat.cols, mat.rows);
  for (int y = 0; y < mat.rows; ++y) {
    const std::uint8_t* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < mat.cols; ++x) m.set(x, y, row[x] != 0);
  }
  return m;
}

inline void save_mask(const Mask& m, const fs::path& path) {
  cv::Mat mat(m.height, m.width, CV_8UC1);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) mat.at<std::uint8_t>(y, x) = m.at(x, y) ? 255 : 0;
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat)) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

}  // namespace ltmot
