#pragma once

// Dynamic-view background replacement and the per-epoch original/augmented
// selection manifest.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltmot/diffusion.hpp"
#include "ltmot/error.hpp"
#include "ltmot/image.hpp"
#include "ltmot/inpaint.hpp"
#include "ltmot/masks.hpp"
#include "ltmot/mot_io.hpp"
#include "ltmot/rng.hpp"

namespace ltmot {

/// Logical OR of the masks of every pedestrian annotated in one frame.
inline Mask build_union_mask(const std::vector<TrackEntry>& frame_entries, const MaskProvider& masks) {
  Mask out(masks.width(), masks.height());
  for (const auto& e : frame_entries) {
    const MaskLayer layer = masks.get(e);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] |= layer.mask.data[i] != 0 ? 1 : 0;
  }
  return out;
}

/// Byte-wise 0xFF where the mask is set (or unset when `invert`), 0x00 elsewhere,
/// expanded to the image's channel count.
inline std::vector<std::uint8_t> mask_bytes(const Mask& mask, int channels, bool invert) {
  std::vector<std::uint8_t> out(mask.data.size() * static_cast<std::size_t>(channels));
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    const bool on = (mask.data[i] != 0) != invert;
    std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(i * channels), channels, on ? 0xFF : 0x00);
  }
  return out;
}

inline Image bitwise_and(const Image& img, const std::vector<std::uint8_t>& bytes) {
  Image out = img;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] &= bytes[i];
  return out;
}

/// Pedestrian pixels only (zero elsewhere).
inline Image pedestrians_only(const Image& original, const Mask& mask) {
  require_same_size(original, mask, "mask differs from image size");
  return bitwise_and(original, mask_bytes(mask, original.channels, false));
}

/// Original with pedestrian pixels zeroed.
inline Image remove_pedestrians(const Image& original, const Mask& mask) {
  require_same_size(original, mask, "mask differs from image size");
  return bitwise_and(original, mask_bytes(mask, original.channels, true));
}

/// (diffused AND NOT mask) OR (pedestrians AND mask): pedestrian pixels come
/// from `pedestrians`, everything else from `diffused`, bit for bit.
inline Image merge(const Image& diffused, const Mask& union_mask, const Image& pedestrians) {
  require_same_shape(diffused, pedestrians, "merge inputs differ in shape");
  require_same_size(diffused, union_mask, "merge mask differs from image size");
  const auto keep_bg = mask_bytes(union_mask, diffused.channels, true);
  Image out = diffused;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = static_cast<std::uint8_t>((diffused.data[i] & keep_bg[i]) | (pedestrians.data[i] & ~keep_bg[i]));
  }
  return out;
}

/// All intermediate rasters of one frame.
struct DvaFrameSet {
  Image original;
  Mask union_mask;
  Image pedestrians;
  Image background_removed;
  Image inpainted;
  Image diffused;
  Image merged;
};

struct DvaParams {
  std::string prompt = "A street";
  double strength = 0.4;
  InpaintParams inpaint;
};

inline DvaFrameSet run_dva_frame(const Image& original, const Mask& union_mask, DiffusionClient& client,
                                 const DvaParams& params, std::uint64_t seed) {
  DvaFrameSet s;
  s.original = original;
  s.union_mask = union_mask;
  s.pedestrians = pedestrians_only(original, union_mask);
  s.background_removed = remove_pedestrians(original, union_mask);
  s.inpainted = inpaint(s.background_removed, union_mask, params.inpaint);
  s.diffused = client.diffuse({s.inpainted, params.prompt, params.strength, seed});
  require_same_shape(s.diffused, original, "diffused image differs from original");
  s.merged = merge(s.diffused, union_mask, s.pedestrians);
  return s;
}

// ---------------------------------------------------------------------------
// epoch manifest

enum class ImageChoice : std::uint8_t { original = 0, augmented = 1 };

struct EpochManifest {
  std::int64_t epoch = 0;  // 0-based
  double threshold = 0.9;  // T_s
  std::uint64_t seed = 0;
  std::vector<ImageChoice> choices;  // per image index

  friend bool operator==(const EpochManifest&, const EpochManifest&) = default;
};

inline constexpr std::uint64_t kManifestStream = 0x6d61'6e69'6665'7374ULL;

/// P in (0,1] drawn for (image, epoch); depends on nothing else.
inline double selection_draw(std::uint64_t seed, std::int64_t epoch, std::int64_t image) {
  SplitMix64 rng(derive_seed(seed, {kManifestStream, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(image)}));
  return uniform_open_closed(rng);
}

/// Image i uses the original in epoch n iff its draw P <= T_s.
inline std::vector<EpochManifest> make_manifest(std::int64_t num_images, std::int64_t epochs, double threshold,
                                                std::uint64_t seed) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorCode::InvalidThreshold, "T_s must lie in [0,1]");
  if (num_images < 0 || epochs < 0) throw Error(ErrorCode::InvalidValue, "negative manifest size");
  std::vector<EpochManifest> out;
  out.reserve(static_cast<std::size_t>(epochs));
  for (std::int64_t n = 0; n < epochs; ++n) {
    EpochManifest m{n, threshold, seed, {}};
    m.choices.reserve(static_cast<std::size_t>(num_images));
    for (std::int64_t i = 0; i < num_images; ++i) {
      m.choices.push_back(selection_draw(seed, n, i) <= threshold ? ImageChoice::original : ImageChoice::augmented);
    }
    out.push_back(std::move(m));
  }
  return out;
}

inline nlohmann::ordered_json manifest_to_json(const std::vector<EpochManifest>& epochs, std::uint64_t seed,
                                               double threshold) {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["T_s"] = threshold;
  j["epochs"] = nlohmann::ordered_json::array();
  for (const auto& e : epochs) {
    nlohmann::ordered_json row;
    row["epoch"] = e.epoch;
    auto& c = row["choices"] = nlohmann::ordered_json::array();
    for (auto v : e.choices) c.push_back(static_cast<int>(v));
    j["epochs"].push_back(std::move(row));
  }
  return j;
}

inline std::vector<EpochManifest> manifest_from_json(const nlohmann::json& j) {
  try {
    const auto seed = j.at("seed").get<std::uint64_t>();
    const auto ts = j.at("T_s").get<double>();
    std::vector<EpochManifest> out;
    for (const auto& row : j.at("epochs")) {
      EpochManifest m{row.at("epoch").get<std::int64_t>(), ts, seed, {}};
      for (const auto& v : row.at("choices")) {
        const int c = v.get<int>();
        if (c != 0 && c != 1) throw Error(ErrorCode::SchemaError, "choice must be 0 or 1");
        m.choices.push_back(static_cast<ImageChoice>(c));
      }
      out.push_back(std::move(m));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

}  // namespace ltmot
