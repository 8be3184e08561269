#pragma once

// Per-(frame, identity) foreground masks: read from `<seq>/masks/` when
// present, otherwise the annotated rectangle if the policy allows it.

#include <cstdint>
#include <string>

#include "ltmot/image.hpp"
#include "ltmot/mot_io.hpp"

namespace ltmot {

enum class MaskSource { file, bbox_fallback };
enum class MaskPolicy { bbox, none };

inline MaskPolicy parse_mask_policy(std::string_view s) {
  if (s == "bbox") return MaskPolicy::bbox;
  if (s == "none") return MaskPolicy::none;
  throw Error(ErrorCode::Config, "unknown mask policy '" + std::string(s) + "'");
}

struct MaskLayer {
  std::int64_t frame = 0;
  std::int64_t identity = 0;
  Mask mask;
  MaskSource source = MaskSource::bbox_fallback;
};

inline std::string mask_file_name(std::int64_t frame, std::int64_t identity) {
  std::string name = frame_file_name(frame, "");
  return name + "_" + std::to_string(identity) + ".png";
}

class MaskProvider {
 public:
  MaskProvider(fs::path mask_dir, int width, int height, MaskPolicy policy)
      : dir_(std::move(mask_dir)), width_(width), height_(height), policy_(policy) {}

  /// Mask for the pedestrian annotated by `e`; throws MissingMask when no
  /// file exists and fallback is disabled.
  MaskLayer get(const TrackEntry& e) const {
    MaskLayer layer{e.frame, e.identity, {}, MaskSource::file};
    if (!dir_.empty()) {
      const fs::path p = dir_ / mask_file_name(e.frame, e.identity);
      if (fs::exists(p)) {
        layer.mask = load_mask(p);
        if (layer.mask.width != width_ || layer.mask.height != height_) {
          throw Error(ErrorCode::DimensionMismatch, "mask " + p.string() + " does not match frame size");
        }
        return layer;
      }
    }
    if (policy_ != MaskPolicy::bbox) {
      throw Error(ErrorCode::MissingMask,
                  "frame " + std::to_string(e.frame) + " identity " + std::to_string(e.identity));
    }
    layer.mask = rasterize_box(width_, height_, e);
    layer.source = MaskSource::bbox_fallback;
    return layer;
  }

  int width() const { return width_; }
  int height() const { return height_; }

 private:
  fs::path dir_;
  int width_;
  int height_;
  MaskPolicy policy_;
};

}  // namespace ltmot
