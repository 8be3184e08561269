#pragma once

// Stationary-view trajectory continuation.
//
// A tail identity that leaves the scene before the last frame is replayed in
// reverse after it disappears (backtracking). A tail identity still present
// in the last frame is extrapolated with a Kalman filter and pasted into the
// frames before it first appears (prediction).

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ltmot/error.hpp"
#include "ltmot/image.hpp"
#include "ltmot/kalman.hpp"
#include "ltmot/masks.hpp"
#include "ltmot/mot_io.hpp"
#include "ltmot/parallel.hpp"
#include "ltmot/rng.hpp"

namespace ltmot {

enum class ContinuationMode { backtrack, predict };

inline std::string_view to_string(ContinuationMode m) {
  return m == ContinuationMode::backtrack ? "backtrack" : "predict";
}

struct Placement {
  std::int64_t frame = 0;  // target frame j
  double left = 0.0;
  double top = 0.0;
  TrackEntry source;  // entry whose pixels and size are pasted
};

struct ContinuationPlan {
  std::int64_t identity = 0;
  ContinuationMode mode = ContinuationMode::backtrack;
  std::int64_t source_first = 0;  // m
  std::int64_t source_last = 0;   // n
  std::int64_t target_first = 0;  // inclusive; target_first > target_last means empty
  std::int64_t target_last = -1;
  std::vector<Placement> placements;  // ascending target frame
};

/// BF_end = min(F_total, 2n - m).
constexpr std::int64_t backtrack_end(std::int64_t m, std::int64_t n, std::int64_t total) {
  return std::min(total, 2 * n - m);
}

/// KF_start = max(1, 2m - F_total).
constexpr std::int64_t predict_start(std::int64_t m, std::int64_t total) { return std::max<std::int64_t>(1, 2 * m - total); }

/// Target j in [n+1, BF_end] replays source frame 2n - j; frames where the
/// identity was not annotated (gaps) produce no placement.
inline ContinuationPlan plan_backtrack(const Trajectory& traj, const SequenceMeta& meta) {
  const std::int64_t m = traj.first_frame();
  const std::int64_t n = traj.last_frame();
  const std::int64_t total = meta.seq_length;
  if (n >= total) {
    throw Error(ErrorCode::NotApplicable, "identity " + std::to_string(traj.identity) + " is present in the last frame");
  }
  if (m == n) throw Error(ErrorCode::EmptyPlan, "identity " + std::to_string(traj.identity) + " spans one frame");

  ContinuationPlan plan{traj.identity, ContinuationMode::backtrack, m, n, n + 1, backtrack_end(m, n, total), {}};
  for (std::int64_t j = plan.target_first; j <= plan.target_last; ++j) {
    if (const TrackEntry* src = traj.at_frame(2 * n - j)) plan.placements.push_back({j, src->left, src->top, *src});
  }
  return plan;
}

/// Stream tags; values are part of the output contract (changing them changes outputs).
inline constexpr std::uint64_t kTemplateStream = 0x7465'6d70'6c61'7465ULL;
inline constexpr std::uint64_t kPlacementStream = 0x706c'6163'656d'656eULL;

/// Runs the filter over frames m..F_total, predicts m - KF_start further
/// positions clamped so the template box stays inside the image, then draws
/// one position per target frame (with replacement). One template entry with
/// visibility >= T_v is drawn per trajectory. Draws use streams derived from
/// `stream_seed`, the identity and the target frame only.
inline ContinuationPlan plan_predict(const Trajectory& traj, const SequenceMeta& meta, double visibility_threshold,
                                     std::uint64_t stream_seed, const KalmanParams& kalman = {}) {
  const std::int64_t m = traj.first_frame();
  const std::int64_t n = traj.last_frame();
  const std::int64_t total = meta.seq_length;
  const std::string who = "identity " + std::to_string(traj.identity);
  if (n != total) throw Error(ErrorCode::NotApplicable, who + " leaves before the last frame");

  std::vector<const TrackEntry*> templates;
  for (const auto& e : traj.entries) {
    if (e.visibility >= visibility_threshold) templates.push_back(&e);
  }
  if (templates.empty()) throw Error(ErrorCode::NoVisibleTemplate, who);
  if (m == 1) throw Error(ErrorCode::EmptyPlan, who + " is present from the first frame");

  ContinuationPlan plan{traj.identity, ContinuationMode::predict, m, n, predict_start(m, total), m - 1, {}};

  SplitMix64 template_rng(derive_seed(stream_seed, {kTemplateStream, static_cast<std::uint64_t>(traj.identity)}));
  const TrackEntry& tmpl = *templates[uniform_index(template_rng, templates.size())];

  std::vector<Observation> obs;
  obs.reserve(traj.entries.size());
  for (const auto& e : traj.entries) obs.push_back({e.frame, e.left, e.top});
  const auto horizon = static_cast<std::size_t>(plan.target_last - plan.target_first + 1);
  auto pool = kalman_predict_series(obs, horizon, kalman);

  const double max_left = std::max(0.0, meta.im_width - tmpl.width);
  const double max_top = std::max(0.0, meta.im_height - tmpl.height);
  for (auto& p : pool) {
    p.x() = std::clamp(p.x(), 0.0, max_left);
    p.y() = std::clamp(p.y(), 0.0, max_top);
  }

  for (std::int64_t j = plan.target_first; j <= plan.target_last; ++j) {
    SplitMix64 rng(derive_seed(stream_seed, {kPlacementStream, static_cast<std::uint64_t>(traj.identity),
                                             static_cast<std::uint64_t>(j)}));
    const auto& p = pool[uniform_index(rng, pool.size())];
    plan.placements.push_back({j, p.x(), p.y(), tmpl});
  }
  return plan;
}

/// Ground-truth rows for every placement: original identity, size, flag,
/// class and visibility of the source entry; frame and position from the plan.
inline std::vector<TrackEntry> synthesize_entries(const std::vector<ContinuationPlan>& plans) {
  std::vector<TrackEntry> out;
  for (const auto& plan : plans) {
    for (const auto& p : plan.placements) {
      TrackEntry e = p.source;
      e.frame = p.frame;
      e.identity = plan.identity;
      e.left = p.left;
      e.top = p.top;
      out.push_back(e);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const TrackEntry& a, const TrackEntry& b) {
    return a.identity != b.identity ? a.identity < b.identity : a.frame < b.frame;
  });
  return out;
}

/// Placements grouped by target frame, each group ordered by identity so the
/// paste order (and hence overlap resolution) is fixed.
inline std::map<std::int64_t, std::vector<Placement>> placements_by_frame(const std::vector<ContinuationPlan>& plans) {
  std::map<std::int64_t, std::vector<Placement>> out;
  for (const auto& plan : plans) {
    for (const auto& p : plan.placements) out[p.frame].push_back(p);
  }
  for (auto& [frame, group] : out) {
    std::stable_sort(group.begin(), group.end(),
                     [](const Placement& a, const Placement& b) { return a.source.identity < b.source.identity; });
  }
  return out;
}

/// Copies the masked pixels of `source` onto `target`, shifted from the
/// source box to the planned position. Writes outside the frame are dropped.
inline void paste(Image& target, const Image& source, const Mask& mask, const Placement& p) {
  require_same_shape(target, source, "source frame differs from target frame");
  require_same_size(target, mask, "mask differs from frame size");
  const int dx = round_px(p.left) - round_px(p.source.left);
  const int dy = round_px(p.top) - round_px(p.source.top);
  const int c = target.channels;
  for (int y = 0; y < mask.height; ++y) {
    const int ty = y + dy;
    if (ty < 0 || ty >= target.height) continue;
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      const int tx = x + dx;
      if (tx < 0 || tx >= target.width) continue;
      std::copy_n(source.pixel(x, y), c, target.pixel(tx, ty));
    }
  }
}

using FrameLoader = std::function<Image(std::int64_t frame)>;
using FrameSink = std::function<void(std::int64_t frame, const Image& image)>;

inline Image composite_frame(Image target, const std::vector<Placement>& placements, const FrameLoader& load,
                             const MaskProvider& masks) {
  for (const auto& p : placements) {
    const Image src = load(p.source.frame);
    paste(target, src, masks.get(p.source).mask, p);
  }
  return target;
}

/// Composites every touched target frame and hands it to `sink`; returns the
/// synthetic ground-truth rows. Each target frame is produced by exactly one
/// worker.
inline std::vector<TrackEntry> composite_continuation(const std::vector<ContinuationPlan>& plans,
                                                      const FrameLoader& load, const MaskProvider& masks,
                                                      const FrameSink& sink, std::size_t jobs = 1) {
  const auto grouped = placements_by_frame(plans);
  std::vector<const std::pair<const std::int64_t, std::vector<Placement>>*> work;
  work.reserve(grouped.size());
  for (const auto& kv : grouped) work.push_back(&kv);
  parallel_for(work.size(), jobs, [&](std::size_t i) {
    const auto& [frame, group] = *work[i];
    sink(frame, composite_frame(load(frame), group, load, masks));
  });
  return synthesize_entries(plans);
}

}  // namespace ltmot
