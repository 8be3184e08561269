#pragma once

// Dataset-level commands: stats, partition, sva, dva, manifest, groups.
// Each writes under config.out and echoes the effective configuration there.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltmot/config.hpp"
#include "ltmot/diffusion.hpp"
#include "ltmot/dva.hpp"
#include "ltmot/error.hpp"
#include "ltmot/group_softmax.hpp"
#include "ltmot/image.hpp"
#include "ltmot/longtail_stats.hpp"
#include "ltmot/masks.hpp"
#include "ltmot/mot_io.hpp"
#include "ltmot/parallel.hpp"
#include "ltmot/rng.hpp"
#include "ltmot/sva.hpp"

namespace ltmot {

inline constexpr std::uint64_t kSvaStream = 0x7376'61ULL;
inline constexpr std::uint64_t kDvaStream = 0x6476'61ULL;
inline constexpr std::uint64_t kDvaManifestStream = 0x6476'616dULL;

inline CountFilter count_filter(const PipelineConfig& cfg) { return {cfg.active_only, cfg.class_filter}; }

inline std::vector<SequenceDataset> load_all(const PipelineConfig& cfg) {
  if (cfg.dataset_root.empty()) throw Error(ErrorCode::Usage, "no dataset root given");
  std::vector<SequenceDataset> out;
  for (const auto& dir : list_sequences(cfg.dataset_root)) {
    try {
      out.push_back(load_sequence(dir));
    } catch (const Error& e) {
      if (e.detail().rfind(dir.filename().string(), 0) == 0) throw;
      throw e.within(dir.filename().string());
    }
    out.back().meta.camera_motion = cfg.motion_for(out.back().meta.name);
  }
  if (out.empty()) throw Error(ErrorCode::Io, "no sequences under " + cfg.dataset_root);
  return out;
}

inline fs::path require_out(const PipelineConfig& cfg) {
  if (cfg.out.empty()) throw Error(ErrorCode::Usage, "no output directory given");
  return fs::path(cfg.out);
}

/// Written without the output root.
inline void write_effective_config(const PipelineConfig& cfg) {
  auto j = to_json(cfg);
  j.erase("out");
  detail::write_file(require_out(cfg) / "effective_config.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// stats / partition

struct SequenceReport {
  std::string name;
  std::vector<ClassCount> counts;
  ClassPartition partition;
};

inline SequenceReport analyze_sequence(const SequenceDataset& d, const PipelineConfig& cfg) {
  SequenceReport r{d.meta.name, class_counts(d, count_filter(cfg)), {}};
  r.partition = partition_classes(r.counts, cfg.threshold_for(d.meta.name));
  return r;
}

/// One `<out>/stats/<sequence>.{csv,json}` pair per sequence.
inline std::vector<SequenceReport> cmd_stats(const PipelineConfig& cfg) {
  const fs::path out = require_out(cfg);
  std::vector<SequenceReport> reports;
  for (const auto& d : load_all(cfg)) {
    reports.push_back(analyze_sequence(d, cfg));
    emit_histogram(d.meta.name, reports.back().counts, reports.back().partition, out / "stats" / d.meta.name);
  }
  write_effective_config(cfg);
  return reports;
}

/// `<out>/partition/<sequence>.json`: {sequence, T_j, head, tail}.
inline std::vector<SequenceReport> cmd_partition(const PipelineConfig& cfg) {
  const fs::path out = require_out(cfg);
  std::vector<SequenceReport> reports;
  for (const auto& d : load_all(cfg)) {
    reports.push_back(analyze_sequence(d, cfg));
    const auto& p = reports.back().partition;
    nlohmann::ordered_json j;
    j["sequence"] = d.meta.name;
    j["T_j"] = p.threshold;
    j["head"] = std::vector<std::int64_t>(p.head.begin(), p.head.end());
    j["tail"] = std::vector<std::int64_t>(p.tail.begin(), p.tail.end());
    detail::write_file(out / "partition" / (d.meta.name + ".json"), j.dump(2) + "\n");
  }
  write_effective_config(cfg);
  return reports;
}

// ---------------------------------------------------------------------------
// shared helpers for the image stages

inline std::vector<SequenceDataset> select_by_motion(const PipelineConfig& cfg, CameraMotion wanted) {
  std::vector<SequenceDataset> picked;
  std::vector<std::string> unconfigured;
  for (auto& d : load_all(cfg)) {
    if (!d.meta.camera_motion) {
      unconfigured.push_back(d.meta.name);
    } else if (*d.meta.camera_motion == wanted) {
      picked.push_back(std::move(d));
    }
  }
  if (!unconfigured.empty()) {
    std::string names;
    for (const auto& n : unconfigured) names += (names.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::Config, "camera_motion not configured for: " + names);
  }
  if (picked.empty()) {
    throw Error(ErrorCode::Config, std::string("no sequences flagged ") + std::string(to_string(wanted)));
  }
  return picked;
}

inline Image load_frame_checked(const SequenceDataset& d, std::int64_t frame) {
  auto it = d.image_paths.find(frame);
  if (it == d.image_paths.end()) throw Error(ErrorCode::MissingFrame, d.meta.name + " frame " + std::to_string(frame));
  Image img = load_image(it->second);
  if (img.width != d.meta.im_width || img.height != d.meta.im_height) {
    throw Error(ErrorCode::DimensionMismatch, it->second.string() + " differs from seqinfo size");
  }
  return img;
}

/// Output copy of the sequence metadata; images become PNG in img1/.
inline SequenceMeta output_meta(const SequenceMeta& m) {
  SequenceMeta out = m;
  out.im_ext = ".png";
  out.im_dir = "img1";
  return out;
}

// ---------------------------------------------------------------------------
// sva

struct SvaSequenceSummary {
  std::int64_t n_tail = 0;
  std::int64_t n_backtracked = 0;
  std::int64_t n_predicted = 0;
  std::int64_t n_synthetic_rows = 0;
};

struct SvaSummary {
  std::int64_t n_backtracked = 0;
  std::int64_t n_predicted = 0;
  std::int64_t n_synthetic_rows = 0;
  std::map<std::string, SvaSequenceSummary> sequences;
};

/// Continuation plans for every tail identity of one stationary sequence.
/// Identities for which no continuation applies are skipped.
inline std::vector<ContinuationPlan> plan_sequence(const SequenceDataset& d, const ClassPartition& partition,
                                                   const PipelineConfig& cfg) {
  const std::uint64_t stream = derive_seed(cfg.seed, {kSvaStream, fnv1a64(d.meta.name)});
  std::vector<ContinuationPlan> plans;
  for (std::int64_t id : partition.tail) {
    const auto it = d.trajectories.find(id);
    if (it == d.trajectories.end()) continue;
    const Trajectory& traj = it->second;
    try {
      ContinuationPlan plan = traj.last_frame() < d.meta.seq_length
                                  ? plan_backtrack(traj, d.meta)
                                  : plan_predict(traj, d.meta, cfg.visibility_threshold, stream, cfg.kalman);
      if (!plan.placements.empty()) plans.push_back(std::move(plan));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyPlan && e.code() != ErrorCode::NoVisibleTemplate &&
          e.code() != ErrorCode::NotApplicable) {
        throw;
      }
    }
  }
  return plans;
}

inline SvaSummary cmd_sva(const PipelineConfig& cfg) {
  validate(cfg);
  const fs::path out_root = require_out(cfg);
  SvaSummary summary;
  for (const auto& d : select_by_motion(cfg, CameraMotion::stationary)) {
    const auto report = analyze_sequence(d, cfg);
    const auto plans = plan_sequence(d, report.partition, cfg);
    const fs::path seq_out = out_root / d.meta.name;
    const SequenceMeta meta = output_meta(d.meta);
    const MaskProvider masks(d.root / "masks", d.meta.im_width, d.meta.im_height, cfg.mask_policy);
    const auto touched = placements_by_frame(plans);
    const FrameLoader loader = [&d](std::int64_t f) { return load_frame_checked(d, f); };

    parallel_for(static_cast<std::size_t>(d.meta.seq_length), static_cast<std::size_t>(cfg.jobs), [&](std::size_t i) {
      const auto frame = static_cast<std::int64_t>(i) + 1;
      Image img = loader(frame);
      if (auto it = touched.find(frame); it != touched.end()) img = composite_frame(std::move(img), it->second, loader, masks);
      save_png(img, seq_out / meta.im_dir / frame_file_name(frame, meta.im_ext));
    });

    std::vector<TrackEntry> rows = d.entries;
    const auto synthetic = synthesize_entries(plans);
    rows.insert(rows.end(), synthetic.begin(), synthetic.end());
    write_gt(rows, seq_out / "gt" / "gt.txt");
    write_seqinfo(meta, seq_out / "seqinfo.ini");

    SvaSequenceSummary s;
    s.n_tail = static_cast<std::int64_t>(report.partition.tail.size());
    for (const auto& p : plans) (p.mode == ContinuationMode::backtrack ? s.n_backtracked : s.n_predicted)++;
    s.n_synthetic_rows = static_cast<std::int64_t>(synthetic.size());
    summary.n_backtracked += s.n_backtracked;
    summary.n_predicted += s.n_predicted;
    summary.n_synthetic_rows += s.n_synthetic_rows;
    summary.sequences[d.meta.name] = s;
  }

  nlohmann::ordered_json j;
  j["n_backtracked"] = summary.n_backtracked;
  j["n_predicted"] = summary.n_predicted;
  j["n_synthetic_rows"] = summary.n_synthetic_rows;
  auto& seqs = j["sequences"] = nlohmann::ordered_json::object();
  for (const auto& [name, s] : summary.sequences) {
    seqs[name] = {{"n_tail", s.n_tail},
                  {"n_backtracked", s.n_backtracked},
                  {"n_predicted", s.n_predicted},
                  {"n_synthetic_rows", s.n_synthetic_rows}};
  }
  detail::write_file(out_root / "sva_summary.json", j.dump(2) + "\n");
  write_effective_config(cfg);
  return summary;
}

// ---------------------------------------------------------------------------
// dva

struct DvaSummary {
  std::int64_t n_sequences = 0;
  std::int64_t n_images = 0;
};

inline std::string dva_file_name(std::int64_t frame) { return frame_file_name(frame, "") + "_dva.png"; }

/// Writes original and `_dva` PNGs side by side plus `manifest.json` per
/// dynamic sequence. `client` overrides the configured diffusion backend.
inline DvaSummary cmd_dva(const PipelineConfig& cfg, DiffusionClient* client = nullptr) {
  validate(cfg);
  const fs::path out_root = require_out(cfg);
  std::unique_ptr<DiffusionClient> owned;
  if (!client) {
    owned = make_diffusion_client(cfg.diffusion.mode, cfg.service_options());
    client = owned.get();
  }
  DvaSummary summary;
  for (const auto& d : select_by_motion(cfg, CameraMotion::dynamic)) {
    const fs::path seq_out = out_root / d.meta.name;
    const SequenceMeta meta = output_meta(d.meta);
    const MaskProvider masks(d.root / "masks", d.meta.im_width, d.meta.im_height, cfg.mask_policy);
    std::map<std::int64_t, std::vector<TrackEntry>> by_frame;
    for (const auto& e : d.entries) by_frame[e.frame].push_back(e);
    const DvaParams params{cfg.prompt_for(d.meta.name), cfg.diffusion.strength, cfg.inpaint};
    const std::uint64_t seq_hash = fnv1a64(d.meta.name);

    parallel_for(static_cast<std::size_t>(d.meta.seq_length), static_cast<std::size_t>(cfg.jobs), [&](std::size_t i) {
      const auto frame = static_cast<std::int64_t>(i) + 1;
      const Image original = load_frame_checked(d, frame);
      static const std::vector<TrackEntry> kNone;
      const auto it = by_frame.find(frame);
      const Mask mask = build_union_mask(it == by_frame.end() ? kNone : it->second, masks);
      const std::uint64_t seed = derive_seed(cfg.seed, {kDvaStream, seq_hash, static_cast<std::uint64_t>(frame)});
      const DvaFrameSet set = run_dva_frame(original, mask, *client, params, seed);
      save_png(original, seq_out / meta.im_dir / frame_file_name(frame, meta.im_ext));
      save_png(set.merged, seq_out / meta.im_dir / dva_file_name(frame));
    });

    write_gt(d.entries, seq_out / "gt" / "gt.txt");
    write_seqinfo(meta, seq_out / "seqinfo.ini");
    const std::uint64_t manifest_seed = derive_seed(cfg.seed, {kDvaManifestStream, seq_hash});
    const auto manifest = make_manifest(d.meta.seq_length, cfg.epochs, cfg.selection_threshold, manifest_seed);
    detail::write_file(seq_out / "manifest.json",
                       manifest_to_json(manifest, manifest_seed, cfg.selection_threshold).dump() + "\n");
    ++summary.n_sequences;
    summary.n_images += d.meta.seq_length;
  }
  nlohmann::ordered_json j;
  j["n_sequences"] = summary.n_sequences;
  j["n_images"] = summary.n_images;
  detail::write_file(out_root / "dva_summary.json", j.dump(2) + "\n");
  write_effective_config(cfg);
  return summary;
}

// ---------------------------------------------------------------------------
// manifest / groups

inline std::vector<EpochManifest> cmd_manifest(std::int64_t num_images, std::int64_t epochs, double threshold,
                                               std::uint64_t seed, const fs::path& path) {
  auto m = make_manifest(num_images, epochs, threshold, seed);
  detail::write_file(path, manifest_to_json(m, seed, threshold).dump() + "\n");
  return m;
}

/// Training-set class counts over every sequence: identities of later
/// sequences (sorted by name) are offset by the largest identity seen so
/// far, so classes never collide.
inline std::map<std::int64_t, std::int64_t> dataset_class_counts(const PipelineConfig& cfg) {
  std::map<std::int64_t, std::int64_t> counts;
  std::int64_t offset = 0;
  const CountFilter filter = count_filter(cfg);
  for (const auto& d : load_all(cfg)) {
    std::int64_t max_id = 0;
    for (const auto& e : d.entries) {
      max_id = std::max(max_id, e.identity);
      if (filter.accepts(e)) ++counts[offset + e.identity];
    }
    offset += max_id;
  }
  if (counts.empty()) throw Error(ErrorCode::EmptyDataset, "no entries left to count");
  return counts;
}

/// Counts file: JSON object {"class": N} or a stats histogram CSV.
inline std::map<std::int64_t, std::int64_t> read_class_counts(const fs::path& path) {
  const std::string text = detail::read_file(path);
  std::map<std::int64_t, std::int64_t> counts;
  if (path.extension() == ".csv") {
    for (const auto& row : parse_histogram_csv(text)) counts[row.identity] = row.count;
    return counts;
  }
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& [k, v] : j.items()) {
      auto cls = detail::to_int(k);
      if (!cls) throw Error(ErrorCode::SchemaError, "class key '" + k + "' is not an integer");
      counts[*cls] = v.get<std::int64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
  return counts;
}

}  // namespace ltmot
