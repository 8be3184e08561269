#pragma once

// Pipeline configuration: JSON file, named presets, flag overrides.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltmot/diffusion.hpp"
#include "ltmot/error.hpp"
#include "ltmot/inpaint.hpp"
#include "ltmot/kalman.hpp"
#include "ltmot/masks.hpp"
#include "ltmot/mot_io.hpp"

namespace ltmot {

struct SequenceSettings {
  std::optional<CameraMotion> camera_motion;
  std::optional<double> class_threshold;  // T_j override
  std::optional<std::string> prompt;
};

struct DiffusionSettings {
  DiffusionMode mode = DiffusionMode::stub;
  std::string url = "http://127.0.0.1:7860";
  std::string prompt = "A street";
  double strength = 0.4;
  int timeout_ms = 60000;
  int retries = 2;
  int max_in_flight = 4;
};

struct PipelineConfig {
  std::string dataset_root;
  std::string out;
  std::uint64_t seed = 0;
  int jobs = 1;
  double class_threshold = 120.0;     // T_j default for every sequence
  double visibility_threshold = 1.0;  // T_v
  double selection_threshold = 0.9;   // T_s
  int groups = 3;                     // K
  int epochs = 30;
  bool active_only = true;
  std::optional<std::int64_t> class_filter;
  MaskPolicy mask_policy = MaskPolicy::bbox;
  DiffusionSettings diffusion;
  InpaintParams inpaint;
  KalmanParams kalman;
  std::map<std::string, SequenceSettings> sequences;

  /// Settings of the entry whose key equals `name` or is a dash-delimited
  /// prefix of it ("MOT17-02" covers "MOT17-02-FRCNN"); longest key wins.
  const SequenceSettings* settings_for(const std::string& name) const {
    const SequenceSettings* best = nullptr;
    std::size_t best_len = 0;
    for (const auto& [key, s] : sequences) {
      const bool match = name == key || (name.size() > key.size() && name.compare(0, key.size(), key) == 0 &&
                                          name[key.size()] == '-');
      if (match && key.size() >= best_len) {
        best = &s;
        best_len = key.size();
      }
    }
    return best;
  }

  double threshold_for(const std::string& name) const {
    const auto* s = settings_for(name);
    return (s && s->class_threshold) ? *s->class_threshold : class_threshold;
  }

  std::optional<CameraMotion> motion_for(const std::string& name) const {
    const auto* s = settings_for(name);
    return s ? s->camera_motion : std::nullopt;
  }

  std::string prompt_for(const std::string& name) const {
    const auto* s = settings_for(name);
    return (s && s->prompt) ? *s->prompt : diffusion.prompt;
  }

  ServiceOptions service_options() const {
    return {diffusion.url, diffusion.timeout_ms, diffusion.retries, diffusion.max_in_flight};
  }
};

inline void validate(const PipelineConfig& c) {
  auto bad = [](const std::string& what) { return Error(ErrorCode::Config, what); };
  if (!(c.class_threshold > 0.0)) throw bad("T_j must be > 0");
  for (const auto& [name, s] : c.sequences) {
    if (s.class_threshold && !(*s.class_threshold > 0.0)) throw bad("T_j of " + name + " must be > 0");
  }
  if (!(c.visibility_threshold >= 0.0 && c.visibility_threshold <= 1.0)) throw bad("T_v must lie in [0,1]");
  if (!(c.selection_threshold >= 0.0 && c.selection_threshold <= 1.0)) throw bad("T_s must lie in [0,1]");
  if (c.groups < 1) throw bad("K must be >= 1");
  if (c.epochs < 0) throw bad("epochs must be >= 0");
  if (c.jobs < 1) throw bad("jobs must be >= 1");
  if (!(c.diffusion.strength >= 0.0 && c.diffusion.strength <= 1.0)) throw bad("strength must lie in [0,1]");
  if (c.diffusion.timeout_ms < 1 || c.diffusion.retries < 0 || c.diffusion.max_in_flight < 1) {
    throw bad("diffusion timeout/retries/max_in_flight out of range");
  }
  if (c.inpaint.iterations < 1 || !(c.inpaint.tolerance > 0.0)) throw bad("inpaint iterations/tolerance out of range");
  if (!(c.kalman.init_position_var > 0.0 && c.kalman.init_velocity_var > 0.0 && c.kalman.process_noise >= 0.0 &&
        c.kalman.measurement_noise > 0.0)) {
    throw bad("kalman variances out of range");
  }
}

// ---------------------------------------------------------------------------
// presets

inline std::vector<std::string> preset_names() { return {"mot15", "mot16", "mot17", "mot20"}; }

inline PipelineConfig preset(const std::string& name) {
  PipelineConfig c;
  auto stationary = [&](const std::string& seq) { c.sequences[seq].camera_motion = CameraMotion::stationary; };
  auto dynamic = [&](const std::string& seq, const std::string& prompt) {
    c.sequences[seq].camera_motion = CameraMotion::dynamic;
    c.sequences[seq].prompt = prompt;
  };
  c.visibility_threshold = 1.0;
  c.diffusion.strength = 0.4;
  c.diffusion.prompt = "A street";
  if (name == "mot15") {
    c.class_threshold = 15.0;
    c.selection_threshold = 0.8;
    c.groups = 3;
    for (const char* s : {"ADL-Rundle-6", "KITTI-17", "PETS09-S2L1", "TUD-Campus", "Venice-2"}) stationary(s);
    for (const char* s : {"ADL-Rundle-8", "ETH-Bahnhof", "ETH-Pedcross2", "ETH-Sunnyday", "KITTI-13", "TUD-Stadtmitte"}) {
      dynamic(s, "A street");
    }
  } else if (name == "mot16" || name == "mot17") {
    const std::string p = name == "mot16" ? "MOT16-" : "MOT17-";
    c.class_threshold = 120.0;
    c.selection_threshold = 0.9;
    c.groups = 3;
    for (const char* s : {"02", "04", "09"}) stationary(p + s);
    for (const char* s : {"05", "10", "13"}) dynamic(p + s, "A street");
    dynamic(p + "11", "A mall");
  } else if (name == "mot20") {
    c.class_threshold = 1000.0;
    c.groups = 2;
    for (const char* s : {"MOT20-01", "MOT20-02", "MOT20-03", "MOT20-05"}) stationary(s);
  } else {
    throw Error(ErrorCode::Config, "unknown preset '" + name + "'");
  }
  return c;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::Config, where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw Error(ErrorCode::Config, "unknown key '" + k + "' in " + where);
  }
}

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace detail

/// Applies the keys present in `j` on top of `c`. Unknown keys are errors.
inline void apply_json(PipelineConfig& c, const nlohmann::json& j) {
  using detail::read_opt;
  try {
    detail::reject_unknown(j,
                           {"dataset_root", "out", "seed", "jobs", "T_j", "T_v", "T_s", "K", "epochs", "active_only",
                            "class_filter", "mask_policy", "diffusion", "inpaint", "kalman", "sequences"},
                           "config");
    read_opt(j, "dataset_root", c.dataset_root);
    read_opt(j, "out", c.out);
    read_opt(j, "seed", c.seed);
    read_opt(j, "jobs", c.jobs);
    read_opt(j, "T_j", c.class_threshold);
    read_opt(j, "T_v", c.visibility_threshold);
    read_opt(j, "T_s", c.selection_threshold);
    read_opt(j, "K", c.groups);
    read_opt(j, "epochs", c.epochs);
    read_opt(j, "active_only", c.active_only);
    if (j.contains("class_filter")) {
      c.class_filter = j["class_filter"].is_null() ? std::nullopt
                                                   : std::optional<std::int64_t>(j["class_filter"].get<std::int64_t>());
    }
    if (j.contains("mask_policy")) c.mask_policy = parse_mask_policy(j["mask_policy"].get<std::string>());
    if (j.contains("diffusion")) {
      const auto& d = j["diffusion"];
      detail::reject_unknown(d, {"mode", "url", "prompt", "strength", "timeout_ms", "retries", "max_in_flight"},
                             "diffusion");
      if (d.contains("mode")) {
        const auto mode = d["mode"].get<std::string>();
        if (mode == "stub") {
          c.diffusion.mode = DiffusionMode::stub;
        } else if (mode == "service") {
          c.diffusion.mode = DiffusionMode::service;
        } else {
          throw Error(ErrorCode::Config, "diffusion.mode must be stub or service");
        }
      }
      read_opt(d, "url", c.diffusion.url);
      read_opt(d, "prompt", c.diffusion.prompt);
      read_opt(d, "strength", c.diffusion.strength);
      read_opt(d, "timeout_ms", c.diffusion.timeout_ms);
      read_opt(d, "retries", c.diffusion.retries);
      read_opt(d, "max_in_flight", c.diffusion.max_in_flight);
    }
    if (j.contains("inpaint")) {
      const auto& p = j["inpaint"];
      detail::reject_unknown(p, {"iterations", "tolerance"}, "inpaint");
      read_opt(p, "iterations", c.inpaint.iterations);
      read_opt(p, "tolerance", c.inpaint.tolerance);
    }
    if (j.contains("kalman")) {
      const auto& k = j["kalman"];
      detail::reject_unknown(k, {"init_position_var", "init_velocity_var", "process_noise", "measurement_noise"},
                             "kalman");
      read_opt(k, "init_position_var", c.kalman.init_position_var);
      read_opt(k, "init_velocity_var", c.kalman.init_velocity_var);
      read_opt(k, "process_noise", c.kalman.process_noise);
      read_opt(k, "measurement_noise", c.kalman.measurement_noise);
    }
    if (j.contains("sequences") && !j["sequences"].is_object()) {
      throw Error(ErrorCode::Config, "sequences must be an object");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, e.what());
  }
  if (j.contains("sequences")) {
    try {
      for (const auto& [name, s] : j["sequences"].items()) {
        detail::reject_unknown(s, {"camera_motion", "T_j", "prompt"}, "sequences." + name);
        auto& dst = c.sequences[name];
        if (s.contains("camera_motion")) dst.camera_motion = parse_camera_motion(s["camera_motion"].get<std::string>());
        if (s.contains("T_j")) dst.class_threshold = s["T_j"].get<double>();
        if (s.contains("prompt")) dst.prompt = s["prompt"].get<std::string>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Config, e.what());
    }
  }
}

inline nlohmann::ordered_json to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["dataset_root"] = c.dataset_root;
  j["out"] = c.out;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["T_j"] = c.class_threshold;
  j["T_v"] = c.visibility_threshold;
  j["T_s"] = c.selection_threshold;
  j["K"] = c.groups;
  j["epochs"] = c.epochs;
  j["active_only"] = c.active_only;
  j["class_filter"] = c.class_filter ? nlohmann::ordered_json(*c.class_filter) : nlohmann::ordered_json(nullptr);
  j["mask_policy"] = c.mask_policy == MaskPolicy::bbox ? "bbox" : "none";
  j["diffusion"] = {{"mode", c.diffusion.mode == DiffusionMode::stub ? "stub" : "service"},
                    {"url", c.diffusion.url},
                    {"prompt", c.diffusion.prompt},
                    {"strength", c.diffusion.strength},
                    {"timeout_ms", c.diffusion.timeout_ms},
                    {"retries", c.diffusion.retries},
                    {"max_in_flight", c.diffusion.max_in_flight}};
  j["inpaint"] = {{"iterations", c.inpaint.iterations}, {"tolerance", c.inpaint.tolerance}};
  j["kalman"] = {{"init_position_var", c.kalman.init_position_var},
                 {"init_velocity_var", c.kalman.init_velocity_var},
                 {"process_noise", c.kalman.process_noise},
                 {"measurement_noise", c.kalman.measurement_noise}};
  auto& seqs = j["sequences"] = nlohmann::ordered_json::object();
  for (const auto& [name, s] : c.sequences) {
    nlohmann::ordered_json e = nlohmann::ordered_json::object();
    if (s.camera_motion) e["camera_motion"] = std::string(to_string(*s.camera_motion));
    if (s.class_threshold) e["T_j"] = *s.class_threshold;
    if (s.prompt) e["prompt"] = *s.prompt;
    seqs[name] = std::move(e);
  }
  return j;
}

/// Preset (if any), then the config file (if any). Flag overrides are applied by the caller.
inline PipelineConfig load_config(const std::optional<std::string>& preset_name, const std::optional<fs::path>& file) {
  PipelineConfig c = preset_name ? preset(*preset_name) : PipelineConfig{};
  if (file) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(detail::read_file(*file));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::Config, file->string() + ": " + e.what());
    }
    apply_json(c, j);
  }
  return c;
}

}  // namespace ltmot
