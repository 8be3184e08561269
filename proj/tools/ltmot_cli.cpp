// ltmot: long-tail trajectory augmentation for MOTChallenge datasets.
//
//   ltmot stats     --dataset ROOT --out DIR [--class-filter pedestrian]
//   ltmot partition --dataset ROOT --out DIR [--T-j 120]
//   ltmot sva       --dataset ROOT --out DIR --preset mot17 --seed 7
//   ltmot dva       --dataset ROOT --out DIR --diffusion stub|http://host:port
//   ltmot manifest  --num-images N --epochs 30 --T-s 0.9 --out DIR
//   ltmot groups    (--dataset ROOT | --counts FILE) --K 3 --out DIR
//   ltmot gs-check  FIXTURE_DIR | --emit DIR
//
// Exit codes: 0 success, 1 check failure, 2 usage/config, 3 I/O or data, 4 diffusion service.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ltmot/config.hpp"
#include "ltmot/error.hpp"
#include "ltmot/gs_fixtures.hpp"
#include "ltmot/pipeline.hpp"

namespace {

using namespace ltmot;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Usage:
    case ErrorCode::Config:
    case ErrorCode::InvalidThreshold:
    case ErrorCode::NonPositiveThreshold:
      return 2;
    case ErrorCode::ServiceUnreachable:
    case ErrorCode::ServiceError:
      return 4;
    default:
      return 3;
  }
}

struct GlobalFlags {
  std::optional<std::string> config;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
  std::optional<std::string> dataset;
};

struct StageFlags {
  std::optional<double> class_threshold;
  std::optional<double> visibility_threshold;
  std::optional<double> selection_threshold;
  std::optional<int> groups;
  std::optional<int> epochs;
  std::optional<std::string> class_filter;
  bool all_rows = false;
  std::optional<std::string> mask_fallback;
  std::optional<std::string> diffusion;
  std::optional<double> strength;
  std::optional<std::string> prompt;
  std::optional<int> timeout_ms;
  std::optional<int> retries;
};

std::int64_t parse_class_filter(const std::string& s) {
  if (s == "pedestrian") return 1;
  auto v = ltmot::detail::to_int(s);
  if (!v) throw Error(ErrorCode::Usage, "class filter must be 'pedestrian' or an integer class id");
  return *v;
}

PipelineConfig effective_config(const GlobalFlags& g, const StageFlags& s) {
  std::optional<fs::path> file;
  if (g.config) file = fs::path(*g.config);
  PipelineConfig c = load_config(g.preset, file);
  if (g.seed) c.seed = *g.seed;
  if (g.out) c.out = *g.out;
  if (g.jobs) c.jobs = *g.jobs;
  if (g.dataset) c.dataset_root = *g.dataset;
  if (s.class_threshold) c.class_threshold = *s.class_threshold;
  if (s.visibility_threshold) c.visibility_threshold = *s.visibility_threshold;
  if (s.selection_threshold) c.selection_threshold = *s.selection_threshold;
  if (s.groups) c.groups = *s.groups;
  if (s.epochs) c.epochs = *s.epochs;
  if (s.class_filter) c.class_filter = parse_class_filter(*s.class_filter);
  if (s.all_rows) c.active_only = false;
  if (s.mask_fallback) c.mask_policy = parse_mask_policy(*s.mask_fallback);
  if (s.diffusion) {
    if (*s.diffusion == "stub") {
      c.diffusion.mode = DiffusionMode::stub;
    } else {
      c.diffusion.mode = DiffusionMode::service;
      c.diffusion.url = *s.diffusion;
    }
  }
  if (s.strength) c.diffusion.strength = *s.strength;
  if (s.prompt) c.diffusion.prompt = *s.prompt;
  if (s.timeout_ms) c.diffusion.timeout_ms = *s.timeout_ms;
  if (s.retries) c.diffusion.retries = *s.retries;
  validate(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-tail trajectory augmentation for MOTChallenge datasets"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  StageFlags s;
  app.add_option("--config", g.config, "JSON configuration file");
  app.add_option("--preset", g.preset, "Named defaults: mot15, mot16, mot17, mot20");
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--out", g.out, "Output root");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--dataset", g.dataset, "Dataset root holding sequence directories");

  auto* stats = app.add_subcommand("stats", "Per-sequence class-count histograms");
  stats->add_option("--class-filter", s.class_filter, "Count only this class ('pedestrian' or an id)");
  stats->add_flag("--all-rows", s.all_rows, "Count rows with active flag 0 as well");
  stats->add_option("--T-j", s.class_threshold, "Class threshold for the head/tail split");

  auto* partition = app.add_subcommand("partition", "Head/tail partition per sequence");
  partition->add_option("--T-j", s.class_threshold, "Class threshold");
  partition->add_option("--class-filter", s.class_filter, "Count only this class");
  partition->add_flag("--all-rows", s.all_rows, "Count rows with active flag 0 as well");

  auto* sva = app.add_subcommand("sva", "Stationary-view trajectory continuation");
  sva->add_option("--T-j", s.class_threshold, "Class threshold");
  sva->add_option("--T-v", s.visibility_threshold, "Visibility threshold for prediction templates");
  sva->add_option("--mask-fallback", s.mask_fallback, "bbox | none");
  sva->add_option("--class-filter", s.class_filter, "Count only this class");

  auto* dva = app.add_subcommand("dva", "Dynamic-view background replacement and epoch manifest");
  dva->add_option("--diffusion", s.diffusion, "'stub' or the service base URL");
  dva->add_option("--strength", s.strength, "Enhancement coefficient in [0,1]");
  dva->add_option("--prompt", s.prompt, "Default prompt");
  dva->add_option("--epochs", s.epochs, "Manifest epochs");
  dva->add_option("--T-s", s.selection_threshold, "Original-image selection threshold");
  dva->add_option("--mask-fallback", s.mask_fallback, "bbox | none");
  dva->add_option("--timeout-ms", s.timeout_ms, "Service timeout");
  dva->add_option("--retries", s.retries, "Service retries");

  std::int64_t num_images = 0;
  std::optional<std::string> manifest_path;
  auto* manifest = app.add_subcommand("manifest", "Standalone epoch manifest");
  manifest->add_option("--num-images", num_images, "Image count")->required();
  manifest->add_option("--epochs", s.epochs, "Epochs");
  manifest->add_option("--T-s", s.selection_threshold, "Original-image selection threshold");
  manifest->add_option("--path", manifest_path, "Output file (default <out>/manifest.json)");

  std::optional<std::string> counts_file;
  auto* groups = app.add_subcommand("groups", "Group Softmax class banding (groups.json)");
  groups->add_option("--K", s.groups, "Group count");
  groups->add_option("--counts", counts_file, "Counts file: JSON {class: N} or stats CSV");
  groups->add_option("--class-filter", s.class_filter, "Count only this class");

  std::optional<std::string> fixture_dir;
  std::optional<std::string> emit_dir;
  std::uint64_t fixture_seed = 2024;
  auto* gs_check = app.add_subcommand("gs-check", "Check Group Softmax kernel invariants on fixtures");
  gs_check->add_option("fixtures", fixture_dir, "Fixture directory");
  gs_check->add_option("--emit", emit_dir, "Write a fresh fixture to this directory instead");
  gs_check->add_option("--fixture-seed", fixture_seed, "Seed for --emit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gs_check->parsed()) {
      if (emit_dir) {
        write_gs_fixture(make_gs_fixture(fixture_seed), *emit_dir);
        std::cout << "wrote fixture to " << *emit_dir << "\n";
        return 0;
      }
      if (!fixture_dir) throw Error(ErrorCode::Usage, "gs-check needs a fixture directory or --emit");
      bool ok = true;
      for (const auto& r : check_gs_fixture(*fixture_dir)) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name;
        if (!r.detail.empty()) std::cout << ": " << r.detail;
        std::cout << "\n";
        ok = ok && r.passed;
      }
      return ok ? 0 : 1;
    }

    const PipelineConfig cfg = effective_config(g, s);

    if (stats->parsed()) {
      for (const auto& r : cmd_stats(cfg)) {
        std::cout << r.name << ": " << r.counts.size() << " identities, " << r.partition.tail.size()
                  << " tail, max count " << r.counts.front().count << "\n";
      }
    } else if (partition->parsed()) {
      for (const auto& r : cmd_partition(cfg)) {
        std::cout << r.name << ": head " << r.partition.head.size() << ", tail " << r.partition.tail.size() << "\n";
      }
    } else if (sva->parsed()) {
      const auto sum = cmd_sva(cfg);
      std::cout << "backtracked " << sum.n_backtracked << ", predicted " << sum.n_predicted << ", synthetic rows "
                << sum.n_synthetic_rows << "\n";
    } else if (dva->parsed()) {
      const auto sum = cmd_dva(cfg);
      std::cout << "augmented " << sum.n_images << " images in " << sum.n_sequences << " sequences\n";
    } else if (manifest->parsed()) {
      fs::path path = manifest_path ? fs::path(*manifest_path) : require_out(cfg) / "manifest.json";
      cmd_manifest(num_images, cfg.epochs, cfg.selection_threshold, cfg.seed, path);
      std::cout << "wrote " << path.string() << "\n";
    } else if (groups->parsed()) {
      const auto counts = counts_file ? read_class_counts(*counts_file) : dataset_class_counts(cfg);
      const auto assignment = build_groups(counts, cfg.groups);
      const fs::path path = require_out(cfg) / "groups.json";
      export_groups(assignment, path);
      for (std::size_t j = 0; j < assignment.thresholds.size(); ++j) {
        std::cout << "group " << j << ": [" << assignment.thresholds[j].low << ", " << assignment.thresholds[j].high
                  << "]\n";
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
