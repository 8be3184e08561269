#pragma once

// Synthetic datasets and small helpers shared by the test binaries.

#include <cstdint>
#include <algorithm>
#include <cstdlib>
#include <map>
#include <sys/wait.h>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ltmot/image.hpp"
#include "ltmot/mot_io.hpp"
#include "ltmot/rng.hpp"

namespace ltmot::testing {

namespace fs = std::filesystem;

/// Fresh, empty directory under the system temp dir.
inline fs::path temp_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  const auto stamp = derive_seed(static_cast<std::uint64_t>(::getpid()), {++counter, fnv1a64(tag)});
  fs::path p = fs::temp_directory_path() / ("ltmot_" + tag + "_" + std::to_string(stamp % 100000000));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

/// Textured background: smooth gradient plus seeded noise.
inline Image background(int w, int h, std::uint64_t seed) {
  Image img(w, h, 3);
  SplitMix64 rng(seed);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto* px = img.pixel(x, y);
      px[0] = static_cast<std::uint8_t>((x * 255) / std::max(1, w - 1));
      px[1] = static_cast<std::uint8_t>((y * 255) / std::max(1, h - 1));
      px[2] = static_cast<std::uint8_t>(64 + rng() % 64);
    }
  }
  return img;
}

inline Image random_image(int w, int h, int c, std::uint64_t seed) {
  Image img(w, h, c);
  SplitMix64 rng(seed);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng() & 0xFF);
  return img;
}

inline Mask random_mask(int w, int h, std::uint64_t seed, int percent = 40) {
  Mask m(w, h);
  SplitMix64 rng(seed);
  for (auto& v : m.data) v = (rng() % 100) < static_cast<std::uint64_t>(percent) ? 1 : 0;
  return m;
}

/// Draws every entry of `frame` as a solid box coloured by identity.
inline void draw_entries(Image& img, const std::vector<TrackEntry>& entries, std::int64_t frame) {
  for (const auto& e : entries) {
    if (e.frame != frame) continue;
    const Mask box = rasterize_box(img.width, img.height, e);
    const std::uint8_t r = static_cast<std::uint8_t>(40 + (e.identity * 53) % 200);
    const std::uint8_t g = static_cast<std::uint8_t>(40 + (e.identity * 97) % 200);
    const std::uint8_t b = static_cast<std::uint8_t>(40 + (e.identity * 31) % 200);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        if (!box.at(x, y)) continue;
        auto* px = img.pixel(x, y);
        px[0] = b;
        px[1] = g;
        px[2] = r;
      }
    }
  }
}

struct SyntheticTrack {
  std::int64_t identity;
  std::int64_t first;
  std::int64_t last;
  double left;
  double top;
  double dx;
  double dy;
  double width = 10;
  double height = 20;
  double visibility = 1.0;
};

inline std::vector<TrackEntry> track_entries(const std::vector<SyntheticTrack>& tracks) {
  std::vector<TrackEntry> out;
  for (const auto& t : tracks) {
    for (std::int64_t f = t.first; f <= t.last; ++f) {
      const double k = static_cast<double>(f - t.first);
      out.push_back({f, t.identity, t.left + k * t.dx, t.top + k * t.dy, t.width, t.height, 1, 1, t.visibility});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const TrackEntry& a, const TrackEntry& b) { return a.frame < b.frame; });
  return out;
}

/// Writes `<root>/<name>/{seqinfo.ini, gt/gt.txt, img1/*.png}`.
inline fs::path write_sequence(const fs::path& root, const std::string& name, int w, int h, std::int64_t frames,
                               const std::vector<TrackEntry>& entries, std::uint64_t seed = 1) {
  const fs::path dir = root / name;
  SequenceMeta meta;
  meta.name = name;
  meta.frame_rate = 30;
  meta.seq_length = frames;
  meta.im_width = w;
  meta.im_height = h;
  meta.im_ext = ".png";
  meta.im_dir = "img1";
  write_seqinfo(meta, dir / "seqinfo.ini");
  write_gt(entries, dir / "gt" / "gt.txt");
  const Image bg = background(w, h, seed);
  for (std::int64_t f = 1; f <= frames; ++f) {
    Image img = bg;
    draw_entries(img, entries, f);
    save_png(img, dir / "img1" / frame_file_name(f, ".png"));
  }
  return dir;
}

/// Three identities over `frames` frames: a long head track, a short track
/// ending mid-sequence, and a short track that survives to the last frame.
inline std::vector<SyntheticTrack> three_identity_tracks(std::int64_t frames) {
  return {
      {1, 1, frames, 2, 4, 0.5, 0.2},
      {2, 10, 15, 40, 10, 1.0, 0.0},
      {3, frames - 5, frames, 60, 30, -1.0, 0.5},
  };
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Relative path -> content for every regular file below `root`.
inline std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

/// Runs the CLI and returns its exit status; stdout/stderr go to `log`.
inline int run_cli(const std::string& args, const fs::path& log = {}) {
  std::string cmd = std::string(LTMOT_CLI_PATH) + " " + args;
  cmd += log.empty() ? " > /dev/null 2>&1" : " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace ltmot::testing
