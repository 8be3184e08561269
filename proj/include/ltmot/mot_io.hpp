#pragma once

// MOTChallenge ground-truth, seqinfo.ini and sequence directory handling.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ltmot/error.hpp"

namespace ltmot {

namespace fs = std::filesystem;

/// One row of a 9-field gt.txt: frame,id,left,top,width,height,flag,class,visibility.
struct TrackEntry {
  std::int64_t frame = 1;
  std::int64_t identity = 1;
  double left = 0.0;
  double top = 0.0;
  double width = 1.0;
  double height = 1.0;
  int active_flag = 1;
  std::int64_t class_id = 1;
  double visibility = 1.0;

  friend bool operator==(const TrackEntry&, const TrackEntry&) = default;
};

enum class CameraMotion { stationary, dynamic };

inline std::string_view to_string(CameraMotion m) {
  return m == CameraMotion::stationary ? "stationary" : "dynamic";
}

inline CameraMotion parse_camera_motion(std::string_view s) {
  if (s == "stationary" || s == "static") return CameraMotion::stationary;
  if (s == "dynamic" || s == "moving") return CameraMotion::dynamic;
  throw Error(ErrorCode::Config, "unknown camera_motion '" + std::string(s) + "'");
}

struct SequenceMeta {
  std::string name;
  double frame_rate = 0.0;
  std::int64_t seq_length = 1;
  int im_width = 1;
  int im_height = 1;
  std::string im_ext = ".jpg";
  std::string im_dir = "img1";
  // Set from configuration only; seqinfo.ini carries no such key.
  std::optional<CameraMotion> camera_motion;

  friend bool operator==(const SequenceMeta&, const SequenceMeta&) = default;
};

struct Trajectory {
  std::int64_t identity = 0;
  std::vector<TrackEntry> entries;  // strictly increasing frame

  std::int64_t first_frame() const { return entries.front().frame; }
  std::int64_t last_frame() const { return entries.back().frame; }
  std::size_t length() const { return entries.size(); }

  /// Entry at `frame`, or nullptr when the identity is absent there (gap).
  const TrackEntry* at_frame(std::int64_t frame) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), frame,
                               [](const TrackEntry& e, std::int64_t f) { return e.frame < f; });
    return (it != entries.end() && it->frame == frame) ? &*it : nullptr;
  }
};

struct SequenceDataset {
  SequenceMeta meta;
  std::vector<TrackEntry> entries;  // file order
  std::map<std::int64_t, Trajectory> trajectories;
  std::map<std::int64_t, fs::path> image_paths;
  fs::path root;
};

// ---------------------------------------------------------------------------
// number formatting / parsing

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Accepts "7" and also integral decimals such as "7.0".
inline std::optional<std::int64_t> to_int(std::string_view s) {
  s = trim(s);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && ptr == s.data() + s.size() && !s.empty()) return v;
  auto d = to_double(s);
  if (!d || *d != static_cast<double>(static_cast<std::int64_t>(*d))) return std::nullopt;
  return static_cast<std::int64_t>(*d);
}

inline void append_number(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

inline void append_number(std::string& out, std::int64_t v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + path.parent_path().string());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed " + path.string());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// gt.txt

/// Parses one gt line; `line_no` is 1-based and only used for error messages.
inline TrackEntry parse_gt_line(std::string_view line, std::size_t line_no) {
  std::string_view fields[9];
  std::size_t n = 0;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = line.find(',', start);
    std::string_view tok = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (n == 9) throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": more than 9 fields");
    fields[n++] = tok;
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (n != 9) {
    throw Error(ErrorCode::MalformedLine,
                "line " + std::to_string(line_no) + ": expected 9 fields, got " + std::to_string(n));
  }
  auto bad = [&](int field) {
    return Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": field " +
                                               std::to_string(field + 1) + " is not numeric ('" +
                                               std::string(fields[field]) + "')");
  };
  auto int_at = [&](int i) {
    auto v = detail::to_int(fields[i]);
    if (!v) throw bad(i);
    return *v;
  };
  auto real_at = [&](int i) {
    auto v = detail::to_double(fields[i]);
    if (!v) throw bad(i);
    return *v;
  };

  TrackEntry e;
  e.frame = int_at(0);
  e.identity = int_at(1);
  e.left = real_at(2);
  e.top = real_at(3);
  e.width = real_at(4);
  e.height = real_at(5);
  const std::int64_t flag = int_at(6);
  e.class_id = int_at(7);
  e.visibility = real_at(8);

  auto invalid = [&](const std::string& what) {
    return Error(ErrorCode::InvalidValue, "line " + std::to_string(line_no) + ": " + what);
  };
  if (e.frame < 1) throw invalid("frame must be >= 1");
  if (e.identity < 1) throw invalid("identity must be >= 1");
  if (!(e.width > 0.0)) throw invalid("width must be > 0");
  if (!(e.height > 0.0)) throw invalid("height must be > 0");
  if (flag != 0 && flag != 1) throw invalid("active flag must be 0 or 1");
  if (!(e.visibility >= 0.0 && e.visibility <= 1.0)) throw invalid("visibility outside [0,1]");
  e.active_flag = static_cast<int>(flag);
  return e;
}

inline std::vector<TrackEntry> parse_gt_text(std::string_view text) {
  std::vector<TrackEntry> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    out.push_back(parse_gt_line(line, line_no));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

inline std::vector<TrackEntry> parse_gt(const fs::path& path) {
  try {
    return parse_gt_text(detail::read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Io) throw;
    throw e.within(path.string());
  }
}

inline std::string format_gt_line(const TrackEntry& e) {
  std::string s;
  s.reserve(48);
  detail::append_number(s, e.frame);
  s += ',';
  detail::append_number(s, e.identity);
  s += ',';
  detail::append_number(s, e.left);
  s += ',';
  detail::append_number(s, e.top);
  s += ',';
  detail::append_number(s, e.width);
  s += ',';
  detail::append_number(s, e.height);
  s += ',';
  detail::append_number(s, static_cast<std::int64_t>(e.active_flag));
  s += ',';
  detail::append_number(s, e.class_id);
  s += ',';
  detail::append_number(s, e.visibility);
  return s;
}

inline std::string format_gt(const std::vector<TrackEntry>& entries) {
  std::string out;
  out.reserve(entries.size() * 40);
  for (const auto& e : entries) {
    out += format_gt_line(e);
    out += '\n';
  }
  return out;
}

inline void write_gt(const std::vector<TrackEntry>& entries, const fs::path& path) {
  detail::write_file(path, format_gt(entries));
}

inline void write_gt(const SequenceDataset& dataset, const fs::path& path) { write_gt(dataset.entries, path); }

// ---------------------------------------------------------------------------
// seqinfo.ini

inline SequenceMeta parse_seqinfo_text(std::string_view text) {
  std::map<std::string, std::string, std::less<>> kv;
  bool in_sequence = false;
  bool saw_section = false;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line =
        detail::trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    ++line_no;
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    if (line.empty() || line.front() == ';' || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad section");
      in_sequence = (line == "[Sequence]");
      saw_section = saw_section || in_sequence;
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected key=value");
    }
    if (!in_sequence) continue;
    kv[std::string(detail::trim(line.substr(0, eq)))] = std::string(detail::trim(line.substr(eq + 1)));
  }
  if (!saw_section) throw Error(ErrorCode::ParseError, "no [Sequence] section");

  auto get = [&](std::string_view key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorCode::MissingKey, std::string(key));
    return it->second;
  };
  auto get_int = [&](std::string_view key) {
    auto v = detail::to_int(get(key));
    if (!v) throw Error(ErrorCode::ParseError, std::string(key) + " is not an integer");
    return *v;
  };

  SequenceMeta m;
  m.name = get("name");
  m.im_dir = get("imDir");
  auto fr = detail::to_double(get("frameRate"));
  if (!fr) throw Error(ErrorCode::ParseError, "frameRate is not numeric");
  m.frame_rate = *fr;
  m.seq_length = get_int("seqLength");
  m.im_width = static_cast<int>(get_int("imWidth"));
  m.im_height = static_cast<int>(get_int("imHeight"));
  m.im_ext = get("imExt");
  if (m.seq_length < 1) throw Error(ErrorCode::InvalidValue, "seqLength must be >= 1");
  if (m.im_width < 1 || m.im_height < 1) throw Error(ErrorCode::InvalidValue, "image size must be >= 1");
  return m;
}

inline SequenceMeta parse_seqinfo(const fs::path& path) { return parse_seqinfo_text(detail::read_file(path)); }

inline std::string format_seqinfo(const SequenceMeta& m) {
  std::string s = "[Sequence]\nname=" + m.name + "\nimDir=" + m.im_dir + "\nframeRate=";
  detail::append_number(s, m.frame_rate);
  s += "\nseqLength=";
  detail::append_number(s, m.seq_length);
  s += "\nimWidth=";
  detail::append_number(s, static_cast<std::int64_t>(m.im_width));
  s += "\nimHeight=";
  detail::append_number(s, static_cast<std::int64_t>(m.im_height));
  s += "\nimExt=" + m.im_ext + "\n";
  return s;
}

inline void write_seqinfo(const SequenceMeta& m, const fs::path& path) {
  detail::write_file(path, format_seqinfo(m));
}

// ---------------------------------------------------------------------------
// trajectories and whole sequences

inline std::map<std::int64_t, Trajectory> build_trajectories(const std::vector<TrackEntry>& entries) {
  std::map<std::int64_t, Trajectory> out;
  for (const auto& e : entries) {
    auto& t = out[e.identity];
    t.identity = e.identity;
    t.entries.push_back(e);
  }
  for (auto& [id, t] : out) {
    std::stable_sort(t.entries.begin(), t.entries.end(),
                     [](const TrackEntry& a, const TrackEntry& b) { return a.frame < b.frame; });
    for (std::size_t i = 1; i < t.entries.size(); ++i) {
      if (t.entries[i].frame == t.entries[i - 1].frame) {
        throw Error(ErrorCode::DuplicateObservation,
                    "identity " + std::to_string(id) + " frame " + std::to_string(t.entries[i].frame));
      }
    }
  }
  return out;
}

inline std::string frame_file_name(std::int64_t frame, std::string_view ext) {
  std::string digits = std::to_string(frame);
  if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
  return digits + std::string(ext);
}

/// Assembles a dataset from in-memory parts and checks the cross-field
/// invariants (frames within [1, seq_length], one entry per identity/frame).
inline SequenceDataset make_dataset(SequenceMeta meta, std::vector<TrackEntry> entries, fs::path root = {}) {
  for (const auto& e : entries) {
    if (e.frame > meta.seq_length) {
      throw Error(ErrorCode::InvalidValue, meta.name + ": frame " + std::to_string(e.frame) +
                                               " exceeds seqLength " + std::to_string(meta.seq_length));
    }
  }
  SequenceDataset d;
  d.trajectories = build_trajectories(entries);
  d.meta = std::move(meta);
  d.entries = std::move(entries);
  d.root = std::move(root);
  if (!d.root.empty()) {
    for (std::int64_t f = 1; f <= d.meta.seq_length; ++f) {
      d.image_paths[f] = d.root / d.meta.im_dir / frame_file_name(f, d.meta.im_ext);
    }
  }
  return d;
}

/// Loads `<seq>/seqinfo.ini` and `<seq>/gt/gt.txt`.
inline SequenceDataset load_sequence(const fs::path& seq_dir) {
  SequenceMeta meta;
  try {
    meta = parse_seqinfo(seq_dir / "seqinfo.ini");
  } catch (const Error& e) {
    throw e.within(seq_dir.filename().string());
  }
  return make_dataset(std::move(meta), parse_gt(seq_dir / "gt" / "gt.txt"), seq_dir);
}

/// Sequence directories (those holding a seqinfo.ini) directly below `root`, sorted by name.
inline std::vector<fs::path> list_sequences(const fs::path& root) {
  std::vector<fs::path> out;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error(ErrorCode::Io, "not a directory: " + root.string());
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "seqinfo.ini")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace ltmot
