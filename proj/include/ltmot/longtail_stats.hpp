#pragma once

// Per-sequence identity frequency statistics and the head/tail split.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltmot/error.hpp"
#include "ltmot/mot_io.hpp"

namespace ltmot {

struct ClassCount {
  std::int64_t identity = 0;
  std::int64_t count = 0;  // frames the identity appears in
  double ratio = 0.0;      // count / total within the sequence

  friend bool operator==(const ClassCount&, const ClassCount&) = default;
};

struct ClassPartition {
  double threshold = 0.0;
  std::set<std::int64_t> head;
  std::set<std::int64_t> tail;

  bool is_tail(std::int64_t identity) const { return tail.count(identity) != 0; }
};

/// Which rows contribute to N(i). By default only rows with active_flag = 1.
struct CountFilter {
  bool active_only = true;
  std::optional<std::int64_t> class_id;

  bool accepts(const TrackEntry& e) const {
    if (active_only && e.active_flag != 1) return false;
    if (class_id && e.class_id != *class_id) return false;
    return true;
  }
};

/// Sorted by descending count, ties by ascending identity.
inline std::vector<ClassCount> class_counts(const std::vector<TrackEntry>& entries, const CountFilter& filter = {}) {
  std::map<std::int64_t, std::int64_t> per_id;
  std::int64_t total = 0;
  for (const auto& e : entries) {
    if (!filter.accepts(e)) continue;
    ++per_id[e.identity];
    ++total;
  }
  if (per_id.empty()) throw Error(ErrorCode::EmptyDataset, "no entries left to count");

  std::vector<ClassCount> out;
  out.reserve(per_id.size());
  for (auto [id, n] : per_id) {
    out.push_back({id, n, static_cast<double>(n) / static_cast<double>(total)});
  }
  std::stable_sort(out.begin(), out.end(), [](const ClassCount& a, const ClassCount& b) {
    return a.count != b.count ? a.count > b.count : a.identity < b.identity;
  });
  return out;
}

inline std::vector<ClassCount> class_counts(const SequenceDataset& dataset, const CountFilter& filter = {}) {
  try {
    return class_counts(dataset.entries, filter);
  } catch (const Error& e) {
    throw e.within(dataset.meta.name);
  }
}

/// Identity i is tail iff 1/R_i >= T_j. Evaluated as total >= T_j * N(i) so
/// that the boundary case is decided exactly and scaling all counts by a
/// constant never changes the outcome.
inline ClassPartition partition_classes(const std::vector<ClassCount>& counts, double threshold) {
  if (!(threshold > 0.0)) throw Error(ErrorCode::NonPositiveThreshold, "T_j must be > 0");
  std::int64_t total = 0;
  for (const auto& c : counts) total += c.count;

  ClassPartition p;
  p.threshold = threshold;
  for (const auto& c : counts) {
    const bool tail = static_cast<double>(total) >= threshold * static_cast<double>(c.count);
    (tail ? p.tail : p.head).insert(c.identity);
  }
  return p;
}

// ---------------------------------------------------------------------------
// reports

struct HistogramRow {
  std::int64_t rank = 0;
  std::int64_t identity = 0;
  std::int64_t count = 0;
  double ratio = 0.0;
  std::string partition;  // "head" | "tail"

  friend bool operator==(const HistogramRow&, const HistogramRow&) = default;
};

inline std::string format_histogram_csv(const std::vector<ClassCount>& counts, const ClassPartition& partition) {
  if (counts.empty()) throw Error(ErrorCode::EmptyDataset, "histogram has no classes");
  std::string out = "rank,identity,count,ratio,partition\n";
  std::int64_t rank = 0;
  for (const auto& c : counts) {
    detail::append_number(out, ++rank);
    out += ',';
    detail::append_number(out, c.identity);
    out += ',';
    detail::append_number(out, c.count);
    out += ',';
    detail::append_number(out, c.ratio);
    out += partition.is_tail(c.identity) ? ",tail\n" : ",head\n";
  }
  return out;
}

inline nlohmann::ordered_json histogram_summary(const std::string& sequence, const std::vector<ClassCount>& counts,
                                                const ClassPartition& partition) {
  if (counts.empty()) throw Error(ErrorCode::EmptyDataset, "histogram has no classes");
  nlohmann::ordered_json j;
  j["sequence"] = sequence;
  j["T_j"] = partition.threshold;
  j["n_head"] = partition.head.size();
  j["n_tail"] = partition.tail.size();
  j["max_count"] = counts.front().count;
  return j;
}

/// Writes `<stem>.csv` (one row per identity) and `<stem>.json` (summary).
inline void emit_histogram(const std::string& sequence, const std::vector<ClassCount>& counts,
                           const ClassPartition& partition, const fs::path& stem) {
  const std::string csv = format_histogram_csv(counts, partition);
  const std::string json = histogram_summary(sequence, counts, partition).dump(2) + "\n";
  detail::write_file(fs::path(stem).concat(".csv"), csv);
  detail::write_file(fs::path(stem).concat(".json"), json);
}

inline std::vector<HistogramRow> parse_histogram_csv(std::string_view text) {
  std::vector<HistogramRow> rows;
  std::size_t pos = text.find('\n');
  if (pos == std::string_view::npos || detail::trim(text.substr(0, pos)) != "rank,identity,count,ratio,partition") {
    throw Error(ErrorCode::ParseError, "histogram header missing");
  }
  ++pos;
  std::size_t line_no = 1;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    std::vector<std::string_view> f;
    std::size_t s = 0;
    for (;;) {
      std::size_t c = line.find(',', s);
      f.push_back(detail::trim(line.substr(s, c == std::string_view::npos ? std::string_view::npos : c - s)));
      if (c == std::string_view::npos) break;
      s = c + 1;
    }
    auto rank = f.size() == 5 ? detail::to_int(f[0]) : std::nullopt;
    auto id = f.size() == 5 ? detail::to_int(f[1]) : std::nullopt;
    auto count = f.size() == 5 ? detail::to_int(f[2]) : std::nullopt;
    auto ratio = f.size() == 5 ? detail::to_double(f[3]) : std::nullopt;
    if (!rank || !id || !count || !ratio || (f[4] != "head" && f[4] != "tail")) {
      throw Error(ErrorCode::MalformedLine, "histogram line " + std::to_string(line_no));
    }
    rows.push_back({*rank, *id, *count, *ratio, std::string(f[4])});
  }
  return rows;
}

}  // namespace ltmot
