#pragma once

// Group Softmax Re-ID loss.
//
// Classes are banded by training count into K groups with upper thresholds
// T_j^h = round(j/K * max N) and lower thresholds T_1^l = 1,
// T_{j+1}^l = T_j^h + 1. Softmax and cross-entropy run inside each group; the
// loss of a sample is the label group's cross-entropy divided by K.
//
// Column c of a logits matrix belongs to the c-th smallest class id.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ltmot/error.hpp"
#include "ltmot/mot_io.hpp"

namespace ltmot {

struct GroupBand {
  std::int64_t low = 1;
  std::int64_t high = 1;

  friend bool operator==(const GroupBand&, const GroupBand&) = default;
};

struct GroupAssignment {
  int K = 1;
  std::vector<GroupBand> thresholds;           // index j-1 for group j
  std::map<std::int64_t, std::int64_t> counts;  // class id -> N(i)
  std::map<std::int64_t, int> assignment;       // class id -> group index (0-based)

  std::size_t num_classes() const { return counts.size(); }

  /// Group of each logits column.
  std::vector<int> column_groups() const {
    std::vector<int> out;
    out.reserve(assignment.size());
    for (const auto& [cls, g] : assignment) out.push_back(g);
    return out;
  }

  /// Column indices belonging to each group (possibly empty groups).
  std::vector<std::vector<Eigen::Index>> group_columns() const {
    std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(K));
    Eigen::Index col = 0;
    for (const auto& [cls, g] : assignment) out[static_cast<std::size_t>(g)].push_back(col++);
    return out;
  }

  /// Logits column of a class id, or -1.
  Eigen::Index column_of(std::int64_t class_id) const {
    auto it = assignment.find(class_id);
    if (it == assignment.end()) return -1;
    return static_cast<Eigen::Index>(std::distance(assignment.begin(), it));
  }

  friend bool operator==(const GroupAssignment&, const GroupAssignment&) = default;
};

/// round(j * max / K), halves rounded up; exact in integers.
constexpr std::int64_t group_upper_threshold(int j, int K, std::int64_t max_count) {
  return (2 * static_cast<std::int64_t>(j) * max_count + K) / (2 * static_cast<std::int64_t>(K));
}

inline GroupAssignment build_groups(const std::map<std::int64_t, std::int64_t>& class_counts, int K) {
  if (K < 1) throw Error(ErrorCode::InvalidValue, "K must be >= 1");
  if (class_counts.empty()) throw Error(ErrorCode::EmptyClassSet, "no classes to group");
  std::int64_t max_count = 0;
  for (const auto& [cls, n] : class_counts) {
    if (n < 1) throw Error(ErrorCode::InvalidValue, "class " + std::to_string(cls) + " has count < 1");
    max_count = std::max(max_count, n);
  }

  GroupAssignment g;
  g.K = K;
  g.counts = class_counts;
  std::int64_t low = 1;
  for (int j = 1; j <= K; ++j) {
    const std::int64_t high = group_upper_threshold(j, K, max_count);
    g.thresholds.push_back({low, high});
    low = high + 1;
  }
  for (const auto& [cls, n] : class_counts) {
    // Upper thresholds are non-decreasing and the last equals max N, so a band always exists.
    auto it = std::find_if(g.thresholds.begin(), g.thresholds.end(),
                           [n = n](const GroupBand& b) { return b.low <= n && n <= b.high; });
    g.assignment[cls] = static_cast<int>(std::distance(g.thresholds.begin(), it));
  }
  return g;
}

/// Frame counts per identity of one or more sequences, identities kept apart
/// per sequence by the caller if needed.
inline std::map<std::int64_t, std::int64_t> count_frames(const std::vector<TrackEntry>& entries, bool active_only = true) {
  std::map<std::int64_t, std::int64_t> out;
  for (const auto& e : entries) {
    if (active_only && e.active_flag != 1) continue;
    ++out[e.identity];
  }
  return out;
}

// ---------------------------------------------------------------------------
// kernel

struct GsBatch {
  Eigen::MatrixXd logits;             // samples x M
  std::vector<Eigen::Index> labels;   // column of the positive class per sample

  /// From a samples x M one-hot matrix; each row must hold exactly one 1.
  static GsBatch from_one_hot(Eigen::MatrixXd logits, const Eigen::MatrixXd& one_hot) {
    if (one_hot.rows() != logits.rows() || one_hot.cols() != logits.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "labels and logits differ in shape");
    }
    GsBatch b{std::move(logits), {}};
    for (Eigen::Index r = 0; r < one_hot.rows(); ++r) {
      Eigen::Index pos = -1;
      for (Eigen::Index c = 0; c < one_hot.cols(); ++c) {
        const double v = one_hot(r, c);
        if (v == 1.0 && pos < 0) {
          pos = c;
        } else if (v != 0.0) {
          pos = -2;
          break;
        }
      }
      if (pos < 0) throw Error(ErrorCode::InvalidValue, "row " + std::to_string(r) + " is not one-hot");
      b.labels.push_back(pos);
    }
    return b;
  }

  Eigen::MatrixXd one_hot() const {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < labels.size(); ++r) y(static_cast<Eigen::Index>(r), labels[r]) = 1.0;
    return y;
  }
};

/// Softmax taken separately inside every group, stabilized by the group max.
inline Eigen::VectorXd group_softmax(const Eigen::Ref<const Eigen::VectorXd>& logits, const GroupAssignment& groups) {
  const auto cols = groups.group_columns();
  if (static_cast<std::size_t>(logits.size()) != groups.num_classes()) {
    throw Error(ErrorCode::DimensionMismatch, "logits width differs from class count");
  }
  Eigen::VectorXd p(logits.size());
  for (const auto& members : cols) {
    if (members.empty()) continue;
    double mx = logits(members.front());
    for (auto c : members) mx = std::max(mx, logits(c));
    double z = 0.0;
    for (auto c : members) z += std::exp(logits(c) - mx);
    for (auto c : members) p(c) = std::exp(logits(c) - mx) / z;
  }
  return p;
}

namespace detail {

inline void check_batch(const GsBatch& batch, const GroupAssignment& groups) {
  if (static_cast<std::size_t>(batch.logits.cols()) != groups.num_classes()) {
    throw Error(ErrorCode::DimensionMismatch, "logits width differs from class count");
  }
  if (batch.labels.size() != static_cast<std::size_t>(batch.logits.rows())) {
    throw Error(ErrorCode::DimensionMismatch, "one label per sample required");
  }
  for (std::size_t r = 0; r < batch.labels.size(); ++r) {
    const auto l = batch.labels[r];
    if (l < 0 || l >= batch.logits.cols()) {
      throw Error(ErrorCode::LabelOutsideGroups, "sample " + std::to_string(r) + " label column " + std::to_string(l));
    }
  }
}

/// log p_label within its group, computed as (x_l - max) - log sum exp(x - max).
inline double log_prob_in_group(const Eigen::Ref<const Eigen::VectorXd>& row, const std::vector<Eigen::Index>& members,
                                Eigen::Index label) {
  double mx = row(members.front());
  for (auto c : members) mx = std::max(mx, row(c));
  double z = 0.0;
  for (auto c : members) z += std::exp(row(c) - mx);
  return (row(label) - mx) - std::log(z);
}

}  // namespace detail

/// Batch mean of -(1/K) * log p_label, p taken inside the label's group.
inline double gs_loss(const GsBatch& batch, const GroupAssignment& groups) {
  detail::check_batch(batch, groups);
  if (batch.logits.rows() == 0) return 0.0;
  const auto cols = groups.group_columns();
  const auto col_group = groups.column_groups();
  double total = 0.0;
  for (Eigen::Index r = 0; r < batch.logits.rows(); ++r) {
    const auto label = batch.labels[static_cast<std::size_t>(r)];
    const auto& members = cols[static_cast<std::size_t>(col_group[static_cast<std::size_t>(label)])];
    total += -detail::log_prob_in_group(batch.logits.row(r).transpose(), members, label);
  }
  return total / (static_cast<double>(groups.K) * static_cast<double>(batch.logits.rows()));
}

/// d loss / d logits. Columns of the label's group get (p - y) / (K * samples);
/// every other column is zero.
inline Eigen::MatrixXd gs_loss_grad(const GsBatch& batch, const GroupAssignment& groups) {
  detail::check_batch(batch, groups);
  const auto cols = groups.group_columns();
  const auto col_group = groups.column_groups();
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(batch.logits.rows(), batch.logits.cols());
  if (batch.logits.rows() == 0) return grad;
  const double scale = 1.0 / (static_cast<double>(groups.K) * static_cast<double>(batch.logits.rows()));
  for (Eigen::Index r = 0; r < batch.logits.rows(); ++r) {
    const auto label = batch.labels[static_cast<std::size_t>(r)];
    const auto& members = cols[static_cast<std::size_t>(col_group[static_cast<std::size_t>(label)])];
    const Eigen::VectorXd row = batch.logits.row(r).transpose();
    double mx = row(members.front());
    for (auto c : members) mx = std::max(mx, row(c));
    double z = 0.0;
    for (auto c : members) z += std::exp(row(c) - mx);
    for (auto c : members) {
      const double p = std::exp(row(c) - mx) / z;
      grad(r, c) = scale * (p - (c == label ? 1.0 : 0.0));
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// groups.json

inline nlohmann::ordered_json groups_to_json(const GroupAssignment& g) {
  nlohmann::ordered_json j;
  j["K"] = g.K;
  j["thresholds"] = nlohmann::ordered_json::array();
  for (const auto& b : g.thresholds) j["thresholds"].push_back({{"low", b.low}, {"high", b.high}});
  j["counts"] = nlohmann::ordered_json::object();
  for (const auto& [cls, n] : g.counts) j["counts"][std::to_string(cls)] = n;
  j["assignment"] = nlohmann::ordered_json::object();
  for (const auto& [cls, grp] : g.assignment) j["assignment"][std::to_string(cls)] = grp;
  return j;
}

inline GroupAssignment groups_from_json(const nlohmann::json& j) {
  auto class_key = [](const std::string& key) {
    auto v = detail::to_int(key);
    if (!v) throw Error(ErrorCode::SchemaError, "class key '" + key + "' is not an integer");
    return *v;
  };
  GroupAssignment g;
  try {
    for (const char* key : {"K", "thresholds", "counts", "assignment"}) {
      if (!j.contains(key)) throw Error(ErrorCode::SchemaError, std::string("missing key \"") + key + "\"");
    }
    g.K = j.at("K").get<int>();
    for (const auto& b : j.at("thresholds")) g.thresholds.push_back({b.at("low").get<std::int64_t>(), b.at("high").get<std::int64_t>()});
    for (const auto& [k, v] : j.at("counts").items()) g.counts[class_key(k)] = v.get<std::int64_t>();
    for (const auto& [k, v] : j.at("assignment").items()) g.assignment[class_key(k)] = v.get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
  if (g.K < 1 || g.thresholds.size() != static_cast<std::size_t>(g.K)) {
    throw Error(ErrorCode::SchemaError, "thresholds must list K bands");
  }
  for (const auto& [cls, grp] : g.assignment) {
    if (grp < 0 || grp >= g.K) throw Error(ErrorCode::SchemaError, "class " + std::to_string(cls) + " group out of range");
    if (!g.counts.count(cls)) throw Error(ErrorCode::SchemaError, "class " + std::to_string(cls) + " has no count");
  }
  if (g.assignment.size() != g.counts.size()) throw Error(ErrorCode::SchemaError, "counts and assignment differ");
  return g;
}

inline void export_groups(const GroupAssignment& g, const fs::path& path) {
  detail::write_file(path, groups_to_json(g).dump(2) + "\n");
}

inline GroupAssignment import_groups(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
  return groups_from_json(j);
}

}  // namespace ltmot
