#pragma once

// Parity fixtures for the Group Softmax kernel and the invariant checks run
// over them. A fixture directory holds:
//   groups.json    class banding
//   logits.csv     samples x M
//   labels.csv     samples x M one-hot
//   grad.csv       samples x M gradient produced by this kernel
//   expected.json  {"K", "samples", "classes", "loss"}

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ltmot/error.hpp"
#include "ltmot/group_softmax.hpp"
#include "ltmot/mot_io.hpp"
#include "ltmot/rng.hpp"

namespace ltmot {

inline std::string format_matrix_csv(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      detail::append_number(out, m(r, c));
    }
    out += '\n';
  }
  return out;
}

inline Eigen::MatrixXd parse_matrix_csv(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    if (detail::trim(line).empty()) continue;
    std::vector<double> row;
    std::size_t s = 0;
    for (;;) {
      std::size_t c = line.find(',', s);
      auto v = detail::to_double(line.substr(s, c == std::string_view::npos ? std::string_view::npos : c - s));
      if (!v) throw Error(ErrorCode::MalformedLine, "matrix row " + std::to_string(rows.size() + 1));
      row.push_back(*v);
      if (c == std::string_view::npos) break;
      s = c + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::MalformedLine, "matrix row " + std::to_string(rows.size() + 1) + " has wrong width");
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

struct GsFixture {
  GroupAssignment groups;
  GsBatch batch;
  Eigen::MatrixXd grad;
  double loss = 0.0;
};

/// Random banding (class ids 1..classes, counts in [1, max_count]) and a random
/// batch; expected loss and gradient come from this kernel.
inline GsFixture make_gs_fixture(std::uint64_t seed, int classes = 12, int samples = 16, int K = 3,
                                 std::int64_t max_count = 900) {
  SplitMix64 rng(derive_seed(seed, {0x6773'6669'7874ULL}));
  std::map<std::int64_t, std::int64_t> counts;
  for (int c = 1; c <= classes; ++c) counts[c] = 1 + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(max_count)));
  counts[1] = max_count;
  GsFixture f;
  f.groups = build_groups(counts, K);
  f.batch.logits.resize(samples, classes);
  for (int r = 0; r < samples; ++r) {
    for (int c = 0; c < classes; ++c) f.batch.logits(r, c) = 6.0 * uniform_open_closed(rng) - 3.0;
    f.batch.labels.push_back(static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(classes))));
  }
  f.loss = gs_loss(f.batch, f.groups);
  f.grad = gs_loss_grad(f.batch, f.groups);
  return f;
}

inline void write_gs_fixture(const GsFixture& f, const fs::path& dir) {
  export_groups(f.groups, dir / "groups.json");
  detail::write_file(dir / "logits.csv", format_matrix_csv(f.batch.logits));
  detail::write_file(dir / "labels.csv", format_matrix_csv(f.batch.one_hot()));
  detail::write_file(dir / "grad.csv", format_matrix_csv(f.grad));
  nlohmann::ordered_json j;
  j["K"] = f.groups.K;
  j["samples"] = f.batch.logits.rows();
  j["classes"] = f.batch.logits.cols();
  j["loss"] = f.loss;
  detail::write_file(dir / "expected.json", j.dump(2) + "\n");
}

inline GsFixture read_gs_fixture(const fs::path& dir) {
  GsFixture f;
  f.groups = import_groups(dir / "groups.json");
  const auto logits = parse_matrix_csv(detail::read_file(dir / "logits.csv"));
  const auto labels = parse_matrix_csv(detail::read_file(dir / "labels.csv"));
  f.batch = GsBatch::from_one_hot(logits, labels);
  f.grad = parse_matrix_csv(detail::read_file(dir / "grad.csv"));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(dir / "expected.json"));
    f.loss = j.at("loss").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("expected.json: ") + e.what());
  }
  return f;
}

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Plain softmax cross-entropy over all columns, batch mean.
inline double softmax_cross_entropy(const GsBatch& batch) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < batch.logits.rows(); ++r) {
    const Eigen::VectorXd row = batch.logits.row(r).transpose();
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    total += lse - row(batch.labels[static_cast<std::size_t>(r)]);
  }
  return batch.logits.rows() ? total / static_cast<double>(batch.logits.rows()) : 0.0;
}

/// Largest relative error between the analytic gradient and central differences.
inline double finite_difference_error(const GsBatch& batch, const GroupAssignment& groups, double h = 1e-4) {
  const Eigen::MatrixXd grad = gs_loss_grad(batch, groups);
  GsBatch probe = batch;
  double worst = 0.0;
  for (Eigen::Index r = 0; r < batch.logits.rows(); ++r) {
    for (Eigen::Index c = 0; c < batch.logits.cols(); ++c) {
      const double x = batch.logits(r, c);
      probe.logits(r, c) = x + h;
      const double up = gs_loss(probe, groups);
      probe.logits(r, c) = x - h;
      const double down = gs_loss(probe, groups);
      probe.logits(r, c) = x;
      const double fd = (up - down) / (2.0 * h);
      const double denom = std::max({std::fabs(fd), std::fabs(grad(r, c)), 1e-8});
      worst = std::max(worst, std::fabs(fd - grad(r, c)) / denom);
    }
  }
  return worst;
}

inline std::vector<CheckResult> check_gs_fixture(const fs::path& dir) {
  std::vector<CheckResult> out;
  GsFixture f;
  try {
    f = read_gs_fixture(dir);
    if (f.grad.rows() != f.batch.logits.rows() || f.grad.cols() != f.batch.logits.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "grad.csv differs in shape from logits.csv");
    }
    if (static_cast<std::size_t>(f.batch.logits.cols()) != f.groups.num_classes()) {
      throw Error(ErrorCode::DimensionMismatch, "logits width differs from class count");
    }
    out.push_back({"fixture_loads", true, ""});
  } catch (const std::exception& e) {
    out.push_back({"fixture_loads", false, e.what()});
    return out;
  }
  auto record = [&](const std::string& name, bool ok, const std::string& detail) { out.push_back({name, ok, detail}); };
  auto num = [](double v) {
    std::string s;
    detail::append_number(s, v);
    return s;
  };

  {
    const auto cols = f.groups.group_columns();
    double worst = 0.0;
    for (Eigen::Index r = 0; r < f.batch.logits.rows(); ++r) {
      const Eigen::VectorXd p = group_softmax(f.batch.logits.row(r).transpose(), f.groups);
      for (const auto& members : cols) {
        if (members.empty()) continue;
        double s = 0.0;
        for (auto c : members) s += p(c);
        worst = std::max(worst, std::fabs(s - 1.0));
      }
    }
    record("group_normalization", worst <= 1e-9, "max |sum - 1| = " + num(worst));
  }
  {
    const double loss = gs_loss(f.batch, f.groups);
    const double diff = std::fabs(loss - f.loss);
    record("loss_matches_expected", diff <= 1e-10 * std::max(1.0, std::fabs(f.loss)),
           "kernel " + num(loss) + " vs expected " + num(f.loss));
    record("loss_non_negative", loss >= 0.0, "loss = " + num(loss));
  }
  {
    const double diff = (gs_loss_grad(f.batch, f.groups) - f.grad).cwiseAbs().maxCoeff();
    record("grad_matches_expected", diff <= 1e-10, "max |diff| = " + num(diff));
  }
  {
    const double err = finite_difference_error(f.batch, f.groups);
    record("grad_finite_difference", err < 1e-5, "max relative error = " + num(err));
  }
  {
    const GroupAssignment one = build_groups(f.groups.counts, 1);
    const double diff = std::fabs(gs_loss(f.batch, one) - softmax_cross_entropy(f.batch));
    record("k1_cross_entropy", diff <= 1e-12, "|diff| = " + num(diff));
  }
  {
    // Perturb one logit per group and confirm no other group moves.
    const auto cols = f.groups.group_columns();
    const auto col_group = f.groups.column_groups();
    bool ok = true;
    std::string where;
    const Eigen::MatrixXd base_grad = gs_loss_grad(f.batch, f.groups);
    for (std::size_t g = 0; g < cols.size() && ok; ++g) {
      if (cols[g].empty()) continue;
      GsBatch moved = f.batch;
      moved.logits.col(cols[g].front()).array() += 2.5;
      const Eigen::MatrixXd grad = gs_loss_grad(moved, f.groups);
      for (Eigen::Index r = 0; r < f.batch.logits.rows() && ok; ++r) {
        const Eigen::VectorXd p0 = group_softmax(f.batch.logits.row(r).transpose(), f.groups);
        const Eigen::VectorXd p1 = group_softmax(moved.logits.row(r).transpose(), f.groups);
        for (Eigen::Index c = 0; c < f.batch.logits.cols(); ++c) {
          if (static_cast<std::size_t>(col_group[static_cast<std::size_t>(c)]) == g) continue;
          if (p0(c) != p1(c) || base_grad(r, c) != grad(r, c)) {
            ok = false;
            where = "group " + std::to_string(g) + " leaked into column " + std::to_string(c);
            break;
          }
        }
      }
    }
    record("group_isolation", ok, where);
  }
  return out;
}

}  // namespace ltmot
