#include <gtest/gtest.h>

#include <cmath>

#include "ltmot/group_softmax.hpp"
#include "ltmot/gs_fixtures.hpp"
#include "support.hpp"

using namespace ltmot;
namespace lt = ltmot::testing;

namespace {

GsBatch random_batch(SplitMix64& rng, Eigen::Index samples, Eigen::Index classes, double scale = 3.0) {
  GsBatch b;
  b.logits.resize(samples, classes);
  for (Eigen::Index r = 0; r < samples; ++r) {
    for (Eigen::Index c = 0; c < classes; ++c) b.logits(r, c) = scale * (2.0 * uniform_open_closed(rng) - 1.0);
    b.labels.push_back(static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(classes))));
  }
  return b;
}

std::map<std::int64_t, std::int64_t> random_counts(SplitMix64& rng, int classes, std::int64_t max_count) {
  std::map<std::int64_t, std::int64_t> counts;
  for (int c = 1; c <= classes; ++c) {
    counts[c * 3] = 1 + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(max_count)));
  }
  return counts;
}

// Direct transcription: unstabilized exp, floating-point band edges.
double naive_loss(const GsBatch& b, const std::map<std::int64_t, std::int64_t>& counts, int K) {
  std::int64_t max_count = 0;
  for (const auto& [c, n] : counts) max_count = std::max(max_count, n);
  std::vector<int> group_of;
  for (const auto& [c, n] : counts) {
    int g = 0;
    while (n > std::llround(static_cast<double>(g + 1) * static_cast<double>(max_count) / K)) ++g;
    group_of.push_back(g);
  }
  double total = 0.0;
  for (Eigen::Index r = 0; r < b.logits.rows(); ++r) {
    const auto label = b.labels[static_cast<std::size_t>(r)];
    double z = 0.0;
    for (Eigen::Index c = 0; c < b.logits.cols(); ++c) {
      if (group_of[static_cast<std::size_t>(c)] == group_of[static_cast<std::size_t>(label)]) z += std::exp(b.logits(r, c));
    }
    total += -std::log(std::exp(b.logits(r, label)) / z) / K;
  }
  return total / static_cast<double>(b.logits.rows());
}

}  // namespace

TEST(GroupBands, ThresholdExample) {
  const auto g = build_groups({{1, 900}, {2, 5}, {3, 300}, {4, 301}, {5, 600}, {6, 601}}, 3);
  ASSERT_EQ(g.thresholds.size(), 3u);
  EXPECT_EQ(g.thresholds[0], (GroupBand{1, 300}));
  EXPECT_EQ(g.thresholds[1], (GroupBand{301, 600}));
  EXPECT_EQ(g.thresholds[2], (GroupBand{601, 900}));
  EXPECT_EQ(g.assignment.at(2), 0);
  EXPECT_EQ(g.assignment.at(3), 0);
  EXPECT_EQ(g.assignment.at(4), 1);
  EXPECT_EQ(g.assignment.at(5), 1);
  EXPECT_EQ(g.assignment.at(6), 2);
  EXPECT_EQ(g.assignment.at(1), 2);
}

TEST(GroupBands, SingleGroup) {
  const auto g = build_groups({{1, 900}, {2, 1}}, 1);
  ASSERT_EQ(g.thresholds.size(), 1u);
  EXPECT_EQ(g.thresholds[0], (GroupBand{1, 900}));
  EXPECT_EQ(g.assignment.at(2), 0);
}

TEST(GroupBands, HalfRoundsUp) {
  EXPECT_EQ(group_upper_threshold(1, 2, 5), 3);   // 2.5
  EXPECT_EQ(group_upper_threshold(1, 4, 10), 3);  // 2.5
  EXPECT_EQ(group_upper_threshold(1, 3, 10), 3);  // 3.33
  EXPECT_EQ(group_upper_threshold(2, 3, 10), 7);  // 6.67
}

TEST(GroupBands, Errors) {
  EXPECT_THROW(build_groups({}, 3), Error);
  EXPECT_THROW(build_groups({{1, 3}}, 0), Error);
  EXPECT_THROW(build_groups({{1, 0}}, 2), Error);
}

TEST(GroupBands, MatchesBruteForceAssignment) {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const int K = 1 + static_cast<int>(uniform_index(rng, 6));
    const auto counts = random_counts(rng, 1 + static_cast<int>(uniform_index(rng, 30)), 1 + static_cast<std::int64_t>(uniform_index(rng, 2000)));
    const auto g = build_groups(counts, K);
    std::int64_t max_count = 0;
    for (const auto& [c, n] : counts) max_count = std::max(max_count, n);
    EXPECT_EQ(g.thresholds.front().low, 1);
    EXPECT_EQ(g.thresholds.back().high, max_count);
    for (std::size_t j = 1; j < g.thresholds.size(); ++j) EXPECT_EQ(g.thresholds[j].low, g.thresholds[j - 1].high + 1);
    for (const auto& [c, n] : counts) {
      int expected = -1;
      for (int j = 1; j <= K && expected < 0; ++j) {
        if (n <= std::llround(static_cast<double>(j) * static_cast<double>(max_count) / K)) expected = j - 1;
      }
      EXPECT_EQ(g.assignment.at(c), expected);
    }
  }
}

TEST(GroupSoftmax, NormalizesPerGroup) {
  SplitMix64 rng(6);
  const auto g = build_groups(random_counts(rng, 20, 900), 3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto b = random_batch(rng, 1, 20, 30.0);
    const Eigen::VectorXd p = group_softmax(b.logits.row(0).transpose(), g);
    for (const auto& members : g.group_columns()) {
      double s = 0.0;
      for (auto c : members) s += p(c);
      if (members.empty()) continue;
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(GroupSoftmax, UniformWithinGroup) {
  const auto g = build_groups({{1, 100}, {2, 100}, {3, 400}}, 4);
  const Eigen::VectorXd p = group_softmax(Eigen::VectorXd::Zero(3), g);
  EXPECT_DOUBLE_EQ(p(0), 0.5);
  EXPECT_DOUBLE_EQ(p(1), 0.5);
  EXPECT_DOUBLE_EQ(p(2), 1.0);
}

TEST(GsLoss, UniformLogitsExamples) {
  const auto one = build_groups({{1, 10}, {2, 10}, {3, 10}, {4, 10}}, 1);
  GsBatch b{Eigen::MatrixXd::Zero(1, 4), {0}};
  EXPECT_NEAR(gs_loss(b, one), std::log(4.0), 1e-12);
  EXPECT_NEAR(gs_loss(b, one), 1.3863, 5e-5);

  const auto four = build_groups({{1, 100}, {2, 100}, {3, 100}, {4, 100}, {5, 400}}, 4);
  GsBatch b5{Eigen::MatrixXd::Zero(1, 5), {2}};
  EXPECT_NEAR(gs_loss(b5, four), std::log(4.0) / 4.0, 1e-12);
  EXPECT_NEAR(gs_loss(b5, four), 0.3466, 5e-5);
}

TEST(GsLoss, MatchesNaiveFormula) {
  SplitMix64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const int K = 1 + static_cast<int>(uniform_index(rng, 4));
    const int classes = 2 + static_cast<int>(uniform_index(rng, 15));
    const auto counts = random_counts(rng, classes, 500);
    const auto b = random_batch(rng, 1 + static_cast<Eigen::Index>(uniform_index(rng, 8)), classes);
    EXPECT_NEAR(gs_loss(b, build_groups(counts, K)), naive_loss(b, counts, K), 1e-10);
  }
}

TEST(GsLoss, SingleGroupIsCrossEntropy) {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto counts = random_counts(rng, 10, 700);
    const auto b = random_batch(rng, 6, 10, 8.0);
    EXPECT_NEAR(gs_loss(b, build_groups(counts, 1)), softmax_cross_entropy(b), 1e-12);
  }
}

TEST(GsLoss, StableForLargeLogits) {
  const auto g = build_groups({{1, 1}, {2, 1}}, 1);
  GsBatch b{Eigen::MatrixXd::Constant(1, 2, 1000.0), {0}};
  EXPECT_NEAR(gs_loss(b, g), std::log(2.0), 1e-12);
}

TEST(GsLoss, LabelOutsideClassesRejected) {
  const auto g = build_groups({{1, 1}, {2, 1}}, 1);
  GsBatch b{Eigen::MatrixXd::Zero(1, 2), {2}};
  try {
    gs_loss(b, g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LabelOutsideGroups);
  }
  GsBatch wide{Eigen::MatrixXd::Zero(1, 3), {0}};
  EXPECT_THROW(gs_loss(wide, g), Error);
}

TEST(GsGrad, TwoClassExample) {
  const auto g = build_groups({{1, 5}, {2, 5}}, 1);
  GsBatch b{Eigen::MatrixXd::Zero(1, 2), {0}};
  const auto grad = gs_loss_grad(b, g);
  EXPECT_DOUBLE_EQ(grad(0, 0), -0.5);
  EXPECT_DOUBLE_EQ(grad(0, 1), 0.5);
}

TEST(GsGrad, MatchesFiniteDifferences) {
  SplitMix64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const int K = 1 + static_cast<int>(uniform_index(rng, 4));
    const int classes = 2 + static_cast<int>(uniform_index(rng, 10));
    const auto b = random_batch(rng, 1 + static_cast<Eigen::Index>(uniform_index(rng, 5)), classes);
    EXPECT_LT(finite_difference_error(b, build_groups(random_counts(rng, classes, 600), K)), 1e-5) << trial;
  }
}

TEST(GsGrad, OtherGroupsUntouched) {
  SplitMix64 rng(10);
  const auto counts = random_counts(rng, 15, 900);
  const auto g = build_groups(counts, 3);
  const auto col_group = g.column_groups();
  for (int trial = 0; trial < 50; ++trial) {
    auto b = random_batch(rng, 4, 15);
    const auto grad = gs_loss_grad(b, g);
    const double loss = gs_loss(b, g);
    for (Eigen::Index r = 0; r < 4; ++r) {
      const int label_group = col_group[static_cast<std::size_t>(b.labels[static_cast<std::size_t>(r)])];
      for (Eigen::Index c = 0; c < 15; ++c) {
        if (col_group[static_cast<std::size_t>(c)] == label_group) continue;
        EXPECT_EQ(grad(r, c), 0.0);
        b.logits(r, c) += 7.0;
      }
    }
    EXPECT_EQ(gs_loss(b, g), loss);
  }
}

TEST(GroupsJson, RoundTrip) {
  SplitMix64 rng(11);
  const auto g = build_groups(random_counts(rng, 25, 1000), 3);
  const auto dir = lt::temp_dir("groups");
  export_groups(g, dir / "groups.json");
  EXPECT_EQ(import_groups(dir / "groups.json"), g);
  const auto j = nlohmann::json::parse(lt::slurp(dir / "groups.json"));
  EXPECT_EQ(j["K"], 3);
  EXPECT_EQ(j["thresholds"].size(), 3u);
}

TEST(GroupsJson, MissingKeyIsSchemaError) {
  auto j = nlohmann::json(groups_to_json(build_groups({{1, 9}}, 2)));
  j.erase("K");
  try {
    groups_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaError);
    EXPECT_NE(std::string(e.what()).find("missing key \"K\""), std::string::npos);
  }
}

TEST(GroupsJson, OutOfRangeGroupIsSchemaError) {
  auto j = nlohmann::json(groups_to_json(build_groups({{1, 9}}, 2)));
  j["assignment"]["1"] = 5;
  EXPECT_THROW(groups_from_json(j), Error);
}

TEST(GsFixtures, BundledFixturePasses) {
  for (const auto& r : check_gs_fixture(fs::path(LTMOT_FIXTURE_DIR) / "gs")) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

TEST(GsFixtures, RegenerationIsByteIdentical) {
  const auto dir = lt::temp_dir("gs_emit");
  write_gs_fixture(make_gs_fixture(2024), dir);
  EXPECT_EQ(lt::tree_contents(dir), lt::tree_contents(fs::path(LTMOT_FIXTURE_DIR) / "gs"));
}

TEST(GsFixtures, CorruptedGradientFails) {
  const auto dir = lt::temp_dir("gs_bad");
  auto f = make_gs_fixture(3);
  f.grad(0, 0) += 0.01;
  write_gs_fixture(f, dir);
  bool grad_failed = false;
  for (const auto& r : check_gs_fixture(dir)) {
    if (r.name == "grad_matches_expected") grad_failed = !r.passed;
  }
  EXPECT_TRUE(grad_failed);
}

TEST(GsFixtures, MatrixCsvRoundTrip) {
  SplitMix64 rng(12);
  const auto b = random_batch(rng, 5, 7, 1e3);
  EXPECT_EQ(parse_matrix_csv(format_matrix_csv(b.logits)), b.logits);
}
