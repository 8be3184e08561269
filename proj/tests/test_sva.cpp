#include <gtest/gtest.h>

#include <mutex>

#include "ltmot/sva.hpp"
#include "support.hpp"

using namespace ltmot;
namespace lt = ltmot::testing;

namespace {

SequenceMeta meta_of(std::int64_t total, int w = 1920, int h = 1080) {
  SequenceMeta m;
  m.name = "SEQ";
  m.seq_length = total;
  m.im_width = w;
  m.im_height = h;
  return m;
}

Trajectory straight_track(std::int64_t id, std::int64_t first, std::int64_t last, double x0 = 100, double dx = 1.0) {
  Trajectory t;
  t.identity = id;
  for (std::int64_t f = first; f <= last; ++f) {
    t.entries.push_back({f, id, x0 + dx * static_cast<double>(f - first), 50.0 + static_cast<double>(f - first), 20, 40,
                         1, 1, 1.0});
  }
  return t;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Usage;
}

}  // namespace

TEST(Spans, Formulas) {
  EXPECT_EQ(backtrack_end(10, 20, 100), 30);
  EXPECT_EQ(backtrack_end(830, 900, 1050), 970);
  EXPECT_EQ(backtrack_end(1, 900, 1050), 1050);
  EXPECT_EQ(predict_start(830, 1050), 610);
  EXPECT_EQ(predict_start(200, 1050), 1);
}

TEST(Backtrack, PalindromeExample) {
  const auto plan = plan_backtrack(straight_track(5, 10, 20), meta_of(100));
  EXPECT_EQ(plan.target_first, 21);
  EXPECT_EQ(plan.target_last, 30);
  ASSERT_EQ(plan.placements.size(), 10u);
  EXPECT_EQ(plan.placements.front().frame, 21);
  EXPECT_EQ(plan.placements.front().source.frame, 19);
  EXPECT_EQ(plan.placements.back().frame, 30);
  EXPECT_EQ(plan.placements.back().source.frame, 10);
  for (const auto& p : plan.placements) {
    EXPECT_EQ(p.left, p.source.left);
    EXPECT_EQ(p.top, p.source.top);
  }
}

TEST(Backtrack, ClippedAtSequenceEnd) {
  const auto plan = plan_backtrack(straight_track(1, 830, 900), meta_of(1050));
  EXPECT_EQ(plan.target_last, 970);
  const auto long_plan = plan_backtrack(straight_track(1, 100, 900), meta_of(1050));
  EXPECT_EQ(long_plan.target_last, 1050);
  EXPECT_EQ(long_plan.placements.back().source.frame, 750);
}

TEST(Backtrack, Errors) {
  EXPECT_EQ(code_of([] { plan_backtrack(straight_track(1, 5, 5), meta_of(100)); }), ErrorCode::EmptyPlan);
  EXPECT_EQ(code_of([] { plan_backtrack(straight_track(1, 5, 100), meta_of(100)); }), ErrorCode::NotApplicable);
}

TEST(Backtrack, GapFramesAreSkipped) {
  Trajectory t = straight_track(3, 10, 20);
  t.entries.erase(t.entries.begin() + 5);  // frame 15
  const auto plan = plan_backtrack(t, meta_of(100));
  EXPECT_EQ(plan.placements.size(), 9u);
  for (const auto& p : plan.placements) EXPECT_NE(p.frame, 25);
}

TEST(Backtrack, SpanLawsOnRandomTriples) {
  SplitMix64 rng(31);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto total = 2 + static_cast<std::int64_t>(uniform_index(rng, 400));
    const auto n = 1 + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(total - 1)));
    const auto m = 1 + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(n)));
    if (m == n) continue;
    const auto plan = plan_backtrack(straight_track(1, m, n), meta_of(total));
    ASSERT_EQ(plan.target_first, n + 1);
    ASSERT_LE(plan.target_last, total);
    ASSERT_LE(plan.target_last - n, n - m);
    ASSERT_EQ(static_cast<std::int64_t>(plan.placements.size()), plan.target_last - n);
    for (const auto& p : plan.placements) {
      ASSERT_EQ(p.frame + p.source.frame, 2 * n);
      ASSERT_GE(p.source.frame, m);
      ASSERT_LT(p.source.frame, n);
    }
  }
}

TEST(Predict, SpanAndTemplate) {
  const auto plan = plan_predict(straight_track(2, 830, 1050, 100, 0.5), meta_of(1050), 1.0, 42);
  EXPECT_EQ(plan.target_first, 610);
  EXPECT_EQ(plan.target_last, 829);
  ASSERT_EQ(plan.placements.size(), 220u);
  const auto tmpl = plan.placements.front().source;
  for (const auto& p : plan.placements) {
    EXPECT_EQ(p.source, tmpl);
    EXPECT_GE(p.source.visibility, 1.0);
  }
}

TEST(Predict, Errors) {
  EXPECT_EQ(code_of([] { plan_predict(straight_track(1, 10, 50), meta_of(100), 1.0, 1); }), ErrorCode::NotApplicable);
  EXPECT_EQ(code_of([] { plan_predict(straight_track(1, 1, 100), meta_of(100), 1.0, 1); }), ErrorCode::EmptyPlan);
  Trajectory dim = straight_track(1, 60, 100);
  for (auto& e : dim.entries) e.visibility = 0.4;
  EXPECT_EQ(code_of([&] { plan_predict(dim, meta_of(100), 0.5, 1); }), ErrorCode::NoVisibleTemplate);
}

TEST(Predict, TemplateRespectsVisibilityThreshold) {
  Trajectory t = straight_track(4, 60, 100);
  for (std::size_t i = 0; i < t.entries.size(); ++i) t.entries[i].visibility = i == 7 ? 0.9 : 0.2;
  const auto plan = plan_predict(t, meta_of(100), 0.8, 9);
  EXPECT_EQ(plan.placements.front().source.frame, 67);
}

TEST(Predict, DeterministicPerSeed) {
  const auto t = straight_track(8, 500, 1050, 10, 1.5);
  const auto a = plan_predict(t, meta_of(1050), 1.0, 1234);
  const auto b = plan_predict(t, meta_of(1050), 1.0, 1234);
  ASSERT_EQ(a.placements.size(), b.placements.size());
  for (std::size_t i = 0; i < a.placements.size(); ++i) {
    EXPECT_EQ(a.placements[i].left, b.placements[i].left);
    EXPECT_EQ(a.placements[i].top, b.placements[i].top);
  }
  const auto c = plan_predict(t, meta_of(1050), 1.0, 1235);
  bool differs = false;
  for (std::size_t i = 0; i < a.placements.size(); ++i) differs = differs || a.placements[i].left != c.placements[i].left;
  EXPECT_TRUE(differs);
}

TEST(Predict, PositionsClampedInsideImage) {
  // Moving right fast: extrapolation would leave the frame.
  const auto plan = plan_predict(straight_track(1, 40, 100, 100, 10.0), meta_of(100, 800, 200), 1.0, 3);
  for (const auto& p : plan.placements) {
    EXPECT_GE(p.left, 0.0);
    EXPECT_LE(p.left + p.source.width, 800.0);
    EXPECT_GE(p.top, 0.0);
    EXPECT_LE(p.top + p.source.height, 200.0);
  }
}

TEST(Synthesize, RowsCopySourceAttributes) {
  const auto plan = plan_backtrack(straight_track(5, 10, 20), meta_of(100));
  const auto rows = synthesize_entries({plan});
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows[0].frame, 21);
  EXPECT_EQ(rows[0].identity, 5);
  EXPECT_EQ(rows[0].left, 109.0);  // source frame 19
  EXPECT_EQ(rows[0].width, 20.0);
  EXPECT_EQ(rows[0].class_id, 1);
}

TEST(Paste, IdenticalFrameAtSourcePositionIsNoOp) {
  const Image frame = lt::random_image(64, 48, 3, 5);
  Image target = frame;
  const TrackEntry src{3, 1, 10, 10, 8, 12, 1, 1, 1};
  paste(target, frame, rasterize_box(64, 48, src), {7, 10, 10, src});
  EXPECT_EQ(target.data, frame.data);
}

TEST(Paste, PartiallyOutsideFrameIsClipped) {
  const Image source = lt::random_image(32, 32, 3, 1);
  Image target(32, 32, 3);
  const TrackEntry src{1, 1, 4, 4, 10, 10, 1, 1, 1};
  paste(target, source, rasterize_box(32, 32, src), {2, 27, -3, src});
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      const bool inside = x >= 27 && y < 7;
      for (int c = 0; c < 3; ++c) {
        const auto expected = inside ? source.pixel(x - 23, y + 7)[c] : 0;
        ASSERT_EQ(target.pixel(x, y)[c], expected) << x << "," << y;
      }
    }
  }
}

TEST(Composite, PixelDiffMatchesOracle) {
  SplitMix64 rng(8);
  const int w = 48;
  const int h = 40;
  std::map<std::int64_t, Image> frames;
  for (std::int64_t f = 1; f <= 6; ++f) frames[f] = lt::random_image(w, h, 3, 100 + static_cast<std::uint64_t>(f));
  const FrameLoader load = [&](std::int64_t f) { return frames.at(f); };
  const MaskProvider masks({}, w, h, MaskPolicy::bbox);

  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ContinuationPlan> plans;
    for (std::int64_t id = 1; id <= 3; ++id) {
      ContinuationPlan plan;
      plan.identity = id;
      const auto n_place = uniform_index(rng, 3);
      for (std::uint64_t k = 0; k < n_place; ++k) {
        TrackEntry src{1 + static_cast<std::int64_t>(uniform_index(rng, 6)), id,
                       static_cast<double>(uniform_index(rng, 40)) - 5.0,
                       static_cast<double>(uniform_index(rng, 32)) - 5.0,
                       3.0 + static_cast<double>(uniform_index(rng, 15)),
                       3.0 + static_cast<double>(uniform_index(rng, 15)), 1, 1, 1.0};
        plan.placements.push_back({1 + static_cast<std::int64_t>(uniform_index(rng, 6)),
                                   uniform_open_closed(rng) * 60.0 - 10.0, uniform_open_closed(rng) * 50.0 - 10.0,
                                   src});
      }
      plans.push_back(plan);
    }

    std::map<std::int64_t, Image> written;
    std::mutex mu;
    composite_continuation(plans, load, masks, [&](std::int64_t f, const Image& img) {
      std::lock_guard lock(mu);
      written[f] = img;
    }, 2);

    const auto grouped = placements_by_frame(plans);
    EXPECT_EQ(written.size(), grouped.size());
    for (const auto& [f, group] : grouped) {
      const Image& out = written.at(f);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::uint8_t* expected = frames.at(f).pixel(x, y);
          for (const auto& p : group) {
            const int sx = x - (round_px(p.left) - round_px(p.source.left));
            const int sy = y - (round_px(p.top) - round_px(p.source.top));
            if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
            if (rasterize_box(w, h, p.source).at(sx, sy)) expected = frames.at(p.source.frame).pixel(sx, sy);
          }
          for (int c = 0; c < 3; ++c) ASSERT_EQ(out.pixel(x, y)[c], expected[c]) << "trial " << trial;
        }
      }
    }
  }
}

TEST(Composite, MissingMaskWithoutFallback) {
  const MaskProvider masks({}, 16, 16, MaskPolicy::none);
  EXPECT_EQ(code_of([&] { masks.get({1, 1, 0, 0, 4, 4, 1, 1, 1}); }), ErrorCode::MissingMask);
}

TEST(Composite, MaskFileTakesPrecedence) {
  const auto dir = lt::temp_dir("masks");
  Mask m(16, 16);
  m.set(3, 4, 1);
  save_mask(m, dir / mask_file_name(2, 7));
  const MaskProvider masks(dir, 16, 16, MaskPolicy::none);
  const auto layer = masks.get({2, 7, 0, 0, 10, 10, 1, 1, 1});
  EXPECT_EQ(layer.source, MaskSource::file);
  EXPECT_EQ(layer.mask.area(), 1u);
  EXPECT_EQ(mask_file_name(2, 7), "000002_7.png");

  const MaskProvider wrong(dir, 20, 16, MaskPolicy::none);
  EXPECT_EQ(code_of([&] { wrong.get({2, 7, 0, 0, 10, 10, 1, 1, 1}); }), ErrorCode::DimensionMismatch);
}
