// Copyright 2026 The lrseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "lrseg/pipeline.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace lrseg;
using testing_util::random_mask;
using testing_util::TempDir;

namespace {

SegmentRecord record(std::uint32_t id, const BinaryMask& m, double iou = 0.95, double stab = 0.95) {
  SegmentRecord r;
  r.image_id = 0;
  r.segment_id = id;
  r.feature = {1.0f};
  r.mask = rle_encode(m);
  r.predicted_iou = iou;
  r.stability_score = stab;
  return r;
}

BinaryMask rect(int h, int w, int r0, int c0, int r1, int c1) {
  BinaryMask m(h, w, 0);
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) m.at(r, c) = 1;
  return m;
}

std::vector<std::uint32_t> ids(const std::vector<SegmentRecord>& rs) {
  std::vector<std::uint32_t> out;
  for (const auto& r : rs) out.push_back(r.segment_id);
  return out;
}

// Random records sharing one image: rectangles or blobs with clustered qualities
// so that duplicates and quality ties both occur.
std::vector<SegmentRecord> random_records(Rng& rng, int n, int h, int w) {
  std::uniform_int_distribution<int> rr(0, h - 1), cc(0, w - 1), shape(0, 3);
  std::uniform_int_distribution<int> q(85, 99);
  std::vector<SegmentRecord> out;
  std::vector<BinaryMask> made;
  for (int i = 0; i < n; ++i) {
    BinaryMask m;
    const int s = shape(rng);
    if (s == 0 && !made.empty()) {
      m = made[std::uniform_int_distribution<std::size_t>(0, made.size() - 1)(rng)];
      m.data[std::uniform_int_distribution<std::size_t>(0, m.size() - 1)(rng)] ^= 1;
    } else if (s == 1) {
      m = random_mask(rng, h, w, 0.3);
    } else {
      int r0 = rr(rng), r1 = rr(rng), c0 = cc(rng), c1 = cc(rng);
      if (r0 > r1) std::swap(r0, r1);
      if (c0 > c1) std::swap(c0, c1);
      m = rect(h, w, r0, c0, r1 + 1, c1 + 1);
    }
    made.push_back(m);
    out.push_back(record(static_cast<std::uint32_t>(100 - i), m, q(rng) / 100.0, q(rng) / 100.0));
  }
  return out;
}

std::vector<oracle::Seg> as_segs(const std::vector<SegmentRecord>& rs) {
  std::vector<oracle::Seg> out;
  for (const auto& r : rs) out.push_back({r.segment_id, r.predicted_iou, r.stability_score, oracle::rle_expand(r.mask.counts)});
  return out;
}

}  // namespace

TEST(Filter, ExactDuplicateKeepsHigherQuality) {
  const auto m = rect(8, 8, 1, 1, 4, 4);
  const std::vector<SegmentRecord> rs{record(1, m, 0.90), record(2, m, 0.95)};
  EXPECT_EQ(ids(filter_segments(rs, {})), (std::vector<std::uint32_t>{2}));
}

TEST(Filter, DuplicateTieKeepsLowerSegmentId) {
  const auto m = rect(8, 8, 1, 1, 4, 4);
  const std::vector<SegmentRecord> rs{record(9, m, 0.95), record(4, m, 0.95)};
  EXPECT_EQ(ids(filter_segments(rs, {})), (std::vector<std::uint32_t>{4}));
}

TEST(Filter, LowQualityDropped) {
  const std::vector<SegmentRecord> rs{record(1, rect(8, 8, 0, 0, 2, 2), 0.5), record(2, rect(8, 8, 4, 4, 6, 6), 0.95, 0.5),
                                      record(3, rect(8, 8, 0, 4, 2, 6))};
  EXPECT_EQ(ids(filter_segments(rs, {})), (std::vector<std::uint32_t>{3}));
}

TEST(Filter, RoiExcludesDisjointMasks) {
  FilterConfig cfg;
  cfg.roi = rect(8, 8, 4, 0, 8, 8);
  const std::vector<SegmentRecord> rs{record(1, rect(8, 8, 0, 0, 2, 2)), record(2, rect(8, 8, 3, 3, 5, 5))};
  EXPECT_EQ(ids(filter_segments(rs, cfg)), (std::vector<std::uint32_t>{2}));
  cfg.roi = BinaryMask(4, 4, 1);
  EXPECT_THROW(filter_segments(rs, cfg), Error);
}

TEST(Filter, ThresholdsValidated) {
  FilterConfig cfg;
  cfg.dedup_iou_threshold = 1.5;
  EXPECT_THROW(filter_segments(std::vector<SegmentRecord>{}, cfg), Error);
}

TEST(FilterProperty, MatchesAllPairsOracle) {
  Rng rng = make_rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const auto rs = random_records(rng, 3 + trial % 10, 10, 12);
    FilterConfig cfg;
    cfg.dedup_iou_threshold = std::uniform_real_distribution<double>(0.2, 0.95)(rng);
    std::vector<std::uint8_t> roi_px;
    if (trial % 2) {
      cfg.roi = random_mask(rng, 10, 12, 0.2);
      roi_px = cfg.roi->data;
    }
    const auto got = ids(filter_segments(rs, cfg));
    const auto want = oracle::nms(as_segs(rs), cfg.min_predicted_iou, cfg.min_stability, cfg.dedup_iou_threshold,
                                  cfg.roi ? &roi_px : nullptr);
    EXPECT_EQ(std::set<std::uint32_t>(got.begin(), got.end()), want) << "trial " << trial;
  }
}

TEST(FilterProperty, Idempotent) {
  Rng rng = make_rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto rs = random_records(rng, 12, 10, 10);
    FilterConfig cfg;
    cfg.dedup_iou_threshold = 0.5;
    const auto once = filter_segments(rs, cfg);
    EXPECT_EQ(filter_segments(once, cfg), once);
  }
}

TEST(Compose, DecisionMapExamples) {
  const auto a = rect(6, 6, 0, 0, 3, 3), b = rect(6, 6, 2, 2, 5, 5);
  const std::vector<SegmentRecord> rs{record(1, a), record(2, b)};
  std::vector<LrDecision> none{{{0, 1}, -1.0, false}, {{0, 2}, -1.0, false}};
  EXPECT_EQ(compose_decision_map(rs, none, 6, 6), LabelMap(6, 6, 0));
  std::vector<LrDecision> one{{{0, 1}, 1.0, true}, {{0, 2}, -1.0, false}};
  EXPECT_EQ(compose_decision_map(rs, one, 6, 6).data, a.data);
  std::vector<LrDecision> both{{{0, 1}, 1.0, true}, {{0, 2}, 1.0, true}};
  const auto u = compose_decision_map(rs, both, 6, 6);
  for (std::size_t p = 0; p < u.size(); ++p) EXPECT_EQ(u.data[p], a.data[p] | b.data[p]);
  std::vector<LrDecision> missing{{{0, 1}, 1.0, true}};
  try {
    compose_decision_map(rs, missing, 6, 6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingDecision);
  }
}

TEST(Compose, ScoreMapExamples) {
  const auto a = rect(6, 6, 0, 0, 3, 3), b = rect(6, 6, 2, 2, 5, 5);
  const std::vector<SegmentRecord> rs{record(1, a), record(2, b)};
  const auto single = compose_score_map(std::span(rs).first(1), {{{0, 1}, 2.0}}, 6, 6);
  for (std::size_t p = 0; p < a.size(); ++p) {
    EXPECT_EQ(single.scores.data[p], a.data[p] ? 2.0 : -50.0);
    EXPECT_EQ(single.covered.data[p], a.data[p]);
  }
  const auto both = compose_score_map(rs, {{{0, 1}, 1.0}, {{0, 2}, 3.0}}, 6, 6);
  EXPECT_EQ(both.scores.at(2, 2), 3.0);
  EXPECT_EQ(both.scores.at(0, 0), 1.0);
  EXPECT_THROW(compose_score_map(rs, {{{0, 1}, 1.0}}, 6, 6), Error);
}

TEST(ComposeProperty, RandomLayoutsMatchNaiveScan) {
  Rng rng = make_rng(3);
  std::normal_distribution<double> sd(0.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int h = 9, w = 11;
    const auto rs = random_records(rng, 6, h, w);
    std::map<SegmentKey, double> scores;
    std::vector<LrDecision> decisions;
    for (const auto& r : rs) {
      const double s = trial % 5 == 0 ? std::round(sd(rng)) : sd(rng);
      scores[r.key()] = s;
      decisions.push_back({r.key(), s, s >= 0.0});
    }
    const BinaryMask roi = random_mask(rng, h, w, 0.7);
    const BinaryMask* roi_ptr = trial % 2 ? &roi : nullptr;
    const auto dm = compose_decision_map(rs, decisions, h, w, roi_ptr);
    const auto sm = compose_score_map(rs, scores, h, w, -50.0, roi_ptr);
    for (int p = 0; p < h * w; ++p) {
      double best = -50.0;
      bool covered = false, obstacle = false;
      for (const auto& r : rs) {
        if (!oracle::rle_expand(r.mask.counts)[static_cast<std::size_t>(p)]) continue;
        if (roi_ptr && !roi.data[static_cast<std::size_t>(p)]) continue;
        best = covered ? std::max(best, scores[r.key()]) : scores[r.key()];
        covered = true;
        obstacle = obstacle || scores[r.key()] >= 0.0;
      }
      const auto up = static_cast<std::size_t>(p);
      ASSERT_EQ(sm.scores.data[up], best);
      ASSERT_EQ(sm.covered.data[up], covered ? 1 : 0);
      ASSERT_EQ(dm.data[up], obstacle ? 1 : 0);
      // score map thresholded at 0 over covered pixels reproduces the decision map
      ASSERT_EQ(dm.data[up], sm.covered.data[up] && sm.scores.data[up] >= 0.0 ? 1 : 0);
      if (roi_ptr && !roi.data[up]) {
        ASSERT_EQ(dm.data[up], 0);
      }
      if (!covered) {
        ASSERT_EQ(sm.scores.data[up], -50.0);
      }
    }
  }
}

TEST(ComposeProperty, AddingObstacleSegmentIsMonotone) {
  Rng rng = make_rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto rs = random_records(rng, 5, 8, 8);
    std::vector<LrDecision> d;
    for (const auto& r : rs) d.push_back({r.key(), 0.0, std::bernoulli_distribution(0.5)(rng)});
    const auto before = compose_decision_map(rs, d, 8, 8);
    rs.push_back(record(1000, random_mask(rng, 8, 8, 0.3)));
    d.push_back({rs.back().key(), 1.0, true});
    const auto after = compose_decision_map(rs, d, 8, 8);
    for (std::size_t p = 0; p < before.size(); ++p)
      if (before.data[p]) {
        EXPECT_EQ(after.data[p], 1);
      }
  }
}

TEST(ScoreMapFile, RoundTrip) {
  Rng rng = make_rng(5);
  TempDir dir;
  const auto rs = random_records(rng, 4, 7, 5);
  std::map<SegmentKey, double> scores;
  for (const auto& r : rs) scores[r.key()] = std::normal_distribution<double>(0.0, 3.0)(rng);
  const auto sm = compose_score_map(rs, scores, 7, 5);
  write_score_map(dir / "s.lrsm", sm);
  const auto back = read_score_map(dir / "s.lrsm");
  EXPECT_EQ(back.covered, sm.covered);
  EXPECT_EQ(back.floor, -50.0);
  for (std::size_t p = 0; p < sm.scores.size(); ++p)
    EXPECT_EQ(back.scores.data[p], static_cast<double>(static_cast<float>(sm.scores.data[p])));
  auto bytes = testing_util::read_bytes(dir / "s.lrsm");
  bytes.pop_back();
  testing_util::write_bytes(dir / "t.lrsm", bytes);
  EXPECT_THROW(read_score_map(dir / "t.lrsm"), Error);
}
