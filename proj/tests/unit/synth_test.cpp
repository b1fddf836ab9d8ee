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

#include <sstream>

#include <gtest/gtest.h>

#include "lrseg/metrics.hpp"
#include "lrseg/pipeline.hpp"
#include "lrseg/synth.hpp"

using namespace lrseg;

TEST(Synth, ScenarioNames) {
  for (auto s : {Scenario::blobs, Scenario::moons, Scenario::rings}) EXPECT_EQ(parse_scenario(to_string(s)), s);
  try {
    parse_scenario("spirals");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownScenario);
  }
}

TEST(Synth, BlobMeansSitAtHalfSeparation) {
  ScenarioConfig cfg;
  cfg.dim = 4;
  cfg.separation = 6.0;
  Rng rng = make_rng(1);
  const Matrix f = sample_scenario(cfg, ReferenceKind::free, 20000, rng);
  const Matrix o = sample_scenario(cfg, ReferenceKind::obstacle, 20000, rng);
  EXPECT_NEAR(f.col(1).mean(), -3.0, 0.05);
  EXPECT_NEAR(o.col(1).mean(), 3.0, 0.05);
  EXPECT_NEAR(f.col(0).mean(), cfg.offset, 0.05);
  EXPECT_NEAR(o.col(3).mean(), 0.0, 0.05);
}

TEST(Synth, SamplingIsSeeded) {
  for (auto s : {Scenario::blobs, Scenario::moons, Scenario::rings}) {
    ScenarioConfig cfg;
    cfg.scenario = s;
    Rng a = make_rng(5), b = make_rng(5);
    EXPECT_EQ(sample_scenario(cfg, ReferenceKind::free, 50, a), sample_scenario(cfg, ReferenceKind::free, 50, b));
  }
}

TEST(Synth, ReferenceContainerRoundTrips) {
  Rng rng = make_rng(2);
  const Matrix f = sample_scenario({}, ReferenceKind::free, 30, rng);
  const auto c = reference_container(f);
  std::stringstream ss;
  write_feature_container(ss, c);
  EXPECT_EQ(read_feature_container(ss), c);
}

TEST(Synth, ScenesHavePlantedObstacles) {
  SceneConfig sc;
  sc.images = 3;
  sc.obstacles_per_image = 3;
  const auto scenes = make_scenes({}, sc, 17);
  ASSERT_EQ(scenes.ground_truth.size(), 3u);
  for (const auto& gt : scenes.ground_truth) {
    BinaryMask m(gt.height, gt.width, 0);
    for (std::size_t i = 0; i < gt.size(); ++i) m.data[i] = gt.data[i] == LabelMap::kObstacle;
    EXPECT_EQ(connected_components(m).count, 3);
    for (int x = 0; x < gt.width; ++x) EXPECT_EQ(gt.at(0, x), LabelMap::kIgnore);
  }
  EXPECT_EQ(scenes.roi.at(0, 0), 0);
  EXPECT_EQ(scenes.roi.at(sc.height - 1, 0), 1);
  std::stringstream ss;
  write_feature_container(ss, scenes.segments);
  EXPECT_EQ(read_feature_container(ss), scenes.segments);
}

TEST(Synth, FiltersRemoveDuplicateAndLowQualitySegments) {
  SceneConfig sc;
  sc.images = 2;
  const auto scenes = make_scenes({}, sc, 3);
  const int tiles = (sc.height / sc.tile) * (sc.width / sc.tile);
  for (std::uint32_t image = 0; image < 2; ++image) {
    std::vector<SegmentRecord> rs;
    for (const auto& r : scenes.segments.records)
      if (r.image_id == image) rs.push_back(r);
    EXPECT_EQ(static_cast<int>(rs.size()), tiles + sc.obstacles_per_image + 2);
    EXPECT_EQ(static_cast<int>(filter_segments(rs, {}).size()), tiles + sc.obstacles_per_image);
  }
}

TEST(Synth, ScenesAreDeterministic) {
  const auto a = make_scenes({}, {}, 9), b = make_scenes({}, {}, 9), c = make_scenes({}, {}, 10);
  EXPECT_EQ(a.segments, b.segments);
  EXPECT_EQ(a.ground_truth, b.ground_truth);
  EXPECT_NE(a.segments, c.segments);
}

TEST(Synth, RejectsBadConfigs) {
  SceneConfig sc;
  sc.tile = 4;
  EXPECT_THROW(make_scenes({}, sc, 1), Error);
  sc = {};
  sc.obstacles_per_image = 100;
  EXPECT_THROW(make_scenes({}, sc, 1), Error);
  ScenarioConfig one;
  one.dim = 1;
  Rng rng = make_rng(1);
  EXPECT_THROW(sample_scenario(one, ReferenceKind::free, 3, rng), Error);
}
