// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "dapnet/eval_metrics.hpp"
#include "dapnet/scene_sim.hpp"

namespace dapnet {
namespace {

TEST(SampleScene, CountsStayInRangeAndOverlapHolds) {
  const SceneSpec spec = SceneSpec::nwpu_vhr10();
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const Scene s = sample_scene(spec, seed);
    std::vector<int> tally(spec.num_categories(), 0);
    for (const auto& g : s.objects) {
      ASSERT_GE(g.category, 1);
      ++tally[static_cast<std::size_t>(g.category - 1)];
      EXPECT_TRUE(is_inside(g.box, s.image_w, s.image_h));
    }
    for (std::size_t k = 0; k < spec.num_categories(); ++k) {
      EXPECT_GE(tally[k], spec.categories[k].min_count);
      EXPECT_LE(tally[k], spec.categories[k].max_count);
      EXPECT_EQ(s.counts[k], tally[k]);
    }
    EXPECT_EQ(tally[6], 1);  // ground track field
    if (seed % 50 == 0) {
      for (std::size_t i = 0; i < s.objects.size(); ++i)
        for (std::size_t j = i + 1; j < s.objects.size(); ++j)
          EXPECT_LE(iou(s.objects[i].box, s.objects[j].box), spec.max_overlap_iou);
    }
  }
}

TEST(SampleScene, EmptyRanges) {
  SceneSpec spec;
  spec.categories = {{"a", 0, 0, 10, 20}, {"b", 0, 0, 10, 20}};
  const Scene s = sample_scene(spec, 5);
  EXPECT_TRUE(s.objects.empty());
  EXPECT_EQ(s.counts.values, (std::vector<double>{0.0, 0.0}));
}

TEST(SampleScene, Deterministic) {
  const SceneSpec spec = SceneSpec::nwpu_vhr10();
  const Scene a = sample_scene(spec, 42), b = sample_scene(spec, 42), c = sample_scene(spec, 43);
  ASSERT_EQ(a.objects.size(), b.objects.size());
  for (std::size_t i = 0; i < a.objects.size(); ++i) EXPECT_EQ(a.objects[i].box, b.objects[i].box);
  EXPECT_FALSE(a.objects.size() == c.objects.size() && a.objects[0].box == c.objects[0].box);
}

TEST(SampleScene, InfeasiblePlacementNamesCategory) {
  SceneSpec spec;
  spec.image_w = spec.image_h = 100;
  spec.max_overlap_iou = 0.0;
  spec.max_retries = 200;
  spec.categories = {{"crowded", 20, 20, 60, 80}};
  try {
    sample_scene(spec, 1);
    FAIL() << "expected PlacementError";
  } catch (const PlacementError& e) {
    EXPECT_NE(std::string(e.what()).find("crowded"), std::string::npos);
  }
}

TEST(SampleScene, InvalidSpec) {
  SceneSpec spec;
  spec.categories = {{"x", 3, 2, 10, 20}};
  EXPECT_THROW(sample_scene(spec, 0), InvariantError);
  spec.categories = {{"x", 1, 2, 0, 20}};
  EXPECT_THROW(sample_scene(spec, 0), InvariantError);
}

TEST(Perturb, ZeroNoiseIsIdentity) {
  const Scene s = sample_scene(SceneSpec::nwpu_vhr10(), 8);
  const auto dets = perturb_detections(s, {}, 3);
  ASSERT_EQ(dets.size(), s.objects.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    EXPECT_EQ(dets[i].box, s.objects[i].box);
    EXPECT_EQ(dets[i].category, s.objects[i].category);
    EXPECT_GE(dets[i].score, 0.6);
    EXPECT_LE(dets[i].score, 1.0);
  }
  std::vector<EvalImage> images{{dets, s.objects}};
  EXPECT_NEAR(evaluate(images).map, 1.0, 1e-12);
}

TEST(Perturb, MissRateOneLeavesOnlySpurious) {
  const Scene s = sample_scene(SceneSpec::nwpu_vhr10(), 8);
  NoiseSpec noise;
  noise.miss_rate = 1.0;
  EXPECT_TRUE(perturb_detections(s, noise, 1).empty());
  noise.false_positive_rate = 1.0;
  const auto dets = perturb_detections(s, noise, 1);
  EXPECT_EQ(dets.size(), s.objects.size());
  for (const auto& d : dets) EXPECT_LE(d.score, 0.6);
}

TEST(Perturb, JitterStaysInsideImageAndIsDeterministic) {
  const Scene s = sample_scene(SceneSpec::nwpu_vhr10(), 9);
  NoiseSpec noise;
  noise.jitter_stddev = 30.0;
  noise.candidates_per_object = 3;
  noise.extra_spurious = 25;
  const auto a = perturb_detections(s, noise, 4);
  const auto b = perturb_detections(s, noise, 4);
  EXPECT_EQ(a.size(), 3 * s.objects.size() + 25);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].box, b[i].box);
    EXPECT_EQ(a[i].score, b[i].score);
    EXPECT_TRUE(a[i].box.valid());
    EXPECT_TRUE(is_inside(a[i].box, s.image_w, s.image_h));
  }
}

TEST(Perturb, InvalidNoise) {
  const Scene s{100, 100, {}, CategoryCounts(std::size_t{1})};
  NoiseSpec noise;
  noise.miss_rate = 1.5;
  EXPECT_THROW(perturb_detections(s, noise, 0), InvariantError);
  noise = {};
  noise.jitter_stddev = -1.0;
  EXPECT_THROW(perturb_detections(s, noise, 0), InvariantError);
}

TEST(OracleCpn, RecoversCounts) {
  const BaseLevels levels = BaseLevels::standard();
  const SceneSpec spec = SceneSpec::nwpu_vhr10();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Scene s = sample_scene(spec, seed);
    const auto recovered = predict_counts(oracle_cpn_prediction(s.counts, levels), levels);
    for (std::size_t k = 0; k < s.counts.size(); ++k) EXPECT_NEAR(recovered[k], s.counts[k], 1e-9);
  }
}

TEST(OracleCpn, SixtyThreeViaThreeLevels) {
  const BaseLevels levels = BaseLevels::standard();
  const CategoryCounts counts(std::vector<double>{63.0});
  const CpnPrediction pred = oracle_cpn_prediction(counts, levels);
  std::vector<int> confident;
  for (std::size_t e = 0; e < levels.size(); ++e)
    if (pred.object_probability(0, e) > 0.7) confident.push_back(levels.values[e]);
  EXPECT_EQ(confident, (std::vector<int>{32, 48, 64}));
  EXPECT_NEAR(predict_counts(pred, levels)[0], 63.0, 1e-9);
}

TEST(OracleCpn, EmptySceneGivesZeros) {
  const BaseLevels levels = BaseLevels::standard();
  const auto out = predict_counts(oracle_cpn_prediction(CategoryCounts(std::size_t{10}), levels), levels);
  for (std::size_t k = 0; k < out.size(); ++k) EXPECT_EQ(out[k], 0.0);
}

}  // namespace
}  // namespace dapnet
