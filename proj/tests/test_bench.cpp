#include "oanav/bench.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace oanav;

TEST(Variants, NamesRoundTrip) {
  for (const Variant v : all_variants()) EXPECT_EQ(variant_from_string(to_string(v)), v);
  EXPECT_EQ(variant_from_string("gt_perc"), Variant::GtPerc);
  EXPECT_EQ(variant_from_string("OURS"), Variant::Ours);
  EXPECT_THROW(variant_from_string("teleport"), Error);
  EXPECT_GT(variant_spec(Variant::Con).inflation_mult, variant_spec(Variant::Oppo).inflation_mult);
  EXPECT_TRUE(variant_spec(Variant::Ours).use_object_layers);
  EXPECT_FALSE(variant_spec(Variant::Oppo).use_object_layers);
  EXPECT_EQ(variant_spec(Variant::Ours).perception, Perception::FullPipeline);
}

TEST(Config, JsonRoundTripAndPatch) {
  const BenchConfig base;
  const nlohmann::json j = config_to_json(base);
  EXPECT_EQ(config_to_json(config_from_json(j)).dump(), j.dump());
  const BenchConfig patched = config_from_json(nlohmann::json::parse(R"({"dt": 0.05, "robot": {"v_max": 0.5}})"));
  EXPECT_DOUBLE_EQ(patched.dt, 0.05);
  EXPECT_DOUBLE_EQ(patched.robot.v_max, 0.5);
  EXPECT_DOUBLE_EQ(patched.robot.radius, base.robot.radius);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"no_such_key": 1})")), Error);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"robot": {"wheels": 4}})")), Error);
}

TEST(Summary, MeansOverSuccessesOnly) {
  std::vector<EpisodeMetrics> m(3);
  m[0].variant = "Ours";
  m[0].success = true;
  m[0].t_g = 10.0;
  m[0].t_r = 1.0;
  m[1].variant = "Ours";
  m[1].success = true;
  m[1].t_g = 20.0;
  m[1].t_r = 0.0;
  m[2].variant = "Con";
  m[2].t_g = 99.0;
  const auto s = summarize(m);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].variant, "Ours");
  EXPECT_EQ(s[0].runs, 2);
  EXPECT_DOUBLE_EQ(s[0].t_g_mean(), 15.0);
  EXPECT_DOUBLE_EQ(s[0].t_r_mean(), 0.5);
  EXPECT_EQ(s[1].successes, 0);
  EXPECT_DOUBLE_EQ(s[1].t_g_mean(), 0.0);
  std::ostringstream csv, svg;
  write_summary_csv(csv, s);
  write_summary_svg(svg, s);
  EXPECT_NE(csv.str().find("Ours"), std::string::npos);
  EXPECT_NE(svg.str().find("<svg"), std::string::npos);
}

TEST(SceneSet, CountsAndNames) {
  const auto set = generate_scene_set(2, 1, 1, 42);
  ASSERT_EQ(set.size(), 4u);
  EXPECT_EQ(set[0].scene.density, "sparse");
  EXPECT_EQ(set[3].scene.density, "dense");
  const auto again = generate_scene_set(2, 1, 1, 42);
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_EQ(set[i].name, again[i].name);
    EXPECT_EQ(scene_to_json(set[i].scene).dump(), scene_to_json(again[i].scene).dump());
  }
}

TEST(Episode, GroundTruthVariantReachesGoalsDeterministically) {
  const auto set = generate_scene_set(1, 0, 0, 7);
  const BenchConfig cfg;
  EpisodeLogs logs;
  const EpisodeMetrics a = run_episode(set[0].scene, Variant::GtPerc, cfg, 3, &logs, set[0].name);
  const EpisodeMetrics b = run_episode(set[0].scene, Variant::GtPerc, cfg, 3, nullptr, set[0].name);
  EXPECT_TRUE(a.success) << a.failure;
  EXPECT_EQ(a.waypoints.size(), set[0].scene.waypoints.size());
  EXPECT_GT(a.t_g, 0.0);
  EXPECT_GE(a.t_g, a.t_r);
  std::ostringstream ra, rb;
  write_metrics_row(ra, a);
  write_metrics_row(rb, b);
  EXPECT_EQ(ra.str(), rb.str());
  ASSERT_FALSE(logs.trajectory.empty());
  EXPECT_NEAR(logs.trajectory.back().t, a.t_g, cfg.dt + 1e-9);
}
