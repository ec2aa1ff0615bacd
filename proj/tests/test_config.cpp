#include <doctest.h>

#include "cppf/config.hpp"

using namespace cppf;

TEST_CASE("defaults match the documented values") {
  const RunConfig c;
  CHECK(c.pipeline.tuples == 5000);
  CHECK(c.pipeline.tuple_size == 5);
  CHECK(c.pipeline.filter.tau == 0.5);
  CHECK(c.pipeline.filter.eta == 1.0);
  CHECK(c.pipeline.voxel == 0.002);
  CHECK(c.pipeline.orientation_resolution_deg == 1.0);
  CHECK(c.pipeline.refine.iterations == 100);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("dump parses back to itself") {
  RunConfig c;
  c.meshes = {"builtin:cube", "builtin:cylinder"};
  c.pipeline.filter.tau = 0.3;
  c.pipeline.voxel = 0.1 + 0.2;  // not exactly representable in short decimal form
  c.predictor.loss = CoordLoss::kCrossEntropy;
  c.oracle.coord_noise_sigma = 0.02;
  c.pipeline.decode = DecodeMode::kSample;
  const std::string text = dump_config(c);
  const RunConfig back = parse_config(text);
  CHECK(dump_config(back) == text);
  CHECK(back.pipeline.voxel == c.pipeline.voxel);
  CHECK(back.meshes == c.meshes);
}

TEST_CASE("sections, comments and overrides") {
  const RunConfig c = parse_config(
      "# top comment\n"
      "views = 3\n"
      "[filter]\n"
      "tau = 0.25   # inline\n"
      "enabled = false\n"
      "[pipeline]\n"
      "tuples=100\n");
  CHECK(c.views == 3);
  CHECK(c.pipeline.filter.tau == 0.25);
  CHECK_FALSE(c.pipeline.filter.enabled);
  CHECK(c.pipeline.tuples == 100);

  RunConfig d = c;
  apply_override(d, "noise.clutter_fraction=0.3");
  CHECK(d.noise.clutter_fraction == 0.3);
  CHECK_THROWS_AS(apply_override(d, "noise.clutter_fraction"), ConfigError);
}

TEST_CASE("bad input is rejected") {
  CHECK_THROWS_AS(parse_config("[filter]\nwhatever = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[pipeline]\ntuples = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[filter\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[filter]\nenabled = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[pipeline]\ntuples = 0\n").validate(), ConfigError);
  RunConfig c;
  c.meshes = {"/does/not/exist.obj"};
  CHECK_NOTHROW(c.validate(false));
  CHECK_THROWS_AS(c.validate(true), ConfigError);
}
