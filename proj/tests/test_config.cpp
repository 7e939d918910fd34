#include <doctest.h>

#include "pclnet/config.hpp"
#include "pclnet/error.hpp"

using namespace pclnet;

TEST_SUITE("config") {

TEST_CASE("empty text gives defaults") {
  const RunConfig c = parse_config("");
  CHECK(c == RunConfig{});
  CHECK(c.cluster.num_clusters == 35);
  CHECK(c.collect.gamma == 0.42);
  CHECK(c.collect.samples_per_cluster == 600);
  CHECK(c.collect.patch_size == 15);
  CHECK(c.pretrain.epochs == 800);
  CHECK(c.pretrain.batch_size == 512);
  CHECK(c.pretrain.bank_size == 8192);
  CHECK(c.pretrain.momentum == 0.999);
  CHECK(c.pretrain.temperature == 0.4);
  CHECK(c.pretrain.milestones == std::vector<int>{300, 500});
  CHECK(c.finetune.learning_rate == 0.01);
  CHECK(c.finetune.epochs == 300);
  CHECK(c.finetune.batch_size == 32);
  CHECK(parse_config("# only a comment\n\n   \n") == RunConfig{});
}

TEST_CASE("values and sections") {
  const RunConfig c = parse_config(
      "seed = 42\n"
      "[cluster]\nnum_clusters = 9   # reduced\ncandidate_stride=2\n"
      "[pretrain]\nmilestones = 10, 20\nmomentum = 0.99\n"
      "[finetune]\nshots_per_class = 5\n");
  CHECK(c.seed == 42);
  CHECK(c.cluster.num_clusters == 9);
  CHECK(c.cluster.candidate_stride == 2);
  CHECK(c.pretrain.milestones == std::vector<int>{10, 20});
  CHECK(c.pretrain.momentum == 0.99);
  CHECK(c.finetune.shots_per_class == 5);
  CHECK(parse_config("[pretrain]\nmilestones =\n").pretrain.milestones.empty());
}

TEST_CASE("constraint violations name the key and line") {
  CHECK_THROWS_WITH_AS(parse_config("[pretrain]\ntemperature = -1\n"),
                       "line 2: temperature must be > 0", Error);
  CHECK_THROWS_WITH_AS(parse_config("[pretrain]\nbank_size = 1000\n"),
                       doctest::Contains("bank_size must be a multiple of batch_size"), Error);
  CHECK_THROWS_WITH_AS(parse_config("[collect]\npatch_size = 14\n"),
                       doctest::Contains("patch_size must be a positive odd integer"), Error);
  CHECK_THROWS_WITH_AS(parse_config("[pretrain]\nmomentum = 1\n"), doctest::Contains("momentum"), Error);
}

TEST_CASE("malformed input") {
  CHECK_THROWS_WITH_AS(parse_config("[cluster]\nclusters = 3\n"), doctest::Contains("line 2: unknown key 'clusters'"), Error);
  CHECK_THROWS_WITH_AS(parse_config("[bogus]\n"), doctest::Contains("unknown section"), Error);
  CHECK_THROWS_WITH_AS(parse_config("[cluster\n"), doctest::Contains("malformed section"), Error);
  CHECK_THROWS_WITH_AS(parse_config("seed 3\n"), doctest::Contains("expected 'key = value'"), Error);
  CHECK_THROWS_WITH_AS(parse_config("[cluster]\nnum_clusters = 3.5\n"),
                       doctest::Contains("num_clusters must be an integer"), Error);
  CHECK_THROWS_WITH_AS(parse_config("[collect]\ngamma = abc\n"), doctest::Contains("gamma must be a number"), Error);
  CHECK_THROWS_AS(parse_config("num_clusters = 3\n"), Error);
}

TEST_CASE("class covariance overrides") {
  const RunConfig c = parse_config("[synth]\nclasses = 2\nclass.2 = 1, 1, 1, 0, 0, 0, 0, 0, 0\n");
  REQUIRE(c.synth.covariances.size() == 1);
  CHECK(c.synth.covariances[0].first == 2);
  const SyntheticSceneSpec spec = c.synth_spec();
  CHECK(spec.class_covariances.size() == 2);
  CHECK(spec.class_covariances[1] == CoherencyMatrix::identity());
  CHECK_THROWS_WITH_AS(parse_config("[synth]\nclass.1 = 1, 1, 1\n"), doctest::Contains("9 comma-separated"), Error);
  CHECK_THROWS_WITH_AS(parse_config("[synth]\nclass.4 = 1, 1, 1, 0, 0, 0, 0, 0, 0\n"),
                       doctest::Contains("exceeds the class count"), Error);
  CHECK_THROWS_WITH_AS(parse_config("[synth]\nclass.1 = -1, 1, 1, 0, 0, 0, 0, 0, 0\n"),
                       doctest::Contains("not PSD"), Error);
}

TEST_CASE("format_config round-trips") {
  RunConfig c = parse_config("seed = 7\n[synth]\nclass.3 = 2, 1, 0.5, 0.1, 0.2, 0, 0, 0.05, 0\n[pretrain]\nmilestones = 5\nlearning_rate = 0.3\n");
  CHECK(parse_config(format_config(c)) == c);
  CHECK(parse_config(format_config(RunConfig{})) == RunConfig{});
  c.collect.gamma = 0.1 + 0.2;
  CHECK(parse_config(format_config(c)).collect.gamma == c.collect.gamma);
}

TEST_CASE("derived stage configurations") {
  RunConfig c;
  c.seed = 5;
  const PretrainConfig p = c.pretrain_config();
  CHECK(p.sgd.milestones == c.pretrain.milestones);
  CHECK(p.sgd.learning_rate == 0.1);
  CHECK(p.seed != c.finetune_config().seed);
  CHECK(c.collect_options().samples_per_cluster == 600);
  RunConfig d = c;
  d.seed = 6;
  CHECK(d.pretrain_config().seed != p.seed);
  CHECK_NOTHROW(c.validate());
  c.threads = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

}  // TEST_SUITE
