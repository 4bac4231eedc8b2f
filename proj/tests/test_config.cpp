#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>

#include "drcn/config.hpp"

using namespace drcn;

TEST_CASE("empty config resolves to documented defaults", "[config]") {
  ExperimentConfig cfg;
  apply_config_text(cfg, "", "empty");
  resolve_experiment(cfg);
  CHECK(cfg.flavor == Flavor::drcn);
  CHECK(cfg.train.lambda == 0.5);
  CHECK(cfg.train.alpha_c == 1e-4);
  CHECK(cfg.train.rms_decay == 0.9);
  CHECK(cfg.train.batch_source == 128);
  CHECK(cfg.train.dropout_keep == 0.5);
  CHECK(cfg.train.stopping.window == 5);
  CHECK(cfg.train.stopping.tol == 0.01);
  CHECK(cfg.source == "mnist");
  CHECK(cfg.target == "usps");
  CHECK(cfg.conv_channels == std::array<std::size_t, 3>{100, 150, 200});
  CHECK(cfg.conv_kernels == std::array<std::size_t, 3>{5, 5, 3});
  CHECK(cfg.train.fc_width == 300);
  CHECK(cfg.train.enforce_fc_grid);
  CHECK(cfg.train.pool == PoolFlavor::target_only);
}

TEST_CASE("key=value text parses with comments and blank lines", "[config]") {
  ExperimentConfig cfg;
  apply_config_text(cfg,
                    "# experiment\n"
                    "\n"
                    "lambda = 0.4   # trade-off\n"
                    "  seed=9\n"
                    "flavor=drcn_st\n",
                    "inline");
  CHECK(cfg.train.lambda == 0.4);
  CHECK(cfg.train.seed == 9);
  CHECK(cfg.flavor == Flavor::drcn_st);
}

TEST_CASE("flags override file values", "[config]") {
  ExperimentConfig cfg;
  apply_config_text(cfg, "lambda=0.4\n", "file");
  apply_overrides(cfg, {"lambda=0.6"});
  CHECK(cfg.train.lambda == 0.6);
}

TEST_CASE("unknown keys and bad types are named in errors", "[config]") {
  ExperimentConfig cfg;
  CHECK_THROWS_MATCHES(apply_config_text(cfg, "lamda=0.5\n", "f"), ArgumentError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("lamda")));
  CHECK_THROWS_MATCHES(apply_config_entry(cfg, "lambda", "abc"), ArgumentError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("lambda") &&
                           Catch::Matchers::ContainsSubstring("real")));
  CHECK_THROWS_MATCHES(apply_config_entry(cfg, "seed", "-3"), ArgumentError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("seed")));
  CHECK_THROWS_MATCHES(apply_config_entry(cfg, "noise_gaussian", "maybe"), ArgumentError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("boolean")));
  CHECK_THROWS_MATCHES(apply_config_entry(cfg, "conv_channels", "8,12"), ArgumentError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("three")));
  CHECK_THROWS_MATCHES(apply_config_text(cfg, "lambda\n", "f"), ArgumentError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("f:1")));
  CHECK_THROWS_AS(apply_overrides(cfg, {"novalue"}), ArgumentError);
}

TEST_CASE("out-of-range values are rejected at resolution", "[config]") {
  ExperimentConfig cfg;
  apply_config_entry(cfg, "lambda", "1.5");
  CHECK_THROWS_AS(resolve_experiment(cfg), ArgumentError);

  ExperimentConfig cfg2;
  apply_config_entry(cfg2, "fc_width", "48");  // off the paper grid
  CHECK_THROWS_AS(resolve_experiment(cfg2), ArgumentError);

  ExperimentConfig cfg3;  // same width is fine on the synthetic preset
  apply_config_entry(cfg3, "source", "synth:identity");
  apply_config_entry(cfg3, "target", "synth:invert");
  apply_config_entry(cfg3, "fc_width", "48");
  CHECK_NOTHROW(resolve_experiment(cfg3));
  CHECK_FALSE(cfg3.train.enforce_fc_grid);

  ExperimentConfig cfg4;  // custom conv geometry opts out of the grid too
  apply_config_entry(cfg4, "source", "mnist");
  apply_config_entry(cfg4, "target", "usps");
  apply_config_entry(cfg4, "conv_channels", "8,12,16");
  apply_config_entry(cfg4, "fc_width", "32");
  CHECK_NOTHROW(resolve_experiment(cfg4));
  CHECK_FALSE(cfg4.train.enforce_fc_grid);
}

TEST_CASE("source and target must differ except for convnet_tgt", "[config]") {
  ExperimentConfig cfg;
  cfg.source = "mnist";
  cfg.target = "mnist";
  CHECK_THROWS_AS(resolve_experiment(cfg), ArgumentError);
  cfg.flavor = Flavor::convnet_tgt;
  CHECK_NOTHROW(resolve_experiment(cfg));
}

TEST_CASE("synthetic presets fill architecture defaults", "[config]") {
  ExperimentConfig cfg;
  cfg.source = "synth:identity";
  cfg.target = "synth:invert";
  resolve_experiment(cfg);
  CHECK(cfg.conv_channels == std::array<std::size_t, 3>{8, 12, 16});
  CHECK(cfg.conv_kernels == std::array<std::size_t, 3>{5, 3, 3});
  CHECK(cfg.train.fc_width == 48);

  ExperimentConfig wide;
  wide.source = "synth:identity";
  wide.target = "synth:invert";
  apply_config_entry(wide, "fc_width", "64");  // explicit width survives the preset
  resolve_experiment(wide);
  CHECK(wide.train.fc_width == 64);
}

TEST_CASE("resolved snapshots are reparseable fixed points with stable hashes", "[config]") {
  ExperimentConfig cfg;
  apply_config_text(cfg, "source=synth:identity\ntarget=synth:invert\nlambda=0.6\nseed=5\n",
                    "f");
  resolve_experiment(cfg);
  const std::string snap = serialize_config(cfg);
  const std::string hash = config_hash(cfg);

  ExperimentConfig back;
  apply_config_text(back, snap, "snapshot");
  resolve_experiment(back);
  CHECK(serialize_config(back) == snap);
  CHECK(config_hash(back) == hash);

  ExperimentConfig other = cfg;
  other.train.lambda = 0.7;
  CHECK(config_hash(other) != hash);

  CHECK(hash.size() == 16);  // fnv-1a 64 rendered as fixed-width hex
}

TEST_CASE("default out directory names the run and sanitizes separators", "[config]") {
  ExperimentConfig cfg;
  cfg.source = "synth:identity";
  cfg.target = "synth:invert";
  cfg.train.seed = 3;
  resolve_experiment(cfg);
  CHECK(cfg.out == "runs/drcn-synth_identity-synth_invert-seed3");
}

TEST_CASE("data_dir resolves flag over environment over default", "[config]") {
  ExperimentConfig cfg;
  ::setenv("DRCN_DATA_DIR", "/env/data", 1);
  resolve_experiment(cfg);
  CHECK(cfg.data_dir == "/env/data");

  ExperimentConfig cfg2;
  cfg2.data_dir = "/flag/data";
  resolve_experiment(cfg2);
  CHECK(cfg2.data_dir == "/flag/data");

  ::unsetenv("DRCN_DATA_DIR");
  ExperimentConfig cfg3;
  resolve_experiment(cfg3);
  CHECK(cfg3.data_dir == "./data");
}

TEST_CASE("flavor helpers map names, decoders and pools", "[config]") {
  CHECK(flavor_from_string("convnet_src") == Flavor::convnet_src);
  CHECK_THROWS_AS(flavor_from_string("resnet"), ArgumentError);
  CHECK(std::string(to_string(Flavor::drcn_s)) == "drcn_s");
  CHECK(flavor_has_decoder(Flavor::drcn_st));
  CHECK_FALSE(flavor_has_decoder(Flavor::convnet_tgt));
  CHECK(pool_flavor(Flavor::drcn) == PoolFlavor::target_only);
  CHECK(pool_flavor(Flavor::drcn_s) == PoolFlavor::source_only);
  CHECK(pool_flavor(Flavor::drcn_st) == PoolFlavor::source_and_target);
  CHECK_THROWS_AS(pool_flavor(Flavor::convnet_src), ArgumentError);
}
