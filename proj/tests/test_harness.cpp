#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "drcn/harness.hpp"

using namespace drcn;
namespace fs = std::filesystem;

namespace {

// Small, fast synthetic experiment shared by the harness tests.
ExperimentConfig tiny_experiment(const fs::path& out, Flavor flavor = Flavor::drcn,
                                 std::uint64_t seed = 1) {
  ExperimentConfig cfg;
  cfg.source = "synth:identity";
  cfg.target = "synth:invert";
  cfg.flavor = flavor;
  if (flavor == Flavor::convnet_tgt) cfg.source = cfg.target;
  cfg.out = out.string();
  cfg.n_source = 60;
  cfg.n_target = 60;
  cfg.n_test = 20;
  cfg.train.seed = seed;
  cfg.train.batch_source = 32;
  cfg.train.batch_target = 32;
  cfg.train.max_epochs = 2;
  resolve_experiment(cfg);
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("drcn_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("synthetic names parse into shift specs", "[harness]") {
  using Kind = SyntheticShiftSpec::Kind;
  CHECK(parse_synth_name("synth:identity").kind == Kind::identity);
  CHECK(parse_synth_name("synth").kind == Kind::invert);
  CHECK(parse_synth_name("synth:invert").kind == Kind::invert);

  const SyntheticShiftSpec rot = parse_synth_name("synth:rotate");
  CHECK(rot.kind == Kind::rotate);
  CHECK(rot.amount == 30.0);
  CHECK(parse_synth_name("synth:rotate:12.5").amount == 12.5);
  CHECK(parse_synth_name("synth:brighten").amount == 0.4);

  CHECK_THROWS_AS(parse_synth_name("synth:melt"), ArgumentError);
  CHECK_THROWS_AS(parse_synth_name("mnist"), ArgumentError);
}

TEST_CASE("synthetic resolution pairs domains record by record", "[harness]") {
  DomainData base = resolve_synthetic("synth:identity", 30, 10, 99);
  DomainData shifted = resolve_synthetic("synth:invert", 30, 10, 99);

  REQUIRE(base.test.count() == 10);
  REQUIRE(shifted.test.count() == 10);
  CHECK(base.test.labels == shifted.test.labels);
  for (std::size_t i = 0; i < base.test.images.size(); ++i) {
    CHECK(shifted.test.images[i] == 1.0 - base.test.images[i]);
  }
  // a different data seed draws different glyphs
  DomainData other = resolve_synthetic("synth:identity", 30, 10, 100);
  CHECK(max_abs_diff(other.test.images, base.test.images) > 0.0);
}

TEST_CASE("train log renders as CSV with nan for absent metrics", "[harness]") {
  EpochRecord r;
  r.epoch = 1;
  r.loss_c = 1.5;
  r.loss_r = 0.25;
  r.src_val_acc = 0.75;
  r.seconds = 0.5;  // tgt_acc left NaN
  const std::string csv = trainlog_csv({r});
  CHECK(csv.rfind("epoch,loss_c,loss_r,src_val_acc,tgt_acc,seconds\n", 0) == 0);
  CHECK(csv.find("1,1.5,0.25,0.75,nan,0.5\n") != std::string::npos);
}

TEST_CASE("reconstruction grid layout matches the documented arithmetic", "[harness]") {
  ArchitectureSpec a;  // 28x28 defaults, narrow for speed
  a.conv_channels = {2, 2, 2};
  a.fc_width = 4;
  DrcnModel m = build_model(a, Rng(5));

  const fs::path dir = fresh_dir("grid");
  Tensor one = Tensor::full({1, 1, 28, 28}, 0.7);
  dump_reconstruction_grid(m, one, dir / "g.pgm", 8, 2);

  const std::string bytes = read_file(dir / "g.pgm");
  const std::string header = "P5\n28 58\n255\n";  // 1x1 grid: 28 x (2*28 + gap)
  REQUIRE(bytes.rfind(header, 0) == 0);
  REQUIRE(bytes.size() == header.size() + 28 * 58);
  // constant input tile hits the zero-range guard: mid-gray everywhere
  for (std::size_t i = 0; i < 28 * 28; ++i) {
    REQUIRE(static_cast<unsigned char>(bytes[header.size() + i]) == 128);
  }
  fs::remove_all(dir);
}

TEST_CASE("run_experiment writes the full artifact manifest", "[harness]") {
  const fs::path dir = fresh_dir("run");
  ExperimentConfig cfg = tiny_experiment(dir / "exp");
  RunReport rep = run_experiment(cfg);

  CHECK(rep.epochs == 2);
  CHECK(rep.stop_reason == "max_epochs");
  CHECK(rep.config_hash.size() == 16);
  CHECK(rep.seed == 1);
  CHECK(rep.final_target_acc >= 0.0);
  CHECK(rep.final_target_acc <= 1.0);

  for (const char* f : {"config.txt", "trainlog.csv", "report.json", "checkpoint.drcn",
                        "recon_final.pgm"}) {
    INFO(f);
    CHECK(fs::exists(dir / "exp" / f));
  }
  CHECK_NOTHROW(check_run_manifest(dir / "exp", true));

  // the snapshot reparses into the identical resolved config
  ExperimentConfig back;
  apply_config_text(back, read_file(dir / "exp" / "config.txt"), "snapshot");
  resolve_experiment(back);
  CHECK(serialize_config(back) == serialize_config(cfg));

  // the JSON report round-trips and matches the returned struct
  const nlohmann::json j = nlohmann::json::parse(read_file(dir / "exp" / "report.json"));
  CHECK(j.at("final_target_acc").get<double>() == rep.final_target_acc);
  CHECK(j.at("stop_reason").get<std::string>() == "max_epochs");
  CHECK(j.at("config_hash").get<std::string>() == rep.config_hash);

  // CSV has one row per epoch plus the header
  const std::string csv = read_file(dir / "exp" / "trainlog.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  // report accuracies recompute bitwise from the checkpoint
  DrcnModel reloaded = load_checkpoint(dir / "exp" / "checkpoint.drcn");
  DomainData target = resolve_synthetic(cfg.target, cfg.n_target, cfg.n_test, cfg.data_seed);
  CHECK(evaluate(reloaded, target.test) == rep.final_target_acc);

  fs::remove_all(dir);
}

TEST_CASE("identical configs reproduce identical reports", "[harness]") {
  const fs::path dir = fresh_dir("repro");
  ExperimentConfig cfg = tiny_experiment(dir / "exp");
  RunReport r1 = run_experiment(cfg);
  RunReport r2 = run_experiment(cfg);  // same out dir, overwritten atomically
  CHECK(r1.config_hash == r2.config_hash);
  CHECK(r1.final_target_acc == r2.final_target_acc);
  CHECK(r1.final_source_val_acc == r2.final_source_val_acc);
  CHECK(r1.epochs == r2.epochs);
  fs::remove_all(dir);
}

TEST_CASE("convnet_tgt trains on the target domain without a decoder", "[harness]") {
  const fs::path dir = fresh_dir("tgt");
  ExperimentConfig cfg = tiny_experiment(dir / "exp", Flavor::convnet_tgt);
  CHECK(cfg.source == cfg.target);  // allowed for this baseline
  RunReport rep = run_experiment(cfg);
  CHECK(rep.epochs == 2);
  CHECK_FALSE(fs::exists(dir / "exp" / "recon_final.pgm"));
  CHECK_NOTHROW(check_run_manifest(dir / "exp", false));

  // no reconstruction pipeline: loss_r column is identically zero
  const std::string csv = read_file(dir / "exp" / "trainlog.csv");
  CHECK(csv.find(",0,") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("a lambda=1 run and convnet_src share final target accuracy", "[harness]") {
  const fs::path dir = fresh_dir("equiv");

  ExperimentConfig drcn_cfg = tiny_experiment(dir / "drcn", Flavor::drcn, 4);
  drcn_cfg.train.lambda = 1.0;
  RunReport a = run_experiment(drcn_cfg);

  ExperimentConfig conv_cfg = tiny_experiment(dir / "conv", Flavor::convnet_src, 4);
  RunReport b = run_experiment(conv_cfg);

  CHECK(a.final_target_acc == b.final_target_acc);
  CHECK(a.final_source_val_acc == b.final_source_val_acc);
  CHECK(a.config_hash != b.config_hash);  // different configs, same trajectory
  fs::remove_all(dir);
}

TEST_CASE("mid-run divergence is reported, not thrown", "[harness]") {
  const fs::path dir = fresh_dir("div");
  ExperimentConfig cfg = tiny_experiment(dir / "exp");
  cfg.train.alpha_r = 1e200;
  cfg.train.max_epochs = 4;
  RunReport rep = run_experiment(cfg);
  CHECK(rep.stop_reason == "diverged");
  CHECK_FALSE(rep.note.empty());
  CHECK(rep.epochs < 4);
  CHECK_NOTHROW(check_run_manifest(dir / "exp", true));
  const nlohmann::json j = nlohmann::json::parse(read_file(dir / "exp" / "report.json"));
  CHECK(j.at("stop_reason").get<std::string>() == "diverged");
  fs::remove_all(dir);
}

TEST_CASE("dataset resolution failures name the problem", "[harness]") {
  const fs::path dir = fresh_dir("data");
  CHECK_THROWS_MATCHES(resolve_dataset("mnist", (dir / "nowhere").string(), 10, 10, 1),
                       IoError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("mnist")));
  fs::create_directories(dir / "empty");
  CHECK_THROWS_MATCHES(resolve_dataset((dir / "empty").string(), ".", 10, 10, 1), IoError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("neither IDX") &&
                           Catch::Matchers::ContainsSubstring("USPS")));
  fs::remove_all(dir);
}

TEST_CASE("file-backed datasets load and rescale to the model geometry", "[harness]") {
  const fs::path dir = fresh_dir("idx");

  // write a miniature IDX dataset through the library's own writers
  Rng rng(2);
  SyntheticShiftSpec spec;
  spec.classes = 5;
  spec.image_size = 28;
  Dataset small = make_synthetic_glyphs(rng, 12, spec);
  small.classes = 10;  // pose as a digit set
  save_idx_images(small.images, dir / "train-images-idx3-ubyte");
  save_idx_labels(small.labels, dir / "train-labels-idx1-ubyte");
  save_idx_images(small.images, dir / "t10k-images-idx3-ubyte");
  save_idx_labels(small.labels, dir / "t10k-labels-idx1-ubyte");

  DomainData d = load_dataset_dir(dir);
  CHECK(d.train.count() == 12);
  CHECK(d.test.count() == 12);
  CHECK(d.train.classes == 10);

  Dataset scaled = rescale_to(d.train, 16, 16);
  CHECK(scaled.images.dim(2) == 16);
  Dataset same = rescale_to(d.train, 28, 28);
  CHECK(max_abs_diff(same.images, d.train.images) == 0.0);
  fs::remove_all(dir);
}
