#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "drcn/checkpoint.hpp"
#include "drcn/config.hpp"
#include "drcn/data.hpp"
#include "drcn/train.hpp"

namespace drcn {

struct RunReport {
  double final_target_acc = 0.0;
  double final_source_val_acc = 0.0;
  std::size_t epochs = 0;
  std::string stop_reason;
  std::string note;  // divergence diagnostic, empty otherwise
  std::string config_hash;
  std::uint64_t seed = 0;
};

struct DomainData {
  Dataset train;
  Dataset test;
};

// ---------------------------------------------------------------------------
// Dataset resolution
// ---------------------------------------------------------------------------

// Synthetic names denote one concrete dataset: "synth:identity" is the base
// glyph distribution, "synth:invert" / "synth:rotate:30" / "synth:brighten:0.4"
// are its shifted versions. Because generation is driven by data_seed alone,
// resolving two names with the same sizes yields exactly paired records
// (the shifted image i is the shift of base image i).
inline SyntheticShiftSpec parse_synth_name(const std::string& name) {
  SyntheticShiftSpec spec;
  using Kind = SyntheticShiftSpec::Kind;
  if (name == "synth") {
    spec.kind = Kind::invert;
    return spec;
  }
  if (name.rfind("synth:", 0) != 0) {
    throw ArgumentError("not a synthetic dataset name: '" + name + "'");
  }
  std::string rest = name.substr(6);
  std::string kind = rest;
  std::string amount;
  const std::size_t colon = rest.find(':');
  if (colon != std::string::npos) {
    kind = rest.substr(0, colon);
    amount = rest.substr(colon + 1);
  }
  if (kind == "identity") spec.kind = Kind::identity;
  else if (kind == "invert") spec.kind = Kind::invert;
  else if (kind == "rotate") { spec.kind = Kind::rotate; spec.amount = 30.0; }
  else if (kind == "brighten") { spec.kind = Kind::brighten; spec.amount = 0.4; }
  else {
    throw ArgumentError("synthetic shift '" + kind +
                        "' is not one of identity|invert|rotate|brighten");
  }
  if (!amount.empty()) spec.amount = detail::parse_f64("synthetic amount", amount);
  return spec;
}

inline DomainData resolve_synthetic(const std::string& name, std::size_t n_train,
                                    std::size_t n_test, std::uint64_t data_seed) {
  const SyntheticShiftSpec spec = parse_synth_name(name);
  Rng master(data_seed);
  DomainData d;
  {
    Rng rng = master.substream("data.train");
    d.train = apply_domain_shift(make_synthetic_glyphs(rng, n_train, spec), spec);
  }
  {
    Rng rng = master.substream("data.test");
    d.test = apply_domain_shift(make_synthetic_glyphs(rng, n_test, spec), spec);
  }
  return d;
}

inline DomainData load_dataset_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  DomainData d;
  if (fs::exists(dir / "train-images-idx3-ubyte")) {
    d.train = load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", 10);
    fs::path ti = dir / "test-images-idx3-ubyte";
    fs::path tl = dir / "test-labels-idx1-ubyte";
    if (!fs::exists(ti)) {  // accept the original archive naming
      ti = dir / "t10k-images-idx3-ubyte";
      tl = dir / "t10k-labels-idx1-ubyte";
    }
    d.train.provenance = "idx:" + dir.string() + "/train";
    d.test = load_idx(ti, tl, 10);
    d.test.provenance = "idx:" + dir.string() + "/test";
    return d;
  }
  if (fs::exists(dir / "train.usps")) {
    d.train = load_usps(dir / "train.usps");
    d.test = load_usps(dir / "test.usps");
    return d;
  }
  throw IoError("dataset directory '" + dir.string() +
                "' contains neither IDX (train-images-idx3-ubyte) nor USPS (train.usps) files");
}

// name -> datasets. Known names live under data_dir; anything else is taken
// as a directory path. Synthetic names generate exactly the requested counts;
// file-backed splits are capped to the first n records (0 = keep all), which
// stays class-balanced when the files interleave classes.
inline DomainData resolve_dataset(const std::string& name, const std::string& data_dir,
                                  std::size_t n_train, std::size_t n_test,
                                  std::uint64_t data_seed) {
  if (is_synthetic_name(name)) {
    return resolve_synthetic(name, n_train, n_test, data_seed);
  }
  namespace fs = std::filesystem;
  const fs::path dir = (name == "mnist" || name == "usps")
                           ? fs::path(data_dir) / name
                           : fs::path(name);
  if (!fs::exists(dir)) {
    throw IoError("cannot resolve dataset '" + name + "': no directory at '" +
                  dir.string() + "'");
  }
  DomainData d = load_dataset_dir(dir);
  if (n_train > 0 && d.train.count() > n_train) d.train = take_first(d.train, n_train);
  if (n_test > 0 && d.test.count() > n_test) d.test = take_first(d.test, n_test);
  return d;
}

inline Dataset rescale_to(const Dataset& ds, std::size_t h, std::size_t w) {
  if (ds.images.dim(2) == h && ds.images.dim(3) == w) return ds;
  Dataset out = ds;
  out.images = rescale_bilinear(ds.images, h, w);
  out.provenance += " | rescaled " + std::to_string(h) + "x" + std::to_string(w);
  return out;
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

inline std::string trainlog_csv(const std::vector<EpochRecord>& log) {
  auto f = [](double v) { return std::isnan(v) ? std::string("nan") : detail::fmt_f64(v); };
  std::string s = "epoch,loss_c,loss_r,src_val_acc,tgt_acc,seconds\n";
  for (const EpochRecord& r : log) {
    s += std::to_string(r.epoch) + "," + f(r.loss_c) + "," + f(r.loss_r) + "," +
         f(r.src_val_acc) + "," + f(r.tgt_acc) + "," + f(r.seconds) + "\n";
  }
  return s;
}

// Tiles inputs (top rows) above their reconstructions (bottom rows) in one
// grayscale PGM. Every tile is min-max normalized on its own; zero-range
// tiles map to mid-gray 128. Gap pixels are black.
inline void dump_reconstruction_grid(const DrcnModel& model, const Tensor& images,
                                     const std::filesystem::path& path,
                                     std::size_t cols = 8, std::size_t gap = 2) {
  if (images.rank() != 4 || images.dim(1) != 1) {
    throw DimensionError("reconstruction grid expects [count, 1, h, w], got " +
                         shape_str(images.shape()));
  }
  const std::size_t n = images.dim(0);
  cols = std::min(cols, n);
  const std::size_t h = images.dim(2), w = images.dim(3);
  const std::size_t rows = (n + cols - 1) / cols;
  const Tensor recon = reconstruct_images(model, images);

  const std::size_t grid_rows = 2 * rows;
  const std::size_t out_h = grid_rows * h + (grid_rows - 1) * gap;
  const std::size_t out_w = cols * w + (cols - 1) * gap;
  std::vector<unsigned char> pix(out_h * out_w, 0);

  auto blit = [&](const Tensor& src, std::size_t index, std::size_t row, std::size_t col) {
    double lo = src(index, 0, 0, 0), hi = lo;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        lo = std::min(lo, src(index, 0, y, x));
        hi = std::max(hi, src(index, 0, y, x));
      }
    const std::size_t oy = row * (h + gap), ox = col * (w + gap);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        unsigned char b = 128;
        if (hi > lo) {
          const double v = (src(index, 0, y, x) - lo) / (hi - lo);
          b = static_cast<unsigned char>(std::lround(v * 255.0));
        }
        pix[(oy + y) * out_w + (ox + x)] = b;
      }
  };
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t row = i / cols, col = i % cols;
    blit(images, i, row, col);
    blit(recon, i, rows + row, col);
  }

  std::string bytes = "P5\n" + std::to_string(out_w) + " " + std::to_string(out_h) +
                      "\n255\n";
  bytes.append(reinterpret_cast<const char*>(pix.data()), pix.size());
  write_file_atomic(path, bytes);
}

inline std::string report_json(const RunReport& r) {
  nlohmann::json j;
  j["final_target_acc"] = r.final_target_acc;
  j["final_source_val_acc"] = r.final_source_val_acc;
  j["epochs"] = r.epochs;
  j["stop_reason"] = r.stop_reason;
  if (!r.note.empty()) j["note"] = r.note;
  j["config_hash"] = r.config_hash;
  j["seed"] = r.seed;
  return j.dump(2) + "\n";
}

// Every run directory must end up with exactly these artifacts.
inline void check_run_manifest(const std::filesystem::path& out, bool with_decoder) {
  namespace fs = std::filesystem;
  for (const char* f : {"config.txt", "trainlog.csv", "report.json", "checkpoint.drcn"}) {
    if (!fs::exists(out / f)) {
      throw IoError("run directory '" + out.string() + "' is missing " + f);
    }
  }
  if (with_decoder) {
    bool any_pgm = false;
    for (const auto& entry : fs::directory_iterator(out)) {
      if (entry.path().extension() == ".pgm") any_pgm = true;
    }
    if (!any_pgm) {
      throw IoError("run directory '" + out.string() +
                    "' is missing a reconstruction grid (.pgm)");
    }
  }
}

// ---------------------------------------------------------------------------
// Experiment driver
// ---------------------------------------------------------------------------

inline ArchitectureSpec experiment_arch(const ExperimentConfig& cfg, const Dataset& ref) {
  ArchitectureSpec arch;
  arch.in_channels = ref.images.dim(1);
  arch.in_height = ref.images.dim(2);
  arch.in_width = ref.images.dim(3);
  arch.classes = static_cast<std::size_t>(ref.classes);
  arch.conv_channels = cfg.conv_channels;
  arch.conv_kernels = cfg.conv_kernels;
  arch.fc_width = cfg.train.fc_width;
  arch.with_decoder = flavor_has_decoder(cfg.flavor);
  return arch;
}

// cfg must already be resolved (resolve_experiment). Trains the selected
// flavor, writes the run-directory artifacts, and returns the report. A
// mid-run divergence is reported with stop_reason "diverged" rather than
// thrown, with artifacts covering the completed epochs.
inline RunReport run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  cfg.validate();

  DomainData source = resolve_dataset(cfg.source, cfg.data_dir, cfg.n_source, cfg.n_test,
                                      cfg.data_seed);
  DomainData target = resolve_dataset(cfg.target, cfg.data_dir, cfg.n_target, cfg.n_test,
                                      cfg.data_seed);
  // the model takes the source geometry; the other domain is rescaled to it
  const std::size_t h = source.train.images.dim(2), w = source.train.images.dim(3);
  target.train = rescale_to(target.train, h, w);
  target.test = rescale_to(target.test, h, w);
  if (source.train.classes != target.train.classes) {
    throw ArgumentError("source has " + std::to_string(source.train.classes) +
                        " classes, target has " + std::to_string(target.train.classes));
  }

  const Dataset& labeled_train =
      (cfg.flavor == Flavor::convnet_tgt) ? target.train : source.train;

  ArchitectureSpec arch = experiment_arch(cfg, labeled_train);
  DrcnModel model = build_model(arch, Rng(cfg.train.seed));

  UnlabeledImages pool;
  const bool with_decoder = flavor_has_decoder(cfg.flavor);
  if (with_decoder) {
    pool = select_unsupervised_pool(cfg.train.pool, source.train,
                                    strip_labels(target.train));
  }

  const fs::path out(cfg.out);
  fs::create_directories(out);
  write_file_atomic(out / "config.txt", serialize_config(cfg));

  const std::size_t n_grid = std::min<std::size_t>(64, source.test.count());
  const Tensor grid_images = take_first(source.test, n_grid).images;

  std::vector<EpochRecord> log;  // accumulated here so a divergence keeps it
  TrainObservers obs;
  obs.after_epoch = [&](const DrcnModel& m, const EpochRecord& rec) {
    log.push_back(rec);
    if (with_decoder && cfg.dump_every > 0 && rec.epoch % cfg.dump_every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "recon_epoch%04zu.pgm", rec.epoch);
      dump_reconstruction_grid(m, grid_images, out / name);
    }
  };

  RunReport report;
  report.seed = cfg.train.seed;
  report.config_hash = config_hash(cfg);
  try {
    TrainResult res = train(model, labeled_train, with_decoder ? &pool : nullptr,
                            cfg.train, &target.test, &obs);
    report.stop_reason = res.stop_reason;
  } catch (const TrainingError& e) {
    report.stop_reason = "diverged";
    report.note = e.what();
  }
  report.epochs = log.size();

  save_checkpoint(model, out / "checkpoint.drcn");
  write_file_atomic(out / "trainlog.csv", trainlog_csv(log));

  // report accuracies are recomputed from the saved checkpoint, so they are
  // bitwise reproducible from the artifacts alone
  DrcnModel reloaded = load_checkpoint(out / "checkpoint.drcn");
  report.final_target_acc = evaluate(reloaded, target.test);
  const SourceSplit split = validation_split(labeled_train.count(), cfg.train.seed);
  report.final_source_val_acc = evaluate(reloaded, subset(labeled_train, split.val_idx));
  write_file_atomic(out / "report.json", report_json(report));

  if (with_decoder) {
    dump_reconstruction_grid(reloaded, grid_images, out / "recon_final.pgm");
  }
  check_run_manifest(out, with_decoder);
  return report;
}

}  // namespace drcn
