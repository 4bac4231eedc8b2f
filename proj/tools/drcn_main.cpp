// Experiment CLI: train / reconstruct / eval.
// Exit codes: 0 success, 1 configuration error, 2 runtime divergence.

#include <algorithm>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drcn/harness.hpp"

namespace {

using namespace drcn;

std::string resolve_data_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  const char* env = std::getenv("DRCN_DATA_DIR");
  return (env != nullptr && *env != '\0') ? env : "./data";
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    out.push_back(s.substr(start, comma == std::string::npos ? std::string::npos
                                                             : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void print_report(const std::string& out, const RunReport& r) {
  std::printf("run %s: tgt_acc=%.4f src_val_acc=%.4f epochs=%zu stop=%s hash=%s\n",
              out.c_str(), r.final_target_acc, r.final_source_val_acc, r.epochs,
              r.stop_reason.c_str(), r.config_hash.c_str());
  if (!r.note.empty()) std::printf("  note: %s\n", r.note.c_str());
}

struct TrainArgs {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> flag_entries;  // in given order
  std::vector<std::string> overrides;
  std::size_t repeat = 1;
  std::string sweep_lambda;
  std::string sweep_fc;
};

ExperimentConfig assemble_config(const TrainArgs& args) {
  ExperimentConfig cfg;
  if (!args.config_path.empty()) {
    apply_config_text(cfg, read_file(args.config_path), args.config_path);
  }
  for (const auto& [key, value] : args.flag_entries) apply_config_entry(cfg, key, value);
  apply_overrides(cfg, args.overrides);
  return cfg;
}

int cmd_train(const TrainArgs& args) {
  const ExperimentConfig base = assemble_config(args);
  const bool sweeping = !args.sweep_lambda.empty() || !args.sweep_fc.empty();
  if (sweeping && args.repeat != 1) {
    throw ArgumentError("--repeat cannot be combined with a sweep");
  }

  if (sweeping) {
    const std::vector<std::string> lambdas =
        args.sweep_lambda.empty() ? std::vector<std::string>{} : split_list(args.sweep_lambda);
    const std::vector<std::string> widths =
        args.sweep_fc.empty() ? std::vector<std::string>{} : split_list(args.sweep_fc);
    std::optional<RunReport> best;
    std::string best_desc;
    bool any_ok = false;
    auto run_one = [&](const std::string& lam, const std::string& fc) {
      ExperimentConfig cfg = base;
      std::string tag = "sweep";
      if (!lam.empty()) {
        apply_config_entry(cfg, "lambda", lam);
        tag += "_lam" + lam;
      }
      if (!fc.empty()) {
        apply_config_entry(cfg, "fc_width", fc);
        tag += "_fc" + fc;
      }
      if (!cfg.out.empty()) cfg.out += "/" + tag;
      resolve_experiment(cfg);
      if (cfg.out.find(tag) == std::string::npos) cfg.out += "-" + tag;
      RunReport rep = run_experiment(cfg);
      print_report(cfg.out, rep);
      if (rep.stop_reason != "diverged") {
        any_ok = true;
        if (!best || rep.final_source_val_acc > best->final_source_val_acc) {
          best = rep;
          best_desc = tag;
        }
      }
    };
    if (lambdas.empty()) {
      for (const auto& fc : widths) run_one("", fc);
    } else if (widths.empty()) {
      for (const auto& lam : lambdas) run_one(lam, "");
    } else {
      for (const auto& lam : lambdas)
        for (const auto& fc : widths) run_one(lam, fc);
    }
    if (!any_ok) return 2;
    // selection by source validation accuracy
    std::printf("selected %s: src_val_acc=%.4f tgt_acc=%.4f\n", best_desc.c_str(),
                best->final_source_val_acc, best->final_target_acc);
    return 0;
  }

  bool any_diverged = false;
  std::vector<double> accs;
  for (std::size_t i = 0; i < args.repeat; ++i) {
    ExperimentConfig cfg = base;
    cfg.train.seed = base.train.seed + i;
    if (args.repeat > 1 && !cfg.out.empty()) {
      cfg.out += "/seed" + std::to_string(cfg.train.seed);
    }
    resolve_experiment(cfg);
    RunReport rep = run_experiment(cfg);
    print_report(cfg.out, rep);
    accs.push_back(rep.final_target_acc);
    any_diverged = any_diverged || rep.stop_reason == "diverged";
  }
  if (args.repeat > 1) {
    std::printf("median tgt_acc over %zu runs: %.4f\n", args.repeat, median(accs));
  }
  return any_diverged ? 2 : 0;
}

// synthetic names need generation counts; file-backed sets are used in full
DomainData resolve_full(const std::string& name, const std::string& data_dir_flag) {
  const bool synth = is_synthetic_name(name);
  return resolve_dataset(name, resolve_data_dir(data_dir_flag), synth ? 2000 : 0,
                         synth ? 500 : 0, 12345);
}

int cmd_reconstruct(const std::string& ckpt, const std::string& images,
                    const std::string& out, std::size_t count, std::size_t cols,
                    const std::string& data_dir_flag) {
  DrcnModel model = load_checkpoint(ckpt);
  if (!model.has_decoder()) {
    throw ArgumentError("checkpoint '" + ckpt + "' has no reconstruction pipeline");
  }
  DomainData d = resolve_full(images, data_dir_flag);
  Dataset test = rescale_to(d.test, model.arch.in_height, model.arch.in_width);
  const Tensor batch = take_first(test, std::min(count, test.count())).images;
  dump_reconstruction_grid(model, batch, out, cols);
  std::printf("wrote %s (%zu images)\n", out.c_str(), batch.dim(0));
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data,
             const std::string& data_dir_flag) {
  DrcnModel model = load_checkpoint(ckpt);
  DomainData d = resolve_full(data, data_dir_flag);
  Dataset test = rescale_to(d.test, model.arch.in_height, model.arch.in_width);
  std::printf("accuracy %.17g\n", evaluate(model, test));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deep reconstruction-classification network experiments"};
  app.require_subcommand(1);

  TrainArgs targs;
  std::string flag_lambda, flag_seed, flag_flavor, flag_source, flag_target, flag_out;
  std::string flag_data_dir;
  auto* t = app.add_subcommand("train", "train a model and write run artifacts");
  t->add_option("--config", targs.config_path, "key=value config file")
      ->check(CLI::ExistingFile);
  t->add_option("--lambda", flag_lambda, "classification/reconstruction trade-off");
  t->add_option("--seed", flag_seed, "training seed");
  t->add_option("--flavor", flag_flavor, "drcn|drcn_s|drcn_st|convnet_src|convnet_tgt");
  t->add_option("--source", flag_source, "source dataset name or path");
  t->add_option("--target", flag_target, "target dataset name or path");
  t->add_option("--out", flag_out, "output directory");
  t->add_option("--data-dir", flag_data_dir, "dataset root");
  t->add_option("--repeat", targs.repeat, "run k times with consecutive seeds");
  t->add_option("--sweep-lambda", targs.sweep_lambda, "comma list of lambdas to sweep");
  t->add_option("--sweep-fc", targs.sweep_fc, "comma list of fc widths to sweep");
  t->add_option("overrides", targs.overrides, "additional key=value overrides");

  std::string r_ckpt, r_images, r_out, r_data_dir;
  std::size_t r_count = 32, r_cols = 8;
  auto* r = app.add_subcommand("reconstruct", "render a reconstruction grid");
  r->add_option("--checkpoint", r_ckpt, "model checkpoint")->required();
  r->add_option("--images", r_images, "dataset name or path")->required();
  r->add_option("--out", r_out, "output .pgm file")->required();
  r->add_option("--count", r_count, "number of images to tile");
  r->add_option("--cols", r_cols, "grid columns");
  r->add_option("--data-dir", r_data_dir, "dataset root");

  std::string e_ckpt, e_data, e_data_dir;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint on a labeled test split");
  e->add_option("--checkpoint", e_ckpt, "model checkpoint")->required();
  e->add_option("--data", e_data, "dataset name or path")->required();
  e->add_option("--data-dir", e_data_dir, "dataset root");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (t->parsed()) {
      if (t->count("--lambda") > 0) targs.flag_entries.emplace_back("lambda", flag_lambda);
      if (t->count("--seed") > 0) targs.flag_entries.emplace_back("seed", flag_seed);
      if (t->count("--flavor") > 0) targs.flag_entries.emplace_back("flavor", flag_flavor);
      if (t->count("--source") > 0) targs.flag_entries.emplace_back("source", flag_source);
      if (t->count("--target") > 0) targs.flag_entries.emplace_back("target", flag_target);
      if (t->count("--out") > 0) targs.flag_entries.emplace_back("out", flag_out);
      if (t->count("--data-dir") > 0) {
        targs.flag_entries.emplace_back("data_dir", flag_data_dir);
      }
      return cmd_train(targs);
    }
    if (r->parsed()) {
      return cmd_reconstruct(r_ckpt, r_images, r_out, r_count, r_cols, r_data_dir);
    }
    return cmd_eval(e_ckpt, e_data, e_data_dir);
  } catch (const TrainingError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 2;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
}
