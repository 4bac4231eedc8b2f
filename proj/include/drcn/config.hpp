#pragma once

#include <array>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "drcn/error.hpp"
#include "drcn/random.hpp"
#include "drcn/train.hpp"

namespace drcn {

// Experiment-level model selector: the full model, its two reconstruction-pool
// ablations, and the two plain-classifier baselines.
enum class Flavor { drcn, drcn_s, drcn_st, convnet_src, convnet_tgt };

inline const char* to_string(Flavor f) {
  switch (f) {
    case Flavor::drcn: return "drcn";
    case Flavor::drcn_s: return "drcn_s";
    case Flavor::drcn_st: return "drcn_st";
    case Flavor::convnet_src: return "convnet_src";
    case Flavor::convnet_tgt: return "convnet_tgt";
  }
  throw ArgumentError("unknown flavor");
}

inline Flavor flavor_from_string(const std::string& s) {
  if (s == "drcn") return Flavor::drcn;
  if (s == "drcn_s") return Flavor::drcn_s;
  if (s == "drcn_st") return Flavor::drcn_st;
  if (s == "convnet_src") return Flavor::convnet_src;
  if (s == "convnet_tgt") return Flavor::convnet_tgt;
  throw ArgumentError("flavor '" + s +
                      "' is not one of drcn|drcn_s|drcn_st|convnet_src|convnet_tgt");
}

inline bool flavor_has_decoder(Flavor f) {
  return f == Flavor::drcn || f == Flavor::drcn_s || f == Flavor::drcn_st;
}

inline PoolFlavor pool_flavor(Flavor f) {
  switch (f) {
    case Flavor::drcn: return PoolFlavor::target_only;
    case Flavor::drcn_s: return PoolFlavor::source_only;
    case Flavor::drcn_st: return PoolFlavor::source_and_target;
    default:
      throw ArgumentError("flavor '" + std::string(to_string(f)) +
                          "' has no reconstruction pool");
  }
}

struct ExperimentConfig {
  std::string source = "mnist";
  std::string target = "usps";
  Flavor flavor = Flavor::drcn;
  std::string out;            // empty until resolved
  std::string data_dir;       // empty until resolved (flag > env > ./data)
  std::size_t dump_every = 0; // extra reconstruction grids every k epochs; 0 = final only
  std::uint64_t data_seed = 12345;  // synthetic data generation, fixed across model seeds
  std::size_t n_source = 2000;      // synthetic sizes; ignored for file-backed datasets
  std::size_t n_target = 2000;
  std::size_t n_test = 500;
  std::array<std::size_t, 3> conv_channels = {0, 0, 0};  // 0,0,0 = preset decides
  std::array<std::size_t, 3> conv_kernels = {0, 0, 0};
  bool fc_width_set = false;  // tracks whether fc_width came from the user
  TrainConfig train;

  void validate() const {
    if (source.empty() || target.empty()) {
      throw ArgumentError("source and target datasets must be named");
    }
    if (source == target && flavor != Flavor::convnet_tgt) {
      throw ArgumentError("source and target must differ unless flavor is convnet_tgt");
    }
    train.validate();
  }
};

inline bool is_synthetic_name(const std::string& name) {
  return name.rfind("synth", 0) == 0;
}

namespace detail {

inline double parse_f64(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0' || errno == ERANGE) {
    throw ArgumentError("config key '" + key + "' expects a real number, got '" +
                        value + "'");
  }
  return v;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  if (!value.empty() && value[0] == '-') {
    throw ArgumentError("config key '" + key + "' expects a non-negative integer, got '" +
                        value + "'");
  }
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0' || errno == ERANGE) {
    throw ArgumentError("config key '" + key + "' expects a non-negative integer, got '" +
                        value + "'");
  }
  return v;
}

inline std::size_t parse_usize(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(parse_u64(key, value));
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw ArgumentError("config key '" + key + "' expects a boolean (1|0|true|false), got '" +
                      value + "'");
}

inline std::array<std::size_t, 3> parse_triple(const std::string& key,
                                               const std::string& value) {
  std::array<std::size_t, 3> out{};
  std::size_t start = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t comma = value.find(',', start);
    const bool last = (i == 2);
    if (last != (comma == std::string::npos)) {
      throw ArgumentError("config key '" + key +
                          "' expects three comma-separated integers, got '" + value + "'");
    }
    out[static_cast<std::size_t>(i)] =
        parse_usize(key, value.substr(start, last ? std::string::npos : comma - start));
    start = comma + 1;
  }
  return out;
}

inline std::string fmt_f64(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

// Applies one key=value pair; unknown keys and type mismatches are errors,
// never silently ignored.
inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                               const std::string& value) {
  using namespace detail;
  if (key == "source") cfg.source = value;
  else if (key == "target") cfg.target = value;
  else if (key == "flavor") cfg.flavor = flavor_from_string(value);
  else if (key == "out") cfg.out = value;
  else if (key == "data_dir") cfg.data_dir = value;
  else if (key == "dump_every") cfg.dump_every = parse_usize(key, value);
  else if (key == "data_seed") cfg.data_seed = parse_u64(key, value);
  else if (key == "n_source") cfg.n_source = parse_usize(key, value);
  else if (key == "n_target") cfg.n_target = parse_usize(key, value);
  else if (key == "n_test") cfg.n_test = parse_usize(key, value);
  else if (key == "conv_channels") cfg.conv_channels = parse_triple(key, value);
  else if (key == "conv_kernels") cfg.conv_kernels = parse_triple(key, value);
  else if (key == "lambda") cfg.train.lambda = parse_f64(key, value);
  else if (key == "alpha_c") cfg.train.alpha_c = parse_f64(key, value);
  else if (key == "alpha_r") cfg.train.alpha_r = parse_f64(key, value);
  else if (key == "rms_decay") cfg.train.rms_decay = parse_f64(key, value);
  else if (key == "rms_epsilon") cfg.train.rms_epsilon = parse_f64(key, value);
  else if (key == "batch_source") cfg.train.batch_source = parse_usize(key, value);
  else if (key == "batch_target") cfg.train.batch_target = parse_usize(key, value);
  else if (key == "fc_width") { cfg.train.fc_width = parse_usize(key, value); cfg.fc_width_set = true; }
  else if (key == "dropout_keep") cfg.train.dropout_keep = parse_f64(key, value);
  else if (key == "max_epochs") cfg.train.max_epochs = parse_usize(key, value);
  else if (key == "seed") cfg.train.seed = parse_u64(key, value);
  else if (key == "stop_window") cfg.train.stopping.window = parse_usize(key, value);
  else if (key == "stop_tol") cfg.train.stopping.tol = parse_f64(key, value);
  else if (key == "noise_geometric") cfg.train.noise.geometric = parse_bool(key, value);
  else if (key == "noise_translate_px") cfg.train.noise.translate_px = static_cast<int>(parse_usize(key, value));
  else if (key == "noise_rotate_deg") cfg.train.noise.rotate_deg = parse_f64(key, value);
  else if (key == "noise_skew") cfg.train.noise.skew = parse_f64(key, value);
  else if (key == "noise_scale_min") cfg.train.noise.scale_min = parse_f64(key, value);
  else if (key == "noise_scale_max") cfg.train.noise.scale_max = parse_f64(key, value);
  else if (key == "noise_zero_mask") cfg.train.noise.zero_mask = parse_bool(key, value);
  else if (key == "noise_zero_mask_fraction") cfg.train.noise.zero_mask_fraction = parse_f64(key, value);
  else if (key == "noise_gaussian") cfg.train.noise.gaussian = parse_bool(key, value);
  else if (key == "noise_gaussian_std") cfg.train.noise.gaussian_std = parse_f64(key, value);
  else throw ArgumentError("unknown config key '" + key + "'");
}

// Flat key=value text, # starts a comment, blank lines ignored.
inline void apply_config_text(ExperimentConfig& cfg, const std::string& text,
                              const std::string& origin) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos
                                                                : nl - pos);
    pos = (nl == std::string::npos) ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ArgumentError(origin + ":" + std::to_string(line_no) +
                          ": expected key=value, got '" + line + "'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ArgumentError(origin + ":" + std::to_string(line_no) + ": empty key");
    }
    apply_config_entry(cfg, key, value);
  }
}

// "key=value" override strings (from CLI flags); these win over file content.
inline void apply_overrides(ExperimentConfig& cfg,
                            const std::vector<std::string>& overrides) {
  for (const auto& item : overrides) {
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ArgumentError("override '" + item + "' is not key=value");
    }
    apply_config_entry(cfg, detail::trim(item.substr(0, eq)),
                       detail::trim(item.substr(eq + 1)));
  }
}

// Fills preset-dependent defaults and derived fields, then validates. The
// result is fully concrete: serializing and re-parsing it is a fixed point.
inline void resolve_experiment(ExperimentConfig& cfg) {
  if (cfg.data_dir.empty()) {
    const char* env = std::getenv("DRCN_DATA_DIR");
    cfg.data_dir = (env != nullptr && *env != '\0') ? env : "./data";
  }
  const bool synth = is_synthetic_name(cfg.source);
  if (cfg.conv_channels == std::array<std::size_t, 3>{0, 0, 0}) {
    cfg.conv_channels = synth ? std::array<std::size_t, 3>{8, 12, 16}
                              : std::array<std::size_t, 3>{100, 150, 200};
  }
  if (cfg.conv_kernels == std::array<std::size_t, 3>{0, 0, 0}) {
    cfg.conv_kernels = synth ? std::array<std::size_t, 3>{5, 3, 3}
                             : std::array<std::size_t, 3>{5, 5, 3};
  }
  if (synth && !cfg.fc_width_set) cfg.train.fc_width = 48;
  cfg.fc_width_set = true;
  // The fc grid belongs to the standard digit stack; custom conv geometry
  // (toy and desk-scale nets) may pick any positive width.
  cfg.train.enforce_fc_grid =
      !synth && cfg.conv_channels == std::array<std::size_t, 3>{100, 150, 200};
  if (flavor_has_decoder(cfg.flavor)) cfg.train.pool = pool_flavor(cfg.flavor);
  if (cfg.out.empty()) {
    std::string tag = std::string(to_string(cfg.flavor)) + "-" + cfg.source + "-" +
                      cfg.target + "-seed" + std::to_string(cfg.train.seed);
    for (auto& ch : tag) {
      if (ch == ':' || ch == '/') ch = '_';
    }
    cfg.out = "runs/" + tag;
  }
  cfg.validate();
}

// Canonical resolved snapshot: sorted keys, one per line. Written to the run
// directory verbatim and hashed for RunReport.config_hash; re-parsing it
// reproduces the config exactly.
inline std::string serialize_config(const ExperimentConfig& cfg) {
  using detail::fmt_f64;
  auto triple = [](const std::array<std::size_t, 3>& t) {
    return std::to_string(t[0]) + "," + std::to_string(t[1]) + "," + std::to_string(t[2]);
  };
  std::string s;
  s += "alpha_c=" + fmt_f64(cfg.train.alpha_c) + "\n";
  s += "alpha_r=" + fmt_f64(cfg.train.alpha_r) + "\n";
  s += "batch_source=" + std::to_string(cfg.train.batch_source) + "\n";
  s += "batch_target=" + std::to_string(cfg.train.batch_target) + "\n";
  s += "conv_channels=" + triple(cfg.conv_channels) + "\n";
  s += "conv_kernels=" + triple(cfg.conv_kernels) + "\n";
  s += "data_dir=" + cfg.data_dir + "\n";
  s += "data_seed=" + std::to_string(cfg.data_seed) + "\n";
  s += "dropout_keep=" + fmt_f64(cfg.train.dropout_keep) + "\n";
  s += "dump_every=" + std::to_string(cfg.dump_every) + "\n";
  s += "fc_width=" + std::to_string(cfg.train.fc_width) + "\n";
  s += "flavor=" + std::string(to_string(cfg.flavor)) + "\n";
  s += "lambda=" + fmt_f64(cfg.train.lambda) + "\n";
  s += "max_epochs=" + std::to_string(cfg.train.max_epochs) + "\n";
  s += "n_source=" + std::to_string(cfg.n_source) + "\n";
  s += "n_target=" + std::to_string(cfg.n_target) + "\n";
  s += "n_test=" + std::to_string(cfg.n_test) + "\n";
  s += "noise_gaussian=" + std::string(cfg.train.noise.gaussian ? "1" : "0") + "\n";
  s += "noise_gaussian_std=" + fmt_f64(cfg.train.noise.gaussian_std) + "\n";
  s += "noise_geometric=" + std::string(cfg.train.noise.geometric ? "1" : "0") + "\n";
  s += "noise_rotate_deg=" + fmt_f64(cfg.train.noise.rotate_deg) + "\n";
  s += "noise_scale_max=" + fmt_f64(cfg.train.noise.scale_max) + "\n";
  s += "noise_scale_min=" + fmt_f64(cfg.train.noise.scale_min) + "\n";
  s += "noise_skew=" + fmt_f64(cfg.train.noise.skew) + "\n";
  s += "noise_translate_px=" + std::to_string(cfg.train.noise.translate_px) + "\n";
  s += "noise_zero_mask=" + std::string(cfg.train.noise.zero_mask ? "1" : "0") + "\n";
  s += "noise_zero_mask_fraction=" + fmt_f64(cfg.train.noise.zero_mask_fraction) + "\n";
  s += "out=" + cfg.out + "\n";
  s += "rms_decay=" + fmt_f64(cfg.train.rms_decay) + "\n";
  s += "rms_epsilon=" + fmt_f64(cfg.train.rms_epsilon) + "\n";
  s += "seed=" + std::to_string(cfg.train.seed) + "\n";
  s += "source=" + cfg.source + "\n";
  s += "stop_tol=" + fmt_f64(cfg.train.stopping.tol) + "\n";
  s += "stop_window=" + std::to_string(cfg.train.stopping.window) + "\n";
  s += "target=" + cfg.target + "\n";
  return s;
}

inline std::string config_hash(const ExperimentConfig& cfg) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(detail::fnv1a64(serialize_config(cfg))));
  return buf;
}

}  // namespace drcn
