#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "drcn/augment.hpp"
#include "drcn/data.hpp"
#include "drcn/error.hpp"
#include "drcn/model.hpp"
#include "drcn/optimizer.hpp"
#include "drcn/random.hpp"

namespace drcn {

// Which images feed the reconstruction pipeline. target_only is the standard
// model; the other two are the ablation flavors.
enum class PoolFlavor { target_only, source_only, source_and_target };

inline const char* to_string(PoolFlavor f) {
  switch (f) {
    case PoolFlavor::target_only: return "target_only";
    case PoolFlavor::source_only: return "source_only";
    case PoolFlavor::source_and_target: return "source_and_target";
  }
  throw ArgumentError("unknown pool flavor");
}

struct StoppingRule {
  std::size_t window = 5;
  double tol = 0.01;

  void validate() const {
    if (window < 2) throw ArgumentError("stopping window must be >= 2");
    if (!(tol > 0)) throw ArgumentError("stopping tolerance must be > 0");
  }
};

// Stop once the last `window` reconstruction losses have stabilized:
// (max - min) / max < tol. Fewer records than the window -> keep going.
inline bool stopping_rule(const std::vector<double>& recon_losses,
                          std::size_t window, double tol) {
  StoppingRule{window, tol}.validate();
  if (recon_losses.size() < window) return false;
  const auto tail = recon_losses.end() - static_cast<std::ptrdiff_t>(window);
  const double hi = *std::max_element(tail, recon_losses.end());
  const double lo = *std::min_element(tail, recon_losses.end());
  if (hi == 0.0) return true;  // flat at zero is as stable as it gets
  return (hi - lo) / hi < tol;
}

struct TrainConfig {
  double lambda = 0.5;     // classification weight; reconstruction gets 1-lambda
  double alpha_c = 1e-4;   // rmsprop learning rate, classification pipeline
  double alpha_r = 1e-4;   // rmsprop learning rate, reconstruction pipeline
  double rms_decay = 0.9;
  double rms_epsilon = 1e-8;
  std::size_t batch_source = 128;
  std::size_t batch_target = 128;
  std::size_t fc_width = 300;
  bool enforce_fc_grid = true;  // presets with non-standard geometry opt out
  double dropout_keep = 0.5;
  NoiseConfig noise;
  StoppingRule stopping;
  std::size_t max_epochs = 100;
  std::uint64_t seed = 0;
  PoolFlavor pool = PoolFlavor::target_only;

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
      throw ArgumentError("lambda must lie in [0, 1]");
    }
    if (!(alpha_c > 0) || !(alpha_r > 0)) {
      throw ArgumentError("learning rates must be positive");
    }
    if (batch_source == 0 || batch_target == 0) {
      throw ArgumentError("batch sizes must be positive");
    }
    if (enforce_fc_grid &&
        (fc_width < 300 || fc_width > 1000 || fc_width % 50 != 0)) {
      throw ArgumentError("fc_width must be one of {300, 350, ..., 1000}");
    }
    if (!(dropout_keep > 0.0 && dropout_keep <= 1.0)) {
      throw ArgumentError("dropout_keep must lie in (0, 1]");
    }
    if (max_epochs == 0) throw ArgumentError("max_epochs must be positive");
    RmspropConfig{alpha_c, rms_decay, rms_epsilon}.validate();
    noise.validate();
    stopping.validate();
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss_c = 0.0;
  double loss_r = 0.0;    // 0.0 when the model has no decoder
  double src_val_acc = 0.0;
  double tgt_acc = std::numeric_limits<double>::quiet_NaN();  // NaN if no eval set
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  std::string stop_reason;  // "reconstruction_stabilized" | "max_epochs"
  std::size_t epochs = 0;
};

// Hooks fired inside train(); any of them may be empty.
struct TrainObservers {
  std::function<void(const DrcnModel&, std::size_t epoch)> after_source_loop;
  std::function<void(const DrcnModel&, std::size_t epoch)> after_target_loop;
  std::function<void(const DrcnModel&, const EpochRecord&)> after_epoch;
};

inline UnlabeledImages select_unsupervised_pool(PoolFlavor flavor,
                                                const Dataset& source,
                                                const UnlabeledImages& target) {
  UnlabeledImages pool;
  switch (flavor) {
    case PoolFlavor::target_only: pool = target; break;
    case PoolFlavor::source_only: pool = strip_labels(source); break;
    case PoolFlavor::source_and_target:
      pool = concat_images(strip_labels(source), target);
      break;
  }
  if (pool.count() == 0) throw ArgumentError("unsupervised pool is empty");
  return pool;
}

// Fraction of argmax predictions matching the labels; ties resolve to the
// lowest class index. Runs in evaluation mode (no dropout).
inline double evaluate(const DrcnModel& model, const Dataset& data) {
  data.validate();
  const std::size_t n = data.count();
  if (n == 0) throw ArgumentError("evaluate: empty dataset");
  const std::size_t chunk = 256;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t b = std::min(chunk, n - start);
    Tensor batch({b, data.images.dim(1), data.images.dim(2), data.images.dim(3)});
    const std::size_t px = data.images.size() / n;
    std::copy_n(data.images.data().begin() + static_cast<std::ptrdiff_t>(start * px),
                b * px, batch.data().begin());
    Tensor probs = predict_probs(model, batch);
    for (std::size_t i = 0; i < b; ++i) {
      std::size_t arg = 0;
      for (std::size_t j = 1; j < probs.dim(1); ++j) {
        if (probs(i, j) > probs(i, arg)) arg = j;  // strict: ties keep lowest
      }
      if (static_cast<int>(arg) == data.labels[start + i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

namespace detail {

inline Tensor gather_images(const Tensor& images, const std::vector<std::size_t>& order,
                            std::size_t begin, std::size_t count) {
  Tensor out({count, images.dim(1), images.dim(2), images.dim(3)});
  const std::size_t px = images.size() / images.dim(0);
  for (std::size_t i = 0; i < count; ++i) {
    std::copy_n(images.data().begin() +
                    static_cast<std::ptrdiff_t>(order[begin + i] * px),
                px, out.data().begin() + static_cast<std::ptrdiff_t>(i * px));
  }
  return out;
}

inline Tensor image_row(const Tensor& batch, std::size_t i) {
  Tensor out({batch.dim(1), batch.dim(2), batch.dim(3)});
  const std::size_t px = out.size();
  std::copy_n(batch.data().begin() + static_cast<std::ptrdiff_t>(i * px), px,
              out.data().begin());
  return out;
}

inline void set_image_row(Tensor& batch, std::size_t i, const Tensor& img) {
  const std::size_t px = img.size();
  std::copy_n(img.data().begin(), px,
              batch.data().begin() + static_cast<std::ptrdiff_t>(i * px));
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);
  return idx;
}

}  // namespace detail

// 90/10 train/validation split of the labeled source, derived from the seed's
// "split" substream. Exposed so reports can recompute validation accuracy
// from a checkpoint on exactly the held-out images train() used.
struct SourceSplit {
  std::vector<std::size_t> train_idx, val_idx;
};

inline SourceSplit validation_split(std::size_t n, std::uint64_t seed) {
  Rng rng = Rng(seed).substream("split");
  std::vector<std::size_t> order = detail::shuffled_indices(n, rng);
  const std::size_t n_val = std::max<std::size_t>(1, n / 10);
  if (n_val >= n) {
    throw ArgumentError("train: source set too small to hold out validation data");
  }
  SourceSplit split;
  split.train_idx.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  split.val_idx.assign(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  return split;
}

// Algorithm: per epoch, sweep all source batches updating {encoder, labeler}
// with step scale alpha_c * lambda, then sweep all pool batches updating
// {encoder, decoder} with step scale alpha_r * (1 - lambda). Decoder-less
// models train the classifier at full scale and skip the second sweep.
//
// Randomness is split into named substreams (split / shuffle.source /
// shuffle.target / augment / corrupt / dropout) so that the classification
// side consumes identical draws whether or not a reconstruction pipeline
// exists — the basis of the lambda-endpoint equivalence guarantees.
inline TrainResult train(DrcnModel& model, const Dataset& source,
                         const UnlabeledImages* recon_pool, const TrainConfig& cfg,
                         const Dataset* eval_target = nullptr,
                         const TrainObservers* observers = nullptr) {
  cfg.validate();
  source.validate();
  if (static_cast<std::size_t>(source.classes) != model.arch.classes) {
    throw ArgumentError("train: dataset has " + std::to_string(source.classes) +
                        " classes but the model expects " +
                        std::to_string(model.arch.classes));
  }
  if (model.has_decoder()) {
    if (recon_pool == nullptr) {
      throw ArgumentError("train: a decoder model needs a reconstruction pool");
    }
    if (recon_pool->images.rank() != 4 || recon_pool->count() == 0) {
      throw ArgumentError("train: reconstruction pool must be a non-empty image set");
    }
    if (recon_pool->images.dim(1) != model.arch.in_channels ||
        recon_pool->images.dim(2) != model.arch.in_height ||
        recon_pool->images.dim(3) != model.arch.in_width) {
      throw DimensionError("train: pool geometry " +
                           shape_str(recon_pool->images.shape()) +
                           " does not match the model input");
    }
  } else if (recon_pool != nullptr) {
    throw ArgumentError("train: reconstruction pool given but model has no decoder");
  }

  Rng master(cfg.seed);
  Rng rng_shuffle_src = master.substream("shuffle.source");
  Rng rng_shuffle_tgt = master.substream("shuffle.target");
  Rng rng_augment = master.substream("augment");
  Rng rng_corrupt = master.substream("corrupt");
  Rng rng_dropout = master.substream("dropout");

  const SourceSplit split = validation_split(source.count(), cfg.seed);
  const std::size_t n_train = split.train_idx.size();
  Dataset train_set = subset(source, split.train_idx);
  Dataset val_set = subset(source, split.val_idx);

  Rmsprop opt_c(RmspropConfig{cfg.alpha_c, cfg.rms_decay, cfg.rms_epsilon});
  Rmsprop opt_r(RmspropConfig{cfg.alpha_r, cfg.rms_decay, cfg.rms_epsilon});
  const double scale_c = model.has_decoder() ? cfg.lambda : 1.0;
  const double scale_r = 1.0 - cfg.lambda;

  auto cls_refs = param_refs(model, ParamSet::classification);
  auto rec_refs = model.has_decoder() ? param_refs(model, ParamSet::reconstruction)
                                      : std::vector<ParamRef>{};

  TrainResult result;
  std::vector<double> recon_history;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;

    // -- source sweep: classification pipeline ---------------------------
    try {
      std::vector<std::size_t> order =
          detail::shuffled_indices(n_train, rng_shuffle_src);
      double loss_sum = 0.0;
      for (std::size_t start = 0; start < n_train; start += cfg.batch_source) {
        const std::size_t b = std::min(cfg.batch_source, n_train - start);
        Tensor clean = detail::gather_images(train_set.images, order, start, b);
        Tensor noisy(clean.shape());
        Tensor onehot({b, model.arch.classes});
        for (std::size_t i = 0; i < b; ++i) {
          detail::set_image_row(
              noisy, i,
              augment_geometric(detail::image_row(clean, i), cfg.noise, rng_augment));
          onehot(i, static_cast<std::size_t>(train_set.labels[order[start + i]])) = 1.0;
        }
        ClassifyResult res = classify_loss_and_grads(model, noisy, onehot,
                                                     cfg.dropout_keep, rng_dropout);
        if (!std::isfinite(res.loss)) {
          throw TrainingError("non-finite classification loss");
        }
        loss_sum += res.loss * static_cast<double>(b);
        for (std::size_t i = 0; i < cls_refs.size(); ++i) {
          opt_c.step(cls_refs[i].name, *cls_refs[i].tensor, res.grads[i].second,
                     scale_c);
        }
      }
      rec.loss_c = loss_sum / static_cast<double>(n_train);
    } catch (const TrainingError& e) {
      throw TrainingError("epoch " + std::to_string(epoch) +
                          ", classification pipeline: " + e.what());
    }
    if (observers && observers->after_source_loop) {
      observers->after_source_loop(model, epoch);
    }

    // -- pool sweep: reconstruction pipeline -----------------------------
    if (model.has_decoder()) {
      try {
        const std::size_t n_pool = recon_pool->count();
        std::vector<std::size_t> order =
            detail::shuffled_indices(n_pool, rng_shuffle_tgt);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n_pool; start += cfg.batch_target) {
          const std::size_t b = std::min(cfg.batch_target, n_pool - start);
          Tensor clean = detail::gather_images(recon_pool->images, order, start, b);
          Tensor noisy(clean.shape());
          for (std::size_t i = 0; i < b; ++i) {
            detail::set_image_row(
                noisy, i,
                corrupt_for_denoising(detail::image_row(clean, i), cfg.noise,
                                      rng_corrupt));
          }
          ReconstructResult res = reconstruct_loss_and_grads(model, noisy, clean);
          if (!std::isfinite(res.loss)) {
            throw TrainingError("non-finite reconstruction loss");
          }
          loss_sum += res.loss * static_cast<double>(b);
          for (std::size_t i = 0; i < rec_refs.size(); ++i) {
            opt_r.step(rec_refs[i].name, *rec_refs[i].tensor, res.grads[i].second,
                       scale_r);
          }
        }
        rec.loss_r = loss_sum / static_cast<double>(n_pool);
      } catch (const TrainingError& e) {
        throw TrainingError("epoch " + std::to_string(epoch) +
                            ", reconstruction pipeline: " + e.what());
      }
      if (observers && observers->after_target_loop) {
        observers->after_target_loop(model, epoch);
      }
    }

    rec.src_val_acc = evaluate(model, val_set);
    if (eval_target != nullptr) rec.tgt_acc = evaluate(model, *eval_target);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                      .count();

    result.log.push_back(rec);
    if (observers && observers->after_epoch) observers->after_epoch(model, rec);

    if (model.has_decoder()) {
      recon_history.push_back(rec.loss_r);
      if (stopping_rule(recon_history, cfg.stopping.window, cfg.stopping.tol)) {
        result.stop_reason = "reconstruction_stabilized";
        break;
      }
    }
  }
  if (result.stop_reason.empty()) result.stop_reason = "max_epochs";
  result.epochs = result.log.size();
  return result;
}

}  // namespace drcn
