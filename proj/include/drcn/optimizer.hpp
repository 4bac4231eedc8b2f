#pragma once

#include <cmath>
#include <string>
#include <unordered_map>

#include "drcn/error.hpp"
#include "drcn/tensor.hpp"

namespace drcn {

struct RmspropConfig {
  double learning_rate = 1e-4;
  double decay = 0.9;  // accumulator smoothing rho
  double epsilon = 1e-8;

  void validate() const {
    if (!(learning_rate > 0)) throw ArgumentError("rmsprop learning_rate must be > 0");
    if (!(decay > 0 && decay < 1)) throw ArgumentError("rmsprop decay must lie in (0,1)");
    if (!(epsilon > 0)) throw ArgumentError("rmsprop epsilon must be > 0");
  }
};

// One optimizer instance per parameter set. The training loop keeps separate
// instances for the classification and reconstruction objectives so the two
// update paths never share accumulator state — with effective_scale 0 one
// objective then vanishes from the run entirely, bit for bit.
class Rmsprop {
 public:
  explicit Rmsprop(RmspropConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const RmspropConfig& config() const { return cfg_; }

  // In-place update: acc <- rho*acc + (1-rho)*g^2, then
  // param -= lr * effective_scale * g / (sqrt(acc) + eps).
  // The accumulator sees the raw gradient; the weight scales only the step.
  // effective_scale == 0 is a complete no-op (no accumulator decay either).
  void step(const std::string& name, Tensor& param, const Tensor& grad,
            double effective_scale) {
    if (effective_scale == 0.0) return;
    if (!param.same_shape(grad)) {
      throw DimensionError("rmsprop step on '" + name + "': gradient shape " +
                           shape_str(grad.shape()) + " does not match parameter " +
                           shape_str(param.shape()));
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
      if (!std::isfinite(grad[i])) {
        throw TrainingError("non-finite gradient in '" + name + "'");
      }
    }
    auto [it, fresh] = acc_.try_emplace(name, Tensor(param.shape()));
    Tensor& acc = it->second;
    if (!fresh && !acc.same_shape(param)) {
      throw DimensionError("rmsprop step on '" + name + "': parameter shape changed");
    }
    const double rho = cfg_.decay;
    const double lr_scaled = cfg_.learning_rate * effective_scale;
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double g = grad[i];
      acc[i] = rho * acc[i] + (1.0 - rho) * g * g;
      param[i] -= lr_scaled * g / (std::sqrt(acc[i]) + cfg_.epsilon);
    }
  }

  // Test/diagnostic access to a named accumulator; null when never stepped.
  const Tensor* accumulator(const std::string& name) const {
    auto it = acc_.find(name);
    return it == acc_.end() ? nullptr : &it->second;
  }

 private:
  RmspropConfig cfg_;
  std::unordered_map<std::string, Tensor> acc_;
};

}  // namespace drcn
