#pragma once

#include <cmath>
#include <string>

#include "drcn/error.hpp"
#include "drcn/tensor.hpp"

namespace drcn {

struct CrossEntropyResult {
  double value;       // mean negative log-likelihood over the batch
  Tensor logit_grad;  // gradient w.r.t. the logits feeding the softmax
};

// pred holds softmax rows; onehot holds one-hot label rows. Probabilities are
// clamped to [1e-12, 1] inside the log so a confidently wrong model yields a
// large finite loss instead of inf. The returned gradient is the combined
// softmax+NLL form (pred - onehot)/batch, which is exact and stable.
inline CrossEntropyResult cross_entropy(const Tensor& pred, const Tensor& onehot) {
  if (pred.rank() != 2 || !pred.same_shape(onehot)) {
    throw DimensionError("cross_entropy expects matching [batch, classes] tensors, got " +
                         shape_str(pred.shape()) + " and " + shape_str(onehot.shape()));
  }
  const std::size_t B = pred.dim(0), m = pred.dim(1);
  double total = 0;
  for (std::size_t b = 0; b < B; ++b) {
    std::size_t ones = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const double y = onehot(b, j);
      if (y != 0.0 && y != 1.0) {
        throw ArgumentError("cross_entropy: onehot row " + std::to_string(b) +
                            " contains a value that is neither 0 nor 1");
      }
      if (y == 1.0) {
        ++ones;
        double p = pred(b, j);
        if (p < 1e-12) p = 1e-12;
        if (p > 1.0) p = 1.0;
        total -= std::log(p);
      }
    }
    if (ones != 1) {
      throw ArgumentError("cross_entropy: onehot row " + std::to_string(b) + " has " +
                          std::to_string(ones) + " ones, expected exactly 1");
    }
  }
  CrossEntropyResult r{total / static_cast<double>(B), pred};
  const double inv_b = 1.0 / static_cast<double>(B);
  for (std::size_t i = 0; i < r.logit_grad.size(); ++i) {
    r.logit_grad[i] = (pred[i] - onehot[i]) * inv_b;
  }
  return r;
}

struct SquaredLossResult {
  double value;  // mean over the batch of per-sample squared error
  Tensor grad;   // 2*(recon - target)/batch
};

// recon and target are [batch, ...]; the loss is the batch mean of each
// sample's summed squared error.
inline SquaredLossResult squared_loss(const Tensor& recon, const Tensor& target) {
  if (recon.rank() < 1 || !recon.same_shape(target)) {
    throw DimensionError("squared_loss expects matching batched tensors, got " +
                         shape_str(recon.shape()) + " and " + shape_str(target.shape()));
  }
  const double inv_b = 1.0 / static_cast<double>(recon.dim(0));
  SquaredLossResult r{0.0, recon};
  double total = 0;
  for (std::size_t i = 0; i < recon.size(); ++i) {
    const double d = recon[i] - target[i];
    total += d * d;
    r.grad[i] = 2.0 * d * inv_b;
  }
  r.value = total * inv_b;
  return r;
}

// Convex combination of the two losses; diagnostic only — training applies
// the weights on the gradient steps, not here.
inline double joint_objective(double loss_c, double loss_r, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ArgumentError("joint_objective: lambda must lie in [0,1], got " +
                        std::to_string(lambda));
  }
  return lambda * loss_c + (1.0 - lambda) * loss_r;
}

}  // namespace drcn
