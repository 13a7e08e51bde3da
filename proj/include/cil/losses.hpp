#pragma once

#include <utility>
#include <vector>

#include "cil/etf.hpp"
#include "cil/tensor.hpp"

namespace cil {

enum class ConstraintMode { rescale, penalty };

struct LossConfig {
  double E_Z = 1.0;     // feature norm budget
  double lambda = 0.5;  // distillation weight
  ConstraintMode constraint = ConstraintMode::rescale;
};

// (1/(2 sqrt(E_W E_Z))) (w_k.z - sqrt(E_W E_Z))^2, differentiable in z.
Tensor dot_regression_loss(const Tensor& z, const Tensor& w_k, double E_W,
                           double E_Z);

// Batch mean of the per-sample loss against each sample's own prototype.
// The norm budget is enforced first: rescale mode pulls rows exceeding
// sqrt(E_Z) back onto the ball, penalty mode adds the mean squared excess
// of |z|^2 over E_Z instead.
Tensor dot_regression_total(const Tensor& Z, const std::vector<int>& labels,
                            const EtfClassifier& etf, const LossConfig& cfg);

// 0.5 (cos(mu_prev, mu_curr) - 1)^2 per row, averaged. mu_prev is detached:
// gradient reaches mu_curr only.
Tensor distill_pair_loss(const Tensor& mu_prev, const Tensor& mu_curr);

// Sum over consecutive expand-layer pairs; empty list gives 0.
Tensor distill_total(const std::vector<std::pair<Tensor, Tensor>>& pairs);

// dr + lambda * distill.
Tensor total_loss(const Tensor& dr, const Tensor& distill,
                  const LossConfig& cfg);

}  // namespace cil
