#include "cil/losses.hpp"

#include <cmath>
#include <string>

#include "cil/errors.hpp"
#include "cil/ops.hpp"

namespace cil {

namespace {
void check_budgets(double E_W, double E_Z) {
  if (E_W <= 0.0 || E_Z <= 0.0) {
    throw ContractError("loss: norm budgets must be positive, E_W=" +
                        std::to_string(E_W) + " E_Z=" + std::to_string(E_Z));
  }
}
}  // namespace

Tensor dot_regression_loss(const Tensor& z, const Tensor& w_k, double E_W,
                           double E_Z) {
  check_budgets(E_W, E_Z);
  if (z.shape() != w_k.shape()) {
    throw DimensionError("loss: feature " + z.shape_str() +
                         " vs prototype " + w_k.shape_str());
  }
  const double target = std::sqrt(E_W * E_Z);
  Tensor gap = add_scalar(row_dot(z, w_k), -target);
  return scalar_mul(mean_all(square(gap)), 1.0 / (2.0 * target));
}

Tensor dot_regression_total(const Tensor& Z, const std::vector<int>& labels,
                            const EtfClassifier& etf, const LossConfig& cfg) {
  check_budgets(etf.E_W, cfg.E_Z);
  if (Z.rows() != labels.size()) {
    throw DimensionError("loss: " + std::to_string(labels.size()) +
                         " labels for " + Z.shape_str());
  }
  if (Z.cols() != etf.d) {
    throw DimensionError("loss: feature width " + std::to_string(Z.cols()) +
                         " vs classifier dim " + std::to_string(etf.d));
  }
  std::vector<std::size_t> cols(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    cols[i] = etf.column_of(labels[i]);  // LabelError when unmapped
  }

  Tensor feats = Z;
  if (cfg.constraint == ConstraintMode::rescale) {
    feats = clip_rows_to_norm(Z, std::sqrt(cfg.E_Z));
  }
  const double target = std::sqrt(etf.E_W * cfg.E_Z);
  Tensor picked = gather_cols(matmul(feats, etf.W), cols);
  Tensor loss = scalar_mul(mean_all(square(add_scalar(picked, -target))),
                           1.0 / (2.0 * target));
  if (cfg.constraint == ConstraintMode::penalty) {
    Tensor excess = relu(add_scalar(row_dot(Z, Z), -cfg.E_Z));
    loss = add(loss, mean_all(square(excess)));
  }
  return loss;
}

Tensor distill_pair_loss(const Tensor& mu_prev, const Tensor& mu_curr) {
  if (mu_prev.shape() != mu_curr.shape()) {
    throw DimensionError("distill: shape mismatch " + mu_prev.shape_str() +
                         " vs " + mu_curr.shape_str());
  }
  Tensor prev_hat = l2_normalize_rows(detach(mu_prev));
  Tensor curr_hat = l2_normalize_rows(mu_curr);
  Tensor gap = add_scalar(row_dot(prev_hat, curr_hat), -1.0);
  return scalar_mul(mean_all(square(gap)), 0.5);
}

Tensor distill_total(const std::vector<std::pair<Tensor, Tensor>>& pairs) {
  if (pairs.empty()) return Tensor::scalar(0.0);
  Tensor total = distill_pair_loss(pairs[0].first, pairs[0].second);
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    total = add(total, distill_pair_loss(pairs[i].first, pairs[i].second));
  }
  return total;
}

Tensor total_loss(const Tensor& dr, const Tensor& distill,
                  const LossConfig& cfg) {
  if (cfg.lambda < 0.0) throw ContractError("loss: lambda must be >= 0");
  return add(dr, scalar_mul(distill, cfg.lambda));
}

}  // namespace cil
