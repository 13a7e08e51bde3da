#include "cil/optim.hpp"

#include <cmath>

#include "cil/errors.hpp"

namespace cil {

double global_grad_norm(const std::vector<Tensor>& params) {
  double total = 0.0;
  for (const Tensor& p : params) {
    const double* g = p.grad_data();
    if (!g) continue;
    for (std::size_t i = 0; i < p.size(); ++i) total += g[i] * g[i];
  }
  return std::sqrt(total);
}

void clip_global_grad_norm(std::vector<Tensor>& params, double max_norm) {
  if (max_norm <= 0.0) throw ContractError("clip: max_norm must be positive");
  const double norm = global_grad_norm(params);
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  for (Tensor& p : params) {
    if (!p.grad_data()) continue;
    double* g = p.ensure_grad();
    for (std::size_t i = 0; i < p.size(); ++i) g[i] *= scale;
  }
}

SgdMomentum::SgdMomentum(std::vector<Tensor> params, double lr, double momentum)
    : params_(std::move(params)), lr_(lr), momentum_(momentum) {
  if (lr <= 0.0) throw ContractError("sgd: learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw ContractError("sgd: momentum must lie in [0,1)");
  }
  velocity_.reserve(params_.size());
  for (const Tensor& p : params_) velocity_.emplace_back(p.size(), 0.0);
}

void SgdMomentum::set_lr(double lr) {
  if (lr <= 0.0) throw ContractError("sgd: learning rate must be positive");
  lr_ = lr;
}

void SgdMomentum::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.requires_grad()) continue;  // frozen: untouched
    const double* g = p.grad_data();
    if (!g) throw ContractError("sgd: step() with missing gradient");
    std::vector<double>& v = velocity_[i];
    double* pv = p.data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      v[j] = momentum_ * v[j] + g[j];
      pv[j] -= lr_ * v[j];
    }
  }
}

void SgdMomentum::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace cil
