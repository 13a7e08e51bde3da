#pragma once

#include <vector>

#include "cil/tensor.hpp"

namespace cil {

// Euclidean norm over every accumulated gradient in the list.
double global_grad_norm(const std::vector<Tensor>& params);
// Rescales all gradients so their global norm is at most max_norm.
void clip_global_grad_norm(std::vector<Tensor>& params, double max_norm);

// SGD with classical momentum: v <- momentum*v + g; p <- p - lr*v.
// Parameters whose requires_grad flag is off (frozen) are skipped entirely
// and stay bit-identical. A trainable parameter with no accumulated gradient
// at step() is a contract violation.
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Tensor> params, double lr, double momentum);

  void step();
  void zero_grad();

  void set_lr(double lr);
  double lr() const { return lr_; }
  double momentum() const { return momentum_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> velocity_;
  double lr_;
  double momentum_;
};

}  // namespace cil
