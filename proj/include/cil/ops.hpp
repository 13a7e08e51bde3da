#pragma once

#include <cstddef>
#include <vector>

#include "cil/tensor.hpp"

namespace cil {

// Differentiable primitives. Every op validates shapes (DimensionError with
// both shapes in the message), checks outputs for non-finite values
// (NumericError), and records itself on the active tape when any input
// requires grad.

Tensor matmul(const Tensor& a, const Tensor& b);       // [m,k]x[k,n] -> [m,n]
Tensor add(const Tensor& a, const Tensor& b);          // same shape
Tensor sub(const Tensor& a, const Tensor& b);
Tensor add_rowvec(const Tensor& a, const Tensor& b);   // [m,n] + [n] per row
Tensor scalar_mul(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor square(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);  // along feature axis
// Row-wise x / sqrt(|x|^2 + 1e-12); the epsilon guards zero-norm rows.
Tensor l2_normalize_rows(const Tensor& a);
// Per-row inner product: [m,n],[m,n] -> [m]. Rank-1 inputs give a scalar.
Tensor row_dot(const Tensor& a, const Tensor& b);
// Pick one entry per row: out[i] = a[i, cols[i]].
Tensor gather_cols(const Tensor& a, const std::vector<std::size_t>& cols);
// Rows with norm > max_norm are rescaled onto the ball; others pass through.
Tensor clip_rows_to_norm(const Tensor& a, double max_norm);
Tensor mean_all(const Tensor& a);
// Mean softmax cross-entropy over rows; labels are column indices.
Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<std::size_t>& labels);
// Same values, cut off from the tape.
Tensor detach(const Tensor& a);

}  // namespace cil
