#include "cil/ops.hpp"

#include <cmath>
#include <initializer_list>
#include <string>

#include "cil/errors.hpp"

namespace cil {

namespace {

constexpr double kNormEps = 1e-12;

bool want_grad(std::initializer_list<const Tensor*> inputs) {
  if (!GradTape::active().enabled()) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void check_finite(const Tensor& t, const char* op) {
  const double* p = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(p[i])) {
      throw NumericError(std::string(op) + ": non-finite output at index " +
                         std::to_string(i));
    }
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() +
                         " vs " + b.shape_str());
  }
}

// Shared body for elementwise binary ops with constant per-side weights.
Tensor axpy_like(const Tensor& a, const Tensor& b, double wa, double wb,
                 const char* op) {
  require_same_shape(a, b, op);
  std::vector<double> out(a.size());
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = wa * pa[i] + wb * pb[i];
  Tensor r(a.shape(), std::move(out));
  check_finite(r, op);
  if (want_grad({&a, &b})) {
    r.set_requires_grad(true);
    Tensor ca = a, cb = b, cr = r;
    GradTape::active().record([ca, cb, cr, wa, wb]() mutable {
      const double* g = cr.grad_data();
      if (!g) return;
      if (ca.requires_grad()) {
        double* ga = ca.ensure_grad();
        for (std::size_t i = 0; i < ca.size(); ++i) ga[i] += wa * g[i];
      }
      if (cb.requires_grad()) {
        double* gb = cb.ensure_grad();
        for (std::size_t i = 0; i < cb.size(); ++i) gb[i] += wb * g[i];
      }
    });
  }
  return r;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: incompatible shapes " + a.shape_str() +
                         " vs " + b.shape_str());
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n, 0.0);
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = pa[i * k + kk];
      const double* brow = pb + kk * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  Tensor r({m, n}, std::move(out));
  check_finite(r, "matmul");
  if (want_grad({&a, &b})) {
    r.set_requires_grad(true);
    Tensor ca = a, cb = b, cr = r;
    GradTape::active().record([ca, cb, cr, m, k, n]() mutable {
      const double* g = cr.grad_data();
      if (!g) return;
      if (ca.requires_grad()) {
        double* ga = ca.ensure_grad();
        const double* pb2 = cb.data();
        // dA += dC * B^T
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t kk = 0; kk < k; ++kk) {
            double s = 0.0;
            const double* grow = g + i * n;
            const double* brow = pb2 + kk * n;
            for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
            ga[i * k + kk] += s;
          }
        }
      }
      if (cb.requires_grad()) {
        double* gb = cb.ensure_grad();
        const double* pa2 = ca.data();
        // dB += A^T * dC
        for (std::size_t kk = 0; kk < k; ++kk) {
          for (std::size_t i = 0; i < m; ++i) {
            const double av = pa2[i * k + kk];
            const double* grow = g + i * n;
            double* gbrow = gb + kk * n;
            for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
          }
        }
      }
    });
  }
  return r;
}

Tensor add(const Tensor& a, const Tensor& b) { return axpy_like(a, b, 1.0, 1.0, "add"); }

Tensor sub(const Tensor& a, const Tensor& b) { return axpy_like(a, b, 1.0, -1.0, "sub"); }

Tensor add_rowvec(const Tensor& a, const Tensor& b) {
  if (b.rank() != 1 || a.cols() != b.size()) {
    throw DimensionError("add_rowvec: shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
  }
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(a.size());
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = pa[i * n + j] + pb[j];
  Tensor r(a.shape(), std::move(out));
  check_finite(r, "add_rowvec");
  if (want_grad({&a, &b})) {
    r.set_requires_grad(true);
    Tensor ca = a, cb = b, cr = r;
    GradTape::active().record([ca, cb, cr, m, n]() mutable {
      const double* g = cr.grad_data();
      if (!g) return;
      if (ca.requires_grad()) {
        double* ga = ca.ensure_grad();
        for (std::size_t i = 0; i < m * n; ++i) ga[i] += g[i];
      }
      if (cb.requires_grad()) {
        double* gb = cb.ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
      }
    });
  }
  return r;
}

Tensor scalar_mul(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  const double* pa = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * pa[i];
  Tensor r(a.shape(), std::move(out));
  check_finite(r, "scalar_mul");
  if (want_grad({&a})) {
    r.set_requires_grad(true);
    Tensor ca = a, cr = r;
    GradTape::active().record([ca, cr, c]() mutable {
      const double* g = cr.grad_data();
      if (!g) return;
      double* ga = ca.ensure_grad();
      for (std::size_t i = 0; i < ca.size(); ++i) ga[i] += c * g[i];
    });
  }
  return r;
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  const double* pa = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + c;
  Tensor r(a.shape(), std::move(out));
  check_finite(r, "add_scalar");
  if (want_grad({&a})) {
    r.set_requires_grad(true);
    Tensor ca = a, cr = r;
    GradTape::active().record([ca, cr]() mutable {
      const double* g = cr.grad_data();
      if (!g) return;
      double* ga = ca.ensure_grad();
      for (std::size_t i = 0; i < ca.size(); ++i) ga[i] += g[i];
    });
  }
  return r;
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.size());
  const double* pa = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] > 0.0 ? pa[i] : 0.0;
  Tensor r(a.shape(), std::move(out));
  check_finite(r, "relu");
  if (want_grad({&a})) {
    r.set_requires_grad(true);
    Tensor ca = a, cr = r;
    GradTape::active().record([ca, cr]() mutable {
      const double* g = cr.grad_data();
      if (!g) return;
      double* ga = ca.ensure_grad();
      const double* pa2 = ca.data();
      for (std::size_t i = 0; i < ca.size(); ++i)
        if (pa2[i] > 0.0) ga[i] += g[i];
    });
  }
  return r;
}

Tensor square(const Tensor& a) {
  std::vector<double> out(a.size());
  const double* pa = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * pa[i];
  Tensor r(a.shape(), std::move(out));
  check_finite(r, "square");
  if (want_grad({&a})) {
    r.set_requires_grad(true);
    Tensor ca = a, cr = r;
    GradTape::active().record([ca, cr]() mutable {
      const double* g = cr.grad_data();
      if (!g) return;
      double* ga = ca.ensure_grad();
      const double* pa2 = ca.data();
      for (std::size_t i = 0; i < ca.size(); ++i) ga[i] += 2.0 * pa2[i] * g[i];
    });
  }
  return r;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank() || a.rank() > 2 || a.rows() != b.rows()) {
    throw DimensionError("concat_cols: shape mismatch " + a.shape_str() +
                         " vs " + b.shape_str());
  }
  const std::size_t m = a.rows(), na = a.cols(), nb = b.cols();
  std::vector<double> out(m * (na + nb));
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < na; ++j) out[i * (na + nb) + j] = pa[i * na + j];
    for (std::size_t j = 0; j < nb; ++j)
      out[i * (na + nb) + na + j] = pb[i * nb + j];
  }
  std::vector<std::size_t> shape =
      a.rank() == 1 ? std::vector<std::size_t>{na + nb}
                    : std::vector<std::size_t>{m, na + nb};
  Tensor r(std::move(shape), std::move(out));
  check_finite(r, "concat_cols");
  if (want_grad({&a, &b})) {
    r.set_requires_grad(true);
    Tensor ca = a, cb = b, cr = r;
    GradTape::active().record([ca, cb, cr, m, na, nb]() mutable {
      const double* g = cr.grad_data();
      if (!g) return;
      if (ca.requires_grad()) {
        double* ga = ca.ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < na; ++j)
            ga[i * na + j] += g[i * (na + nb) + j];
      }
      if (cb.requires_grad()) {
        double* gb = cb.ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < nb; ++j)
            gb[i * nb + j] += g[i * (na + nb) + na + j];
      }
    });
  }
  return r;
}

Tensor l2_normalize_rows(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(a.size());
  std::vector<double> norms(m);
  const double* pa = a.data();
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += pa[i * n + j] * pa[i * n + j];
    norms[i] = std::sqrt(s + kNormEps);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = pa[i * n + j] / norms[i];
  }
  Tensor r(a.shape(), std::move(out));
  check_finite(r, "l2_normalize_rows");
  if (want_grad({&a})) {
    r.set_requires_grad(true);
    Tensor ca = a, cr = r;
    GradTape::active().record([ca, cr, norms, m, n]() mutable {
      const double* g = cr.grad_data();
      if (!g) return;
      double* ga = ca.ensure_grad();
      const double* y = cr.data();
      // dx = (dy - y (y.dy)) / norm, exact for the eps-guarded norm
      for (std::size_t i = 0; i < m; ++i) {
        double ydy = 0.0;
        for (std::size_t j = 0; j < n; ++j) ydy += y[i * n + j] * g[i * n + j];
        for (std::size_t j = 0; j < n; ++j)
          ga[i * n + j] += (g[i * n + j] - y[i * n + j] * ydy) / norms[i];
      }
    });
  }
  return r;
}

Tensor row_dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "row_dot");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m, 0.0);
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += pa[i * n + j] * pb[i * n + j];
    out[i] = s;
  }
  Tensor r({m}, std::move(out));
  check_finite(r, "row_dot");
  if (want_grad({&a, &b})) {
    r.set_requires_grad(true);
    Tensor ca = a, cb = b, cr = r;
    GradTape::active().record([ca, cb, cr, m, n]() mutable {
      const double* g = cr.grad_data();
      if (!g) return;
      if (ca.requires_grad()) {
        double* ga = ca.ensure_grad();
        const double* pb2 = cb.data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j)
            ga[i * n + j] += g[i] * pb2[i * n + j];
      }
      if (cb.requires_grad()) {
        double* gb = cb.ensure_grad();
        const double* pa2 = ca.data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j)
            gb[i * n + j] += g[i] * pa2[i * n + j];
      }
    });
  }
  return r;
}

Tensor gather_cols(const Tensor& a, const std::vector<std::size_t>& cols) {
  const std::size_t m = a.rows(), n = a.cols();
  if (cols.size() != m) {
    throw DimensionError("gather_cols: " + std::to_string(cols.size()) +
                         " indices for " + a.shape_str());
  }
  std::vector<double> out(m);
  const double* pa = a.data();
  for (std::size_t i = 0; i < m; ++i) {
    if (cols[i] >= n) {
      throw DimensionError("gather_cols: column " + std::to_string(cols[i]) +
                           " out of range for " + a.shape_str());
    }
    out[i] = pa[i * n + cols[i]];
  }
  Tensor r({m}, std::move(out));
  check_finite(r, "gather_cols");
  if (want_grad({&a})) {
    r.set_requires_grad(true);
    Tensor ca = a, cr = r;
    std::vector<std::size_t> idx = cols;
    GradTape::active().record([ca, cr, idx, m, n]() mutable {
      const double* g = cr.grad_data();
      if (!g) return;
      double* ga = ca.ensure_grad();
      for (std::size_t i = 0; i < m; ++i) ga[i * n + idx[i]] += g[i];
    });
  }
  return r;
}

Tensor clip_rows_to_norm(const Tensor& a, double max_norm) {
  if (max_norm <= 0.0) throw ContractError("clip_rows_to_norm: max_norm <= 0");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(a.size());
  std::vector<double> norms(m);
  std::vector<char> clipped(m, 0);
  const double* pa = a.data();
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += pa[i * n + j] * pa[i * n + j];
    norms[i] = std::sqrt(s);
    if (norms[i] > max_norm) {
      clipped[i] = 1;
      const double scale = max_norm / norms[i];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] = pa[i * n + j] * scale;
    } else {
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] = pa[i * n + j];
    }
  }
  Tensor r(a.shape(), std::move(out));
  check_finite(r, "clip_rows_to_norm");
  if (want_grad({&a})) {
    r.set_requires_grad(true);
    Tensor ca = a, cr = r;
    GradTape::active().record([ca, cr, norms, clipped, max_norm, m, n]() mutable {
      const double* g = cr.grad_data();
      if (!g) return;
      double* ga = ca.ensure_grad();
      const double* pa2 = ca.data();
      for (std::size_t i = 0; i < m; ++i) {
        if (!clipped[i]) {
          for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j];
          continue;
        }
        // y = max_norm * x/|x|: dx = (max_norm/|x|) (dy - xhat (xhat.dy))
        double xdg = 0.0;
        for (std::size_t j = 0; j < n; ++j) xdg += pa2[i * n + j] * g[i * n + j];
        const double inv = 1.0 / norms[i];
        for (std::size_t j = 0; j < n; ++j) {
          const double xh = pa2[i * n + j] * inv;
          ga[i * n + j] += max_norm * inv * (g[i * n + j] - xh * xdg * inv);
        }
      }
    });
  }
  return r;
}

Tensor mean_all(const Tensor& a) {
  double s = 0.0;
  const double* pa = a.data();
  for (std::size_t i = 0; i < a.size(); ++i) s += pa[i];
  Tensor r = Tensor::scalar(s / static_cast<double>(a.size()));
  check_finite(r, "mean_all");
  if (want_grad({&a})) {
    r.set_requires_grad(true);
    Tensor ca = a, cr = r;
    GradTape::active().record([ca, cr]() mutable {
      const double* g = cr.grad_data();
      if (!g) return;
      double* ga = ca.ensure_grad();
      const double w = g[0] / static_cast<double>(ca.size());
      for (std::size_t i = 0; i < ca.size(); ++i) ga[i] += w;
    });
  }
  return r;
}

Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<std::size_t>& labels) {
  const std::size_t m = logits.rows(), n = logits.cols();
  if (labels.size() != m) {
    throw DimensionError("softmax_cross_entropy: " +
                         std::to_string(labels.size()) + " labels for " +
                         logits.shape_str());
  }
  const double* pl = logits.data();
  std::vector<double> probs(m * n);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] >= n) {
      throw DimensionError("softmax_cross_entropy: label column " +
                           std::to_string(labels[i]) + " out of range");
    }
    double mx = pl[i * n];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, pl[i * n + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      probs[i * n + j] = std::exp(pl[i * n + j] - mx);
      z += probs[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) probs[i * n + j] /= z;
    // log-domain: finite even when the true-class probability underflows
    total += std::log(z) - (pl[i * n + labels[i]] - mx);
  }
  Tensor r = Tensor::scalar(total / static_cast<double>(m));
  check_finite(r, "softmax_cross_entropy");
  if (want_grad({&logits})) {
    r.set_requires_grad(true);
    Tensor cl = logits, cr = r;
    std::vector<std::size_t> idx = labels;
    GradTape::active().record([cl, cr, probs, idx, m, n]() mutable {
      const double* g = cr.grad_data();
      if (!g) return;
      double* gl = cl.ensure_grad();
      const double w = g[0] / static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double p = probs[i * n + j];
          gl[i * n + j] += w * (p - (idx[i] == j ? 1.0 : 0.0));
        }
      }
    });
  }
  return r;
}

Tensor detach(const Tensor& a) {
  return Tensor(a.shape(), std::vector<double>(a.data(), a.data() + a.size()));
}

}  // namespace cil
