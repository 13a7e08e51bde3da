#include "cil/etf.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cil/errors.hpp"
#include "cil/rng.hpp"

namespace cil {

namespace {

// Two-pass modified Gram-Schmidt over the columns of a random d x K matrix.
// A column that collapses numerically is redrawn from the same stream, so
// the result stays a pure function of the seed.
Tensor random_orthonormal_columns(std::size_t d, std::size_t K, Rng& rng) {
  Tensor u = Tensor::zeros({d, K});
  std::vector<double> col(d);
  for (std::size_t k = 0; k < K; ++k) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 64) {
        throw NumericError("etf: failed to orthonormalize embedding column " +
                           std::to_string(k));
      }
      for (std::size_t i = 0; i < d; ++i) col[i] = rng.gaussian(0.0, 1.0);
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < k; ++j) {
          double dot = 0.0;
          for (std::size_t i = 0; i < d; ++i) dot += col[i] * u.at2(i, j);
          for (std::size_t i = 0; i < d; ++i) col[i] -= dot * u.at2(i, j);
        }
      }
      double norm = 0.0;
      for (std::size_t i = 0; i < d; ++i) norm += col[i] * col[i];
      norm = std::sqrt(norm);
      if (norm > 1e-10) {
        for (std::size_t i = 0; i < d; ++i) u.at2(i, k) = col[i] / norm;
        break;
      }
    }
  }
  return u;
}

void check_build_args(std::size_t K, std::size_t d, double E_W) {
  if (K < 2) {
    throw ContractError("etf: degenerate frame, K=" + std::to_string(K) +
                        " but at least 2 classes are required");
  }
  if (d < K) {
    throw CapacityError("etf: capacity exceeded, feature dim " +
                        std::to_string(d) + " < class count " +
                        std::to_string(K));
  }
  if (E_W <= 0.0) throw ContractError("etf: E_W must be positive");
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::size_t EtfClassifier::column_of(int class_id) const {
  auto it = class_map.find(class_id);
  if (it == class_map.end()) {
    throw LabelError("etf: class id " + std::to_string(class_id) +
                     " is not mapped");
  }
  return it->second;
}

int EtfClassifier::class_of_column(std::size_t col) const {
  for (const auto& [id, c] : class_map) {
    if (c == col) return id;
  }
  throw LabelError("etf: no class mapped to column " + std::to_string(col));
}

void EtfClassifier::assign_class_ids(const std::vector<int>& ids) {
  if (ids.size() != K) {
    throw ContractError("etf: " + std::to_string(ids.size()) +
                        " class ids for K=" + std::to_string(K));
  }
  std::set<int> unique(ids.begin(), ids.end());
  if (unique.size() != ids.size()) {
    throw ContractError("etf: duplicate class ids in assignment");
  }
  class_map.clear();
  for (std::size_t i = 0; i < ids.size(); ++i) class_map[ids[i]] = i;
}

EtfClassifier build_etf_with_embedding(std::size_t K, double E_W,
                                       const Tensor& U, std::uint64_t seed) {
  if (U.rank() != 2 || U.shape()[1] != K) {
    throw DimensionError("etf: embedding must be d x K, got " + U.shape_str());
  }
  const std::size_t d = U.shape()[0];
  check_build_args(K, d, E_W);

  EtfClassifier c;
  c.K = K;
  c.d = d;
  c.E_W = E_W;
  c.seed = seed;
  c.U = U;
  c.W = Tensor::zeros({d, K});
  const double scale =
      std::sqrt(E_W * static_cast<double>(K) / static_cast<double>(K - 1));
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < d; ++i) {
      // U (e_k - 1/K): column k of U minus the row mean of U
      double m = 0.0;
      for (std::size_t j = 0; j < K; ++j) m += U.at2(i, j);
      m /= static_cast<double>(K);
      c.W.at2(i, k) = scale * (U.at2(i, k) - m);
    }
  }
  for (std::size_t i = 0; i < K; ++i) c.class_map[static_cast<int>(i)] = i;
  return c;
}

EtfClassifier build_etf(std::size_t K, std::size_t d, double E_W,
                        std::uint64_t seed) {
  check_build_args(K, d, E_W);
  Rng rng(derive_seed(seed, 0xE7F));
  Tensor U = random_orthonormal_columns(d, K, rng);
  EtfClassifier c = build_etf_with_embedding(K, E_W, U, seed);
  return c;
}

EtfClassifier expand_etf(const EtfClassifier& old, std::size_t K_new,
                         const std::vector<int>& new_class_ids) {
  if (K_new <= old.K) {
    throw ContractError("etf: expansion needs K_new > K, got " +
                        std::to_string(K_new) + " <= " + std::to_string(old.K));
  }
  if (old.d < K_new) {
    throw CapacityError("etf: capacity exceeded, feature dim " +
                        std::to_string(old.d) + " < expanded class count " +
                        std::to_string(K_new));
  }
  const std::size_t n_new = K_new - old.K;
  std::vector<int> added = new_class_ids;
  if (added.empty()) {
    // next unused non-negative ids
    int candidate = 0;
    while (added.size() < n_new) {
      if (!old.has_class(candidate)) added.push_back(candidate);
      ++candidate;
    }
  }
  if (added.size() != n_new) {
    throw ContractError("etf: expansion adds " + std::to_string(n_new) +
                        " columns but got " + std::to_string(added.size()) +
                        " new class ids");
  }
  for (int id : added) {
    if (old.has_class(id)) {
      throw ContractError("etf: class id " + std::to_string(id) +
                          " already mapped");
    }
  }

  EtfClassifier fresh = build_etf(K_new, old.d, old.E_W, old.seed);
  fresh.class_map = old.class_map;
  std::size_t col = old.K;
  for (int id : added) fresh.class_map[id] = col++;
  return fresh;
}

double verify_etf(const EtfClassifier& c) {
  const double offdiag = -c.E_W / static_cast<double>(c.K - 1);
  double worst = 0.0;
  for (std::size_t i = 0; i < c.K; ++i) {
    for (std::size_t j = 0; j < c.K; ++j) {
      double g = 0.0;
      for (std::size_t r = 0; r < c.d; ++r) g += c.W.at2(r, i) * c.W.at2(r, j);
      const double target = i == j ? c.E_W : offdiag;
      worst = std::max(worst, std::abs(g - target));
    }
  }
  return worst;
}

int classify(const EtfClassifier& c, const Tensor& z) {
  if (z.rank() != 1 || z.size() != c.d) {
    throw DimensionError("etf: classify expects a length-" +
                         std::to_string(c.d) + " feature, got " +
                         z.shape_str());
  }
  // iterate in ascending class-id order so exact ties go to the lowest id
  bool first = true;
  double best = 0.0;
  int best_id = -1;
  for (const auto& [id, col] : c.class_map) {
    double s = 0.0;
    for (std::size_t r = 0; r < c.d; ++r) s += c.W.at2(r, col) * z.at(r);
    if (first || s > best) {
      best = s;
      best_id = id;
      first = false;
    }
  }
  return best_id;
}

std::vector<int> classify_batch(const EtfClassifier& c, const Tensor& Z) {
  if (Z.cols() != c.d) {
    throw DimensionError("etf: classify expects width " + std::to_string(c.d) +
                         ", got " + Z.shape_str());
  }
  std::vector<int> out(Z.rows());
  for (std::size_t i = 0; i < Z.rows(); ++i) {
    bool first = true;
    double best = 0.0;
    int best_id = -1;
    for (const auto& [id, col] : c.class_map) {
      double s = 0.0;
      for (std::size_t r = 0; r < c.d; ++r) s += c.W.at2(r, col) * Z.at2(i, r);
      if (first || s > best) {
        best = s;
        best_id = id;
        first = false;
      }
    }
    out[i] = best_id;
  }
  return out;
}

void save_etf(const EtfClassifier& c, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ParseError("etf: cannot open " + path + " for writing");
  f << c.K << " " << c.d << " " << format_double(c.E_W) << " " << c.seed
    << "\n";
  for (std::size_t r = 0; r < c.d; ++r) {
    for (std::size_t k = 0; k < c.K; ++k) {
      if (k) f << " ";
      f << format_double(c.W.at2(r, k));
    }
    f << "\n";
  }
}

EtfClassifier load_etf(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("etf: cannot open " + path);
  EtfClassifier c;
  if (!(f >> c.K >> c.d >> c.E_W >> c.seed)) {
    throw ParseError("etf: malformed header in " + path);
  }
  check_build_args(c.K, c.d, c.E_W);
  c.W = Tensor::zeros({c.d, c.K});
  for (std::size_t r = 0; r < c.d; ++r) {
    for (std::size_t k = 0; k < c.K; ++k) {
      if (!(f >> c.W.at2(r, k))) {
        throw ParseError("etf: truncated matrix in " + path + " at row " +
                         std::to_string(r));
      }
    }
  }
  for (std::size_t i = 0; i < c.K; ++i) c.class_map[static_cast<int>(i)] = i;
  return c;
}

}  // namespace cil
