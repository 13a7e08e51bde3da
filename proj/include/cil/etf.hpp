#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cil/tensor.hpp"

namespace cil {

// Simplex-vertex classifier: K equal-norm columns with identical pairwise
// inner products -E_W/(K-1), embedded in R^d through a column-orthonormal U.
// The weight matrix is fixed; it never takes gradients.
struct EtfClassifier {
  Tensor W;  // d x K
  Tensor U;  // d x K, U^T U = I_K (empty after file import)
  double E_W = 1.0;
  std::size_t K = 0;
  std::size_t d = 0;
  std::uint64_t seed = 0;
  std::map<int, std::size_t> class_map;  // class id -> column, onto 0..K-1

  std::size_t column_of(int class_id) const;  // LabelError when unmapped
  int class_of_column(std::size_t col) const;
  bool has_class(int class_id) const { return class_map.count(class_id) > 0; }

  // Rebinds columns to the given class ids, in order. Size must equal K.
  void assign_class_ids(const std::vector<int>& ids);
};

// Columns w_k = sqrt(E_W * K/(K-1)) * U (e_k - 1/K). The sqrt(K/(K-1))
// factor makes the diagonal of W^T W equal E_W exactly; U is the
// orthonormalization of a seeded random d x K matrix.
EtfClassifier build_etf(std::size_t K, std::size_t d, double E_W,
                        std::uint64_t seed);

// Same construction with a caller-supplied embedding (tests, fixtures).
EtfClassifier build_etf_with_embedding(std::size_t K, double E_W,
                                       const Tensor& U, std::uint64_t seed = 0);

// Fresh frame at K_new from the same seed; class ids already present keep
// their columns, new_class_ids (default: next unused integers) fill the rest.
EtfClassifier expand_etf(const EtfClassifier& old, std::size_t K_new,
                         const std::vector<int>& new_class_ids = {});

// Max absolute entrywise deviation of W^T W from the ideal Gram matrix.
double verify_etf(const EtfClassifier& c);

// argmax_k w_k.z mapped back to a class id; ties go to the lowest class id.
int classify(const EtfClassifier& c, const Tensor& z);
std::vector<int> classify_batch(const EtfClassifier& c, const Tensor& Z);

// Plain-text frame fixture: "K d E_W seed" header then d rows of K values.
void save_etf(const EtfClassifier& c, const std::string& path);
EtfClassifier load_etf(const std::string& path);

}  // namespace cil
