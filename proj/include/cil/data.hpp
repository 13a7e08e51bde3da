#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cil/tensor.hpp"

namespace cil {

// Labeled feature table with a train/test tag per row. Labels are dense
// 0..C-1; gapped inputs are relabeled on load and the mapping is kept in
// the provenance string.
struct Dataset {
  Tensor features;  // n x p
  std::vector<int> labels;
  std::vector<std::uint8_t> is_train;
  std::size_t num_classes = 0;
  std::string provenance;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  std::vector<std::size_t> train_indices() const;
  std::vector<std::size_t> test_indices() const;
  // Rows of the given split whose label is in `classes` (all when empty).
  std::vector<std::size_t> indices_of(const std::vector<int>& classes,
                                      bool train) const;
  Tensor gather_features(const std::vector<std::size_t>& rows) const;
  std::vector<int> gather_labels(const std::vector<std::size_t>& rows) const;
  void validate() const;
};

// Isotropic Gaussian blobs: class means drawn on a seeded sphere of radius
// `separation`, per-class deterministic 80/20 train/test split.
Dataset make_blobs(std::size_t classes, std::size_t per_class, std::size_t dim,
                   double separation, double noise, std::uint64_t seed);

struct DelimitedFormat {
  char delimiter = ',';
};

// Header `label,f0,...,f{p-1}[,split]`; a missing split column is filled by a
// deterministic seeded 80/20 per-class split.
Dataset load_delimited(const std::string& path,
                       const DelimitedFormat& format = {},
                       std::uint64_t split_seed = 1);
void save_delimited(const Dataset& ds, const std::string& path,
                    const DelimitedFormat& format = {});

}  // namespace cil
