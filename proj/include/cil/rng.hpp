#pragma once

#include <cstdint>
#include <random>

#include "cil/tensor.hpp"

namespace cil {

// splitmix64 mix of a base seed and a stream id. Every randomized subsystem
// (data, split, model init, per-task sampling) draws from its own stream so
// adding one consumer never shifts another.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform(double lo, double hi);
  double gaussian(double mean, double stddev);
  std::size_t index(std::size_t n);  // uniform in [0, n)

  template <typename It>
  void shuffle(It first, It last) {
    std::shuffle(first, last, gen_);
  }

  std::mt19937_64& raw() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

// Kaiming-uniform fan-in fill: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
void kaiming_uniform_fill(Tensor& w, std::size_t fan_in, Rng& rng);
void gaussian_fill(Tensor& t, double mean, double stddev, Rng& rng);

}  // namespace cil
