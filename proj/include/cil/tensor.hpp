#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace cil {

// Dense row-major tensor of 64-bit floats. A Tensor is a cheap handle: copies
// share storage, ops allocate fresh outputs. Gradient buffers live next to
// the values and are filled in by GradTape::backward.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> values,
         bool requires_grad = false);

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double value,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<std::size_t>& shape() const;
  std::size_t size() const;
  std::size_t rank() const { return shape().size(); }
  // Rank-2 accessors; rank-1 tensors count as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  double* data();
  const double* data() const;
  double& at(std::size_t i);
  double at(std::size_t i) const;
  double& at2(std::size_t r, std::size_t c);
  double at2(std::size_t r, std::size_t c) const;

  // Scalar value of a size-1 tensor; ContractError otherwise.
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool b);

  // nullptr when no gradient has been accumulated.
  const double* grad_data() const;
  // Allocates a zero gradient buffer on first use.
  double* ensure_grad();
  void zero_grad();
  void drop_grad();

  bool same_storage(const Tensor& other) const;
  // Deep copy of values (grad not copied).
  Tensor clone() const;

  std::string shape_str() const;

 private:
  struct Impl {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty or values.size()
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;

  Impl& ref();
  const Impl& ref() const;
};

// Reverse-mode tape, one per thread. Ops append backward closures in
// execution order; backward() replays them once in reverse and clears the
// tape. Never shared across threads.
class GradTape {
 public:
  static GradTape& active();

  void record(std::function<void()> backward_step);
  // Seeds d(loss)/d(loss) = 1 and runs the tape in reverse. The tape is
  // cleared afterwards. loss must be a size-1 tensor on a nonempty tape.
  void backward(Tensor loss);
  void clear();
  std::size_t size() const { return steps_.size(); }
  bool enabled() const { return pause_depth_ == 0; }

 private:
  std::vector<std::function<void()>> steps_;
  int pause_depth_ = 0;

  friend class NoGradScope;
};

// RAII pause for evaluation passes: ops compute but do not record, and their
// outputs do not require grad.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;
};

}  // namespace cil
