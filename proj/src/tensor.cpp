#include "cil/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "cil/errors.hpp"

namespace cil {

namespace {
std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values,
               bool requires_grad) {
  for (std::size_t e : shape) {
    if (e == 0) throw DimensionError("tensor: zero extent in shape");
  }
  if (shape.empty()) throw DimensionError("tensor: empty shape");
  if (shape_product(shape) != values.size()) {
    std::ostringstream os;
    os << "tensor: shape/value mismatch, product(shape)=" << shape_product(shape)
       << " but " << values.size() << " values";
    throw DimensionError(os.str());
  }
  impl_ = std::make_shared<Impl>();
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  std::vector<double> v(shape_product(shape), 0.0);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value,
                    bool requires_grad) {
  std::vector<double> v(shape_product(shape), value);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  std::size_t n = values.size();
  return Tensor({n}, std::move(values), requires_grad);
}

Tensor::Impl& Tensor::ref() {
  if (!impl_) throw ContractError("tensor: use of undefined tensor");
  return *impl_;
}

const Tensor::Impl& Tensor::ref() const {
  if (!impl_) throw ContractError("tensor: use of undefined tensor");
  return *impl_;
}

const std::vector<std::size_t>& Tensor::shape() const { return ref().shape; }

std::size_t Tensor::size() const { return ref().values.size(); }

std::size_t Tensor::rows() const {
  const auto& s = ref().shape;
  if (s.size() == 1) return 1;
  if (s.size() == 2) return s[0];
  throw DimensionError("tensor: rows() on rank-" + std::to_string(s.size()));
}

std::size_t Tensor::cols() const {
  const auto& s = ref().shape;
  if (s.size() == 1) return s[0];
  if (s.size() == 2) return s[1];
  throw DimensionError("tensor: cols() on rank-" + std::to_string(s.size()));
}

double* Tensor::data() { return ref().values.data(); }
const double* Tensor::data() const { return ref().values.data(); }

double& Tensor::at(std::size_t i) { return ref().values[i]; }
double Tensor::at(std::size_t i) const { return ref().values[i]; }

double& Tensor::at2(std::size_t r, std::size_t c) {
  return ref().values[r * cols() + c];
}
double Tensor::at2(std::size_t r, std::size_t c) const {
  return ref().values[r * cols() + c];
}

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("tensor: item() on non-scalar " + shape_str());
  }
  return ref().values[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool b) { ref().requires_grad = b; }

const double* Tensor::grad_data() const {
  const auto& g = ref().grad;
  return g.empty() ? nullptr : g.data();
}

double* Tensor::ensure_grad() {
  auto& r = ref();
  if (r.grad.empty()) r.grad.assign(r.values.size(), 0.0);
  return r.grad.data();
}

void Tensor::zero_grad() {
  auto& g = ref().grad;
  std::fill(g.begin(), g.end(), 0.0);
}

void Tensor::drop_grad() { ref().grad.clear(); }

bool Tensor::same_storage(const Tensor& other) const {
  return impl_ == other.impl_;
}

Tensor Tensor::clone() const {
  const auto& r = ref();
  return Tensor(r.shape, r.values, r.requires_grad);
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  const auto& s = ref().shape;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

// ---------------------------------------------------------------------------
// GradTape
// ---------------------------------------------------------------------------

GradTape& GradTape::active() {
  thread_local GradTape tape;
  return tape;
}

void GradTape::record(std::function<void()> backward_step) {
  steps_.push_back(std::move(backward_step));
}

void GradTape::backward(Tensor loss) {
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be scalar, got " + loss.shape_str());
  }
  if (steps_.empty()) {
    throw ContractError("backward: tape is empty");
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward: loss does not depend on any parameter");
  }
  loss.ensure_grad()[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  clear();
}

void GradTape::clear() { steps_.clear(); }

NoGradScope::NoGradScope() { ++GradTape::active().pause_depth_; }
NoGradScope::~NoGradScope() { --GradTape::active().pause_depth_; }

}  // namespace cil
