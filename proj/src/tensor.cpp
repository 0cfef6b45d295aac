#include "msad/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace msad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) {
  impl_ = std::make_shared<detail::TensorImpl>();
  impl_->data.assign(numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) {
  if (numel(shape) != values.size()) {
    throw std::invalid_argument("Tensor: " + shape_str(shape) + " does not hold " +
                                std::to_string(values.size()) + " values");
  }
  impl_ = std::make_shared<detail::TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

Tensor Tensor::row(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> flat;
  flat.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw std::invalid_argument("Tensor::matrix: ragged rows");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return Tensor(Shape{r, c}, std::move(flat));
}

const Shape& Tensor::shape() const {
  if (!impl_) throw std::logic_error("Tensor: undefined handle");
  return impl_->shape;
}

std::size_t Tensor::size() const { return impl_ ? impl_->data.size() : 0; }

double* Tensor::data() const {
  if (!impl_) throw std::logic_error("Tensor: undefined handle");
  return impl_->data.data();
}

double& Tensor::operator[](std::size_t i) const { return impl_->data[i]; }

double& Tensor::at(std::initializer_list<std::size_t> idx) const {
  const Shape& s = shape();
  if (idx.size() != s.size()) throw std::invalid_argument("Tensor::at: rank mismatch");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : idx) {
    if (i >= s[axis]) throw std::out_of_range("Tensor::at: index out of range");
    flat = flat * s[axis] + i;
    ++axis;
  }
  return impl_->data[flat];
}

double Tensor::value() const {
  if (size() != 1) {
    throw std::invalid_argument("Tensor::value: expected a single element, got " +
                                shape_str(shape()));
  }
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

const Tensor& Tensor::set_requires_grad(bool on) const {
  if (!impl_) throw std::logic_error("Tensor: undefined handle");
  impl_->requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::vector<double>& Tensor::grad() const {
  if (!impl_) throw std::logic_error("Tensor: undefined handle");
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

double Tensor::grad_at(std::size_t i) const {
  if (!has_grad()) return 0.0;
  return impl_->grad[i];
}

void Tensor::zero_grad() const {
  if (impl_ && !impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
}

Tensor Tensor::clone() const {
  if (!impl_) return Tensor();
  return Tensor(impl_->shape, impl_->data);
}

void Tape::record(std::function<void()> step) {
  if (replayed_) throw std::logic_error("Tape: recording after backward");
  steps_.push_back(std::move(step));
}

void backward(const Tensor& loss, Tape& tape) {
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar tensor");
  }
  if (tape.replayed_) throw std::logic_error("backward: tape already replayed");
  const Tape* producer = loss.impl()->producer;
  if (producer != nullptr && producer != &tape) {
    throw std::invalid_argument("backward: loss was not produced on this tape");
  }
  tape.replayed_ = true;
  loss.grad()[0] += 1.0;
  for (auto it = tape.steps_.rbegin(); it != tape.steps_.rend(); ++it) (*it)();
}

}  // namespace msad
