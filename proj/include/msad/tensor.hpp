#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace msad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated on first touch, same length as data
  bool requires_grad = false;
  const Tape* producer = nullptr;  // tape that recorded the producing op
};
}  // namespace detail

// Dense row-major tensor of 64-bit floats. A Tensor is a cheap handle: copies
// share the same storage, clone() makes a deep copy. Storage stays mutable
// through const handles (shape does not).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor row(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;

  double* data() const;
  double& operator[](std::size_t i) const;
  double& at(std::initializer_list<std::size_t> idx) const;
  double value() const;  // size-1 tensors only

  bool requires_grad() const;
  const Tensor& set_requires_grad(bool on) const;

  bool has_grad() const;
  std::vector<double>& grad() const;  // zero-filled on first use
  double grad_at(std::size_t i) const;  // 0 when no grad buffer exists
  void zero_grad() const;

  Tensor clone() const;  // values only; grad state and flags are not copied

  detail::TensorImpl* impl() const { return impl_.get(); }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Execution record of one differentiable forward pass. Ops append backward
// closures while computing; backward() replays them once, in reverse.
// Build once, replay once, single-threaded.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> step);
  std::size_t size() const { return steps_.size(); }
  bool replayed() const { return replayed_; }

  friend void backward(const Tensor& loss, Tape& tape);

 private:
  std::vector<std::function<void()>> steps_;
  bool replayed_ = false;
};

// Seeds d(loss)/d(loss) = 1 and replays the tape backward, accumulating into
// the grad buffer of every requires_grad tensor reachable from `loss`.
// Unreachable leaves keep an absent (all-zero) grad.
void backward(const Tensor& loss, Tape& tape);

}  // namespace msad
