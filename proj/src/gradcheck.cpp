#include "msad/gradcheck.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace msad {

double finite_diff_check(const ScalarFn& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: h must be positive");
  x.set_requires_grad(true);
  x.zero_grad();

  Tape tape;
  Tensor loss = f(x, &tape);
  if (loss.size() != 1) {
    throw std::invalid_argument("finite_diff_check: f must return a scalar");
  }
  if (!std::isfinite(loss.value())) {
    throw std::runtime_error("finite_diff_check: f returned a non-finite value");
  }
  backward(loss, tape);
  std::vector<double> analytic(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) analytic[i] = x.grad_at(i);

  double* xd = x.data();
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = xd[i];
    xd[i] = saved + h;
    const double f_plus = f(x, nullptr).value();
    xd[i] = saved - h;
    const double f_minus = f(x, nullptr).value();
    xd[i] = saved;
    if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
      throw std::runtime_error("finite_diff_check: non-finite value at perturbed input");
    }
    const double fd = (f_plus - f_minus) / (2.0 * h);
    const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace msad
