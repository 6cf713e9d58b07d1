#ifndef EEGTEXT_TESTS_CHECKERS_HPP_
#define EEGTEXT_TESTS_CHECKERS_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "eegtext/tensor.hpp"

namespace eegtext::testing {

// Relative error with a floor so gradients near zero are compared absolutely.
inline double rel_err(double g, double f) {
  return std::abs(g - f) / std::max({1e-3, std::abs(g), std::abs(f)});
}

struct GradCheck {
  double max_rel_err = 0.0;
  size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Runs f under a tape to get the analytic gradient of its scalar output with
// respect to x, then compares against the central-difference oracle.
inline GradCheck grad_check(const std::function<Tensor(const Tensor&)>& f,
                            const Tensor& x, double step = 1e-5) {
  Tensor xg(x.shape(), x.values(), x.dtype(), /*requires_grad=*/true);
  Tensor analytic;
  {
    Tape tape;
    Tensor y = f(xg);
    backward(y);
    analytic = tape.grad(xg);
  }
  Tensor numeric = finite_diff(
      [&](const Tensor& xx) { return f(xx).item(); }, x, step);
  GradCheck r;
  for (size_t i = 0; i < x.size(); ++i) {
    double e = rel_err(analytic.values()[i], numeric.values()[i]);
    if (e >= r.max_rel_err) {
      r.max_rel_err = e;
      r.worst_index = i;
      r.analytic = analytic.values()[i];
      r.numeric = numeric.values()[i];
    }
  }
  return r;
}

}  // namespace eegtext::testing

#endif  // EEGTEXT_TESTS_CHECKERS_HPP_
