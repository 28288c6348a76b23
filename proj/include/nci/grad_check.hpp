#pragma once

// Finite-difference validation of reverse-mode gradients. Meaningful only in
// 64-bit precision; the step default matches the truncation/rounding
// crossover for central differences.

#include <algorithm>
#include <cmath>
#include <functional>

#include "nci/ops.hpp"
#include "nci/tensor.hpp"

namespace nci {

inline constexpr double kGradCheckStep = 1e-5;

// Compares the reverse-mode gradient of scalar-valued f at x against central
// finite differences, elementwise. Returns the max relative error with
// denominator max(|analytic|, |numeric|, 1e-8). f must be deterministic: any
// internal randomness (dropout masks) has to be replayed identically on every
// call.
inline double grad_check(
    const std::function<Tensor<double>(const Tensor<double>&)>& f,
    const Tensor<double>& x, double h = kGradCheckStep) {
  Tensor<double> probe = Tensor<double>::from_values(
      x.shape(), std::vector<double>(x.values().data(),
                                     x.values().data() + x.size()));
  probe.set_requires_grad(true);
  Tensor<double> out = f(probe);
  if (out.size() != 1)
    throw DimensionError("grad_check: f must be scalar-valued, got " +
                         shape_str(out.shape()));
  probe.zero_grad();
  out.backward();
  ArrX<double> analytic = probe.grad();

  double worst = 0.0;
  std::vector<double> vals(x.values().data(), x.values().data() + x.size());
  for (Index i = 0; i < x.size(); ++i) {
    double keep = vals[static_cast<std::size_t>(i)];
    auto eval = [&](double v) {
      vals[static_cast<std::size_t>(i)] = v;
      Tensor<double> xi = Tensor<double>::from_values(x.shape(), vals);
      autograd::NoGradGuard ng;
      return f(xi).item();
    };
    double numeric = (eval(keep + h) - eval(keep - h)) / (2.0 * h);
    vals[static_cast<std::size_t>(i)] = keep;
    double a = analytic[i];
    double rel = std::abs(a - numeric) /
                 std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, rel);
  }
  return worst;
}

// Same check against a parameter that lives inside a larger model: make_loss
// rebuilds the scalar loss from current parameter values on every call.
// The parameter is restored to its original values before returning.
inline double param_grad_check(
    Tensor<double> param, const std::function<Tensor<double>()>& make_loss,
    double h = kGradCheckStep) {
  Tensor<double> out = make_loss();
  if (out.size() != 1)
    throw DimensionError("param_grad_check: loss must be scalar, got " +
                         shape_str(out.shape()));
  param.zero_grad();
  out.backward();
  ArrX<double> analytic = param.grad();

  double worst = 0.0;
  for (Index i = 0; i < param.size(); ++i) {
    double keep = param.values_mut()[i];
    auto eval = [&](double v) {
      param.values_mut()[i] = v;
      autograd::NoGradGuard ng;
      return make_loss().item();
    };
    double numeric = (eval(keep + h) - eval(keep - h)) / (2.0 * h);
    param.values_mut()[i] = keep;
    double a = analytic[i];
    double rel = std::abs(a - numeric) /
                 std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace nci
