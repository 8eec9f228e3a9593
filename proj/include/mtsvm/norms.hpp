#pragma once

#include <Eigen/Core>
#include <cmath>

#include "mtsvm/exponent.hpp"

namespace mtsvm {

// l_p norm of a dense vector expression, p in [1, +inf].
//
// Finite p goes through the max-factored form m * (sum (|v_i|/m)^p)^(1/p) so
// that p far from 1 neither overflows nor underflows. One formula for every
// finite p keeps the family monotone in p at machine precision, which the
// Rademacher estimates lean on when sweeping a grid of exponents.
template <typename Derived>
double lp_norm(const Eigen::MatrixBase<Derived>& v, Exponent p) {
  const auto a = v.derived().cwiseAbs().eval();
  if (a.size() == 0) return 0.0;
  const double m = a.maxCoeff();
  if (m == 0.0 || p.is_inf()) return m;
  const double pv = p.value();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    acc += std::pow(a[i] / m, pv);
  }
  return m * std::pow(acc, 1.0 / pv);
}

// argmax_lambda g'lambda  subject to  ||lambda||_q <= 1, lambda >= 0,
// for g >= 0, g != 0. The attained value is ||g||_{q*}.
//   q = 1    -> unit mass on the first maximal coordinate of g
//   q = +inf -> the all-ones vector
//   else     -> lambda_i proportional to g_i^(q*-1), scaled to unit q-norm
Eigen::VectorXd holder_maximizer(const Eigen::Ref<const Eigen::VectorXd>& g,
                                 Exponent q);

// Euclidean projection of max(v, 0) onto {x >= 0, ||x||_r <= 1}.
// r = 1 sorts once and thresholds; r = 2 rescales; r = +inf clips at one;
// other r solve the scalar KKT multiplier by bisection (tolerance 1e-10).
Eigen::VectorXd project_lr_ball(const Eigen::Ref<const Eigen::VectorXd>& v,
                                Exponent r);

}  // namespace mtsvm
