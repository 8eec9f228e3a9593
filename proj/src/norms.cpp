#include "mtsvm/norms.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <vector>

#include "mtsvm/errors.hpp"

namespace mtsvm {

Eigen::VectorXd holder_maximizer(const Eigen::Ref<const Eigen::VectorXd>& g,
                                 Exponent q) {
  const Eigen::Index n = g.size();
  if (n == 0) throw ZeroVector("holder_maximizer: empty vector");
  if ((g.array() < 0.0).any()) {
    throw NumericError("holder_maximizer: negative coefficient");
  }
  const double m = g.maxCoeff();
  if (m == 0.0) throw ZeroVector("holder_maximizer: zero vector");

  if (q.is_inf()) {
    return Eigen::VectorXd::Ones(n);
  }
  if (q.is_one()) {
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(n);
    Eigen::Index first_max = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (g[i] == m) {
        first_max = i;
        break;
      }
    }
    lam[first_max] = 1.0;
    return lam;
  }

  // lambda_i ~ g_i^(q*-1); normalize g by its max first so that large
  // conjugate exponents underflow gracefully instead of overflowing.
  const double e = dual_exponent(q).value() - 1.0;
  Eigen::VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    t[i] = std::pow(g[i] / m, e);
  }
  const double scale = lp_norm(t, q);
  return t / scale;
}

namespace {

// Projection onto the probability-simplex boundary {x >= 0, sum x = 1},
// valid when sum(w) > 1 and w >= 0: sort, find the threshold, clip.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& w) {
  std::vector<double> u(w.data(), w.data() + w.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0;
  double tau = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cum += u[k];
    const double cand = (cum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - cand > 0.0) {
      tau = cand;
    } else {
      break;
    }
  }
  return (w.array() - tau).cwiseMax(0.0);
}

// Solve x + mu*r*x^(r-1) = w for x in [0, w], monotone in x.
double coordinate_root(double w, double mu, double r) {
  if (w <= 0.0) return 0.0;
  double lo = 0.0, hi = w;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = mid + mu * r * std::pow(mid, r - 1.0) - w;
    if (f > 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
    if (hi - lo <= 1e-16 * w) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Eigen::VectorXd project_lr_ball(const Eigen::Ref<const Eigen::VectorXd>& v,
                                Exponent r) {
  Eigen::VectorXd w = v.cwiseMax(0.0);
  if (r.is_inf()) {
    return w.cwiseMin(1.0);
  }
  if (lp_norm(w, r) <= 1.0) {
    return w;
  }
  if (r.is_one()) {
    return project_simplex(w);
  }
  if (r.value() == 2.0) {
    return w / w.norm();
  }

  // General r: theta_i(mu) solves theta + mu*r*theta^(r-1) = w_i per
  // coordinate; ||theta(mu)||_r decreases in mu, so bisect the multiplier.
  const double rv = r.value();
  auto norm_at = [&](double mu, Eigen::VectorXd* out) {
    Eigen::VectorXd th(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      th[i] = coordinate_root(w[i], mu, rv);
    }
    const double nr = lp_norm(th, r);
    if (out) *out = std::move(th);
    return nr;
  };

  double lo = 0.0, hi = 1.0;
  while (norm_at(hi, nullptr) > 1.0) {
    hi *= 2.0;
    if (hi > 1e30) throw NumericError("project_lr_ball: multiplier blow-up");
  }
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (norm_at(mid, nullptr) > 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  Eigen::VectorXd theta;
  norm_at(0.5 * (lo + hi), &theta);
  return theta;
}

}  // namespace mtsvm
