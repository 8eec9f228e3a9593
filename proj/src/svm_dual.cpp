#include "mtsvm/svm_dual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mtsvm/errors.hpp"

namespace mtsvm {

namespace {
constexpr std::int64_t kMaxUpdates = 1000000;
constexpr double kCurvatureFloor = 1e-12;
}  // namespace

double dual_objective(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& alpha) {
  const Eigen::VectorXd ya = y.cwiseProduct(alpha);
  return alpha.sum() - 0.5 * ya.dot(K * ya);
}

DualSolution solve_svm_dual(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                            double c, double tol, SolveTrace* trace) {
  const Eigen::Index n = K.rows();
  if (n == 0 || K.cols() != n || y.size() != n) {
    throw InvalidDataset("solve_svm_dual: shape mismatch");
  }
  if (!(c >= 0.0)) throw NumericError("solve_svm_dual: c must be >= 0");
  bool has_pos = false, has_neg = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] == 1.0) {
      has_pos = true;
    } else if (y[i] == -1.0) {
      has_neg = true;
    } else {
      throw InvalidDataset("solve_svm_dual: labels must be +/-1");
    }
  }
  if (!has_pos || !has_neg) {
    throw DegenerateTask("solve_svm_dual: single-class task");
  }

  // Work on the minimization form f = 1/2 a'Qa - a'1 with Q = YKY;
  // grad G = Qa - 1. At a = 0, G = -1.
  Eigen::MatrixXd Q = K;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      Q(i, j) *= y[i] * y[j];
    }
  }

  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd G = Eigen::VectorXd::Constant(n, -1.0);

  DualSolution sol;
  double violation = 0.0;
  for (std::int64_t it = 0;; ++it) {
    // i maximizes -y_i G_i over indices that can move up along y_i,
    // j minimizes it over indices that can move down.
    int ii = -1, jj = -1;
    double up = -std::numeric_limits<double>::infinity();
    double low = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
      const double v = -y[k] * G[k];
      const bool can_up = y[k] == 1.0 ? a[k] < c : a[k] > 0.0;
      const bool can_low = y[k] == 1.0 ? a[k] > 0.0 : a[k] < c;
      if (can_up && v > up) {
        up = v;
        ii = static_cast<int>(k);
      }
      if (can_low && v < low) {
        low = v;
        jj = static_cast<int>(k);
      }
    }
    violation = (ii >= 0 && jj >= 0) ? up - low : 0.0;
    sol.iterations = it;
    if (violation < tol || it >= kMaxUpdates) break;

    // Step t >= 0 along d with d_i = y_i, d_j = -y_j keeps a'y fixed and
    // has slope -(up - low) < 0. Clip the Newton step at the box.
    const Eigen::Index i = ii, j = jj;
    double quad = Q(i, i) + Q(j, j) - 2.0 * y[i] * y[j] * Q(i, j);
    quad = std::max(quad, kCurvatureFloor);
    double step = violation / quad;
    const double room_i = y[i] == 1.0 ? c - a[i] : a[i];
    const double room_j = y[j] == 1.0 ? a[j] : c - a[j];
    step = std::min({step, room_i, room_j});

    a[i] += y[i] * step;
    a[j] -= y[j] * step;
    // Snap to the box to keep the up/low index sets exact.
    a[i] = std::clamp(a[i], 0.0, c);
    a[j] = std::clamp(a[j], 0.0, c);
    G.noalias() += step * (y[i] * Q.col(i) - y[j] * Q.col(j));

    if (trace) {
      trace->objective.push_back(a.sum() - 0.5 * (a.dot(G) + a.sum()));
    }
  }

  // Intercept from the KKT stationarity interval. h_i is the margin value
  // without intercept; free SVs pin b, otherwise bound constraints bracket
  // it.
  double lo_b = -std::numeric_limits<double>::infinity();
  double hi_b = std::numeric_limits<double>::infinity();
  double free_lo = std::numeric_limits<double>::infinity();
  double free_hi = -std::numeric_limits<double>::infinity();
  int num_free = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = y[i] * (G[i] + 1.0);  // = sum_j a_j y_j K_ij
    const double cand = y[i] - h;
    if (a[i] > 0.0 && a[i] < c) {
      free_lo = std::min(free_lo, cand);
      free_hi = std::max(free_hi, cand);
      ++num_free;
    } else if ((a[i] == 0.0 && y[i] == 1.0) || (a[i] == c && y[i] == -1.0)) {
      lo_b = std::max(lo_b, cand);
    } else {
      hi_b = std::min(hi_b, cand);
    }
  }
  if (num_free > 0) {
    sol.b = 0.5 * (free_lo + free_hi);
  } else if (std::isfinite(lo_b) && std::isfinite(hi_b)) {
    sol.b = 0.5 * (lo_b + hi_b);
  } else if (std::isfinite(lo_b)) {
    sol.b = lo_b;
  } else if (std::isfinite(hi_b)) {
    sol.b = hi_b;
  } else {
    sol.b = 0.0;
  }

  sol.alpha = std::move(a);
  sol.objective = dual_objective(K, y, sol.alpha);
  sol.kkt_violation = std::max(0.0, violation);
  return sol;
}

}  // namespace mtsvm
