#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace mtsvm {

struct DualSolution {
  Eigen::VectorXd alpha;
  double b = 0.0;
  double objective = 0.0;      // alpha'1 - 1/2 alpha'YKY alpha
  double kkt_violation = 0.0;  // final maximal-pair gap, clamped at 0
  std::int64_t iterations = 0;
};

// Optional per-update objective trace for diagnostics/tests.
struct SolveTrace {
  std::vector<double> objective;
};

// Maximize  alpha'1 - 1/2 alpha' (YKY) alpha
// subject to 0 <= alpha <= c,  alpha'y = 0,
// by maximal-violating-pair updates on the box-and-hyperplane feasible set.
// Terminates when the pair violation drops below tol or after 10^6 updates.
// The intercept b is the midpoint of the interval the KKT conditions leave
// for it (free support vectors when present, bound constraints otherwise).
//
// Throws DegenerateTask when y contains a single class.
DualSolution solve_svm_dual(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                            double c, double tol = 1e-6,
                            SolveTrace* trace = nullptr);

// alpha'1 - 1/2 alpha' (YKY) alpha for any alpha (no feasibility check).
double dual_objective(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& alpha);

}  // namespace mtsvm
