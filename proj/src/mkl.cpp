#include "mtsvm/mkl.hpp"

#include <cmath>
#include <limits>

#include "mtsvm/norms.hpp"

namespace mtsvm {

MklModel train_mkl_small_s(const MultiTaskDataset& data,
                           const std::vector<KernelSpec>& kernels, Exponent s,
                           Exponent r, double C, const TrainOptions& opts) {
  const GramStack g = build_gram(data, kernels);
  return detail::train_small_core(data, kernels, g, s, r, C, opts);
}

MklModel train_mkl_large_s(const MultiTaskDataset& data,
                           const std::vector<KernelSpec>& kernels, Exponent s,
                           Exponent r, double C, const TrainOptions& opts) {
  const GramStack g = build_gram(data, kernels);
  const Eigen::Index M = g.num_kernels();
  const Eigen::Index T = g.num_tasks();

  Eigen::VectorXd theta = Eigen::VectorXd::Constant(
      M, r.is_inf() ? 1.0
                    : std::pow(static_cast<double>(M), -1.0 / r.value()));

  MklModel best;
  double best_obj = std::numeric_limits<double>::infinity();
  std::vector<double> obj_trace;
  std::vector<Eigen::VectorXd> theta_trace;
  int increases = 0;
  int steps = 0;

  for (int k = 1; k <= 100; ++k) {
    steps = k;
    MklModel cur =
        detail::train_large_core(data, kernels, g, s, r, C, opts, theta);
    const double obj = cur.diag.objective_trace.empty()
                           ? 0.0
                           : cur.diag.objective_trace.back();
    if (!obj_trace.empty() && obj > obj_trace.back() + 1e-10) ++increases;
    obj_trace.push_back(obj);
    theta_trace.push_back(theta);
    if (obj < best_obj) {
      best_obj = obj;
      best = cur;
    }

    // Subgradient of the inner saddle value at the maximizing expansions:
    //   d/d theta_m = -1/2 * sum_t lambda_t (alpha_t . y_t)' K_t^m (...)
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(M);
    for (Eigen::Index t = 0; t < T; ++t) {
      const auto& tm = cur.tasks[static_cast<std::size_t>(t)];
      if (tm.degenerate) continue;
      const Eigen::VectorXd yk = tm.alpha.cwiseProduct(tm.support_labels);
      const double lt = cur.task_weights[t];
      for (Eigen::Index m = 0; m < M; ++m) {
        grad[m] -= 0.5 * lt *
                   yk.dot(g.mats[static_cast<std::size_t>(t)]
                                [static_cast<std::size_t>(m)] *
                          yk);
      }
    }
    const double step = 0.1 / std::sqrt(static_cast<double>(k));
    const Eigen::VectorXd next = project_lr_ball(theta - step * grad, r);
    const double moved = (next - theta).norm();
    theta = next;
    if (moved < 1e-5) break;
  }

  best.diag.objective_trace = std::move(obj_trace);
  best.diag.kernel_weight_trace = std::move(theta_trace);
  best.diag.outer_iterations = steps;
  best.diag.objective_increases = increases;
  return best;
}

MklModel train_mkl(const MultiTaskDataset& data,
                   const std::vector<KernelSpec>& kernels, Exponent s,
                   Exponent r, double C, const TrainOptions& opts) {
  if (!s.is_inf() && s.value() <= 2.0) {
    return train_mkl_small_s(data, kernels, s, r, C, opts);
  }
  return train_mkl_large_s(data, kernels, s, r, C, opts);
}

}  // namespace mtsvm
