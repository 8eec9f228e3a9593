#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "mtsvm/dataset.hpp"
#include "mtsvm/exponent.hpp"
#include "mtsvm/kernels.hpp"

namespace mtsvm {

// Per-task piece of a trained model. The decision function is
//   f_t(x) = scale * sum_i alpha_i y_i k_mix(x_i, x) + b
// where k_mix is the kernel_weights-weighted sum of the model's kernels and
// scale folds the task weight into the expansion (lambda_t for the s <= 2
// parameterization, 1 for s > 2).
struct TaskModel {
  std::string name;
  Eigen::MatrixXd support_features;
  Eigen::VectorXd support_labels;
  Eigen::VectorXd alpha;
  double b = 0.0;
  double scale = 1.0;
  bool degenerate = false;  // single-class task, trained as a constant
};

struct TrainDiagnostics {
  std::vector<double> objective_trace;
  std::vector<Eigen::VectorXd> kernel_weight_trace;
  int outer_iterations = 0;
  int objective_increases = 0;  // trace increases beyond 1e-10 slack
};

// Joint model for lp-coupled multi-task SVMs, single- or multiple-kernel.
// Single-kernel models carry kernel_weights = [1] and no r.
struct MtlModel {
  Exponent s{2.0};
  double C = 1.0;
  std::vector<KernelSpec> kernels;
  Eigen::VectorXd kernel_weights;  // on the nonnegative r-ball
  std::optional<Exponent> r;
  Eigen::VectorXd task_weights;  // on the nonnegative coupling-ball
  std::vector<TaskModel> tasks;
  TrainDiagnostics diag;

  [[nodiscard]] Eigen::Index num_tasks() const {
    return static_cast<Eigen::Index>(tasks.size());
  }
};

using MklModel = MtlModel;

struct TrainOptions {
  int max_outer = 200;
  double tol = 1e-6;        // relative objective change across outer cycles
  double inner_tol = 1e-8;  // pair-violation tolerance of the dual solver
  int workers = 1;
};

// Coupling-weight update for 1 <= s <= 2: lambda_t proportional to
// ||w_t||^(2-s), scaled so the s/(2-s)-norm is one; entries floored at 1e-8
// (renormalized if the floor pushed the norm above one); uniform when every
// norm is zero. At s = 2 this is the all-ones vector.
Eigen::VectorXd small_s_task_weights(const Eigen::VectorXd& w_norms,
                                     Exponent s);

// Coupling-weight update for s > 2: the Holder maximizer of the per-task
// dual objectives over the s/(s-2)-ball (s = +inf degenerates to the
// 1-ball, putting all mass on the best task). Uniform when all zero.
Eigen::VectorXd large_s_task_weights(const Eigen::VectorXd& dual_objectives,
                                     Exponent s);

// Alternating minimization for 1 <= s <= 2: per-task SVM on the
// lambda-scaled Gram with box C, then the closed-form coupling update.
// s = 2 decouples into independent SVMs.
MtlModel train_small_s(const MultiTaskDataset& data, const KernelSpec& kernel,
                       Exponent s, double C, const TrainOptions& opts = {});

// Alternating dual ascent for s > 2: per-task SVM with box C / lambda_t,
// then the Holder coupling update on the dual objectives.
MtlModel train_large_s(const MultiTaskDataset& data, const KernelSpec& kernel,
                       Exponent s, double C, const TrainOptions& opts = {});

// Dispatch on s.
MtlModel train_mtl(const MultiTaskDataset& data, const KernelSpec& kernel,
                   Exponent s, double C, const TrainOptions& opts = {});

double predict(const MtlModel& model, Eigen::Index task,
               const Eigen::Ref<const Eigen::RowVectorXd>& x);
Eigen::VectorXd predict_task(const MtlModel& model, Eigen::Index task,
                             const Eigen::MatrixXd& X);

// Coupled objective on the given data:
//   (sum_t (||w_t||^2 / 2)^(s/2))^(2/s) + C * total hinge loss,
// with ||w_t||^2 recovered from the dual expansion. s = +inf takes the max
// over tasks.
double objective_value(const MtlModel& model, const MultiTaskDataset& data);

// Mean over tasks of per-task 0/1 accuracy (f = 0 counts as an error).
double mean_task_accuracy(const MtlModel& model, const MultiTaskDataset& data);

// Mean over tasks of the mean ramp loss at the given margin.
double empirical_ramp_error(const MtlModel& model,
                            const MultiTaskDataset& data, double margin = 1.0);

namespace detail {

// Shared cores; r disengaged fixes the kernel mix (no mix update).
MtlModel train_small_core(const MultiTaskDataset& data,
                          const std::vector<KernelSpec>& kernels,
                          const GramStack& g, Exponent s,
                          std::optional<Exponent> r, double C,
                          const TrainOptions& opts);
MtlModel train_large_core(const MultiTaskDataset& data,
                          const std::vector<KernelSpec>& kernels,
                          const GramStack& g, Exponent s,
                          std::optional<Exponent> r, double C,
                          const TrainOptions& opts,
                          const Eigen::VectorXd& kernel_weights);

Eigen::MatrixXd composite_gram(const GramStack& g, Eigen::Index task,
                               const Eigen::VectorXd& kernel_weights);

// (sum_i a_i^p)^(1/p) for a >= 0, p in (0, inf]; max for p = inf.
double power_sum(const Eigen::VectorXd& a, double p);

}  // namespace detail

}  // namespace mtsvm
