#include "mtsvm/mtl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mtsvm/norms.hpp"
#include "mtsvm/parallel.hpp"
#include "mtsvm/svm_dual.hpp"

namespace mtsvm {

namespace {

constexpr double kWeightFloor = 1e-8;
constexpr double kTraceSlack = 1e-10;

bool task_is_degenerate(const TaskData& task) {
  bool pos = false, neg = false;
  for (Eigen::Index i = 0; i < task.labels.size(); ++i) {
    (task.labels[i] > 0 ? pos : neg) = true;
  }
  return !(pos && neg);
}

// Constant classifier voting for the only class present.
void fit_constant(const TaskData& task, TaskModel* out) {
  out->alpha = Eigen::VectorXd::Zero(task.labels.size());
  out->b = task.labels[0];
  out->scale = 1.0;
  out->degenerate = true;
}

double hinge_sum(const Eigen::VectorXd& y, const Eigen::VectorXd& f) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    acc += std::max(0.0, 1.0 - y[i] * f[i]);
  }
  return acc;
}

void check_small_s(Exponent s) {
  if (s.is_inf() || s.value() > 2.0) {
    throw UnsupportedExponent("this trainer handles 1 <= s <= 2");
  }
}

void check_large_s(Exponent s) {
  if (!s.is_inf() && s.value() <= 2.0) {
    throw UnsupportedExponent("this trainer handles s > 2");
  }
}

}  // namespace

namespace detail {

double power_sum(const Eigen::VectorXd& a, double p) {
  if (a.size() == 0) return 0.0;
  const double m = a.maxCoeff();
  if (m <= 0.0) return 0.0;
  if (std::isinf(p)) return m;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] > 0.0) acc += std::pow(a[i] / m, p);
  }
  return m * std::pow(acc, 1.0 / p);
}

Eigen::MatrixXd composite_gram(const GramStack& g, Eigen::Index task,
                               const Eigen::VectorXd& kernel_weights) {
  const auto t = static_cast<std::size_t>(task);
  Eigen::MatrixXd K = kernel_weights[0] * g.mats[t][0];
  for (Eigen::Index m = 1; m < kernel_weights.size(); ++m) {
    K.noalias() += kernel_weights[m] * g.mats[t][static_cast<std::size_t>(m)];
  }
  return K;
}

}  // namespace detail

Eigen::VectorXd small_s_task_weights(const Eigen::VectorXd& w_norms,
                                     Exponent s) {
  check_small_s(s);
  const Eigen::Index T = w_norms.size();
  if (T == 0) throw InvalidDataset("no tasks");
  const double sv = s.value();
  const double p = sv / (2.0 - sv);  // +inf at s = 2, handled below

  const double m = w_norms.maxCoeff();
  Eigen::VectorXd lam(T);
  if (m <= 0.0) {
    const double u = sv == 2.0 ? 1.0 : std::pow(static_cast<double>(T), -1.0 / p);
    lam.setConstant(u);
    return lam;
  }
  if (sv == 2.0) {
    lam.setOnes();
    return lam;
  }
  // lambda_t = ||w_t||^(2-s) / (sum_u ||w_u||^s)^((2-s)/s); scale-invariant
  // in w, so normalize by the max first.
  double denom = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    denom += std::pow(w_norms[t] / m, sv);
  }
  denom = std::pow(denom, (2.0 - sv) / sv);
  for (Eigen::Index t = 0; t < T; ++t) {
    lam[t] = std::pow(w_norms[t] / m, 2.0 - sv) / denom;
  }
  lam = lam.cwiseMax(kWeightFloor);
  const double norm = lp_norm(lam, Exponent(p));
  if (norm > 1.0) lam /= norm;
  return lam;
}

Eigen::VectorXd large_s_task_weights(const Eigen::VectorXd& dual_objectives,
                                     Exponent s) {
  check_large_s(s);
  const Eigen::Index T = dual_objectives.size();
  if (T == 0) throw InvalidDataset("no tasks");
  const Exponent q =
      s.is_inf() ? Exponent(1.0)
                 : Exponent(s.value() / (s.value() - 2.0));
  if (dual_objectives.maxCoeff() <= 0.0) {
    Eigen::VectorXd lam(T);
    lam.setConstant(q.is_inf()
                        ? 1.0
                        : std::pow(static_cast<double>(T), -1.0 / q.value()));
    return lam;
  }
  return holder_maximizer(dual_objectives.cwiseMax(0.0), q);
}

namespace detail {

namespace {

// State of one task inside the alternating loops.
struct TaskState {
  DualSolution sol;
  double hinge = 0.0;
  double wsq = 0.0;             // composite ||w_t||^2
  Eigen::VectorXd wsq_parts;    // per-kernel component norms ||w_t^m||^2
  bool degenerate = false;
};

// Kernel-mix objective piece used by the mix update: a_t(theta) =
// sum_m parts(t,m) / (2 theta_m) with w held fixed; returns
// power_sum(a, s/2). Entries with zero component norm contribute nothing
// for any theta.
double mix_objective(const Eigen::MatrixXd& parts, const Eigen::VectorXd& theta,
                     double half_s) {
  const Eigen::Index T = parts.rows();
  Eigen::VectorXd a(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    double acc = 0.0;
    for (Eigen::Index m = 0; m < parts.cols(); ++m) {
      const double w2 = parts(t, m);
      if (w2 > 0.0) {
        acc += w2 / (2.0 * std::max(theta[m], kWeightFloor));
      }
    }
    a[t] = acc;
  }
  return power_sum(a, half_s);
}

// Projected gradient descent on the mix objective, w fixed. Gradient:
//   d/d theta_m = - sum_t c_t * parts(t,m) / (2 theta_m^2),
// c_t the chain factor of the outer power sum.
Eigen::VectorXd update_kernel_mix(const Eigen::MatrixXd& parts,
                                  Eigen::VectorXd theta, Exponent r,
                                  double half_s) {
  const Eigen::Index T = parts.rows();
  const Eigen::Index M = parts.cols();
  double h = mix_objective(parts, theta, half_s);
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd a(T);
    for (Eigen::Index t = 0; t < T; ++t) {
      double acc = 0.0;
      for (Eigen::Index m = 0; m < M; ++m) {
        if (parts(t, m) > 0.0) {
          acc += parts(t, m) / (2.0 * std::max(theta[m], kWeightFloor));
        }
      }
      a[t] = acc;
    }
    const double total = power_sum(a, half_s);
    if (total <= 0.0) break;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(M);
    for (Eigen::Index t = 0; t < T; ++t) {
      if (a[t] <= 0.0) continue;
      const double chain =
          std::isinf(half_s)
              ? (a[t] == total ? 1.0 : 0.0)
              : std::pow(total, 1.0 - half_s) * std::pow(a[t], half_s - 1.0);
      for (Eigen::Index m = 0; m < M; ++m) {
        if (parts(t, m) > 0.0) {
          const double th = std::max(theta[m], kWeightFloor);
          grad[m] -= chain * parts(t, m) / (2.0 * th * th);
        }
      }
    }
    double step = 1.0;
    bool improved = false;
    Eigen::VectorXd cand;
    double hc = h;
    while (step >= 1e-14) {
      cand = project_lr_ball(theta - step * grad, r);
      hc = mix_objective(parts, cand, half_s);
      if (hc < h) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
    const double rel = (h - hc) / std::max(std::abs(h), 1e-300);
    theta = cand;
    h = hc;
    if (rel < 1e-9) break;
  }
  return theta;
}

void solve_task_small(const TaskData& task, const Eigen::MatrixXd& Kmix,
                      double lambda_t, double C, double inner_tol,
                      TaskState* st) {
  st->sol = solve_svm_dual(lambda_t * Kmix, task.labels, C, inner_tol);
  const Eigen::VectorXd yk = st->sol.alpha.cwiseProduct(task.labels);
  const Eigen::VectorXd kf = Kmix * yk;
  Eigen::VectorXd f = lambda_t * kf;
  f.array() += st->sol.b;
  st->hinge = hinge_sum(task.labels, f);
  st->wsq = lambda_t * lambda_t * yk.dot(kf);
}

}  // namespace

MtlModel train_small_core(const MultiTaskDataset& data,
                          const std::vector<KernelSpec>& kernels,
                          const GramStack& g, Exponent s,
                          std::optional<Exponent> r, double C,
                          const TrainOptions& opts) {
  check_small_s(s);
  data.validate();
  if (!(C >= 0.0)) throw NumericError("C must be nonnegative");
  const Eigen::Index T = data.num_tasks();
  const Eigen::Index M = g.num_kernels();
  const bool mix_update = r.has_value() && M > 1;
  const double half_s = 0.5 * s.value();

  MtlModel model;
  model.s = s;
  model.C = C;
  model.kernels = kernels;
  model.r = r;
  model.kernel_weights =
      r.has_value()
          ? Eigen::VectorXd::Constant(
                M, r->is_inf() ? 1.0
                               : std::pow(static_cast<double>(M),
                                          -1.0 / r->value()))
          : Eigen::VectorXd::Ones(M);
  model.task_weights = small_s_task_weights(Eigen::VectorXd::Zero(T), s);

  std::vector<TaskState> states(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    states[static_cast<std::size_t>(t)].degenerate =
        task_is_degenerate(data.tasks[static_cast<std::size_t>(t)]);
  }

  Eigen::VectorXd w_norms = Eigen::VectorXd::Zero(T);
  double prev = std::numeric_limits<double>::infinity();

  auto solve_all = [&](const Eigen::VectorXd& lambda,
                       const Eigen::VectorXd& theta) {
    parallel_for(static_cast<std::size_t>(T), opts.workers, [&](std::size_t t) {
      auto& st = states[t];
      const auto& task = data.tasks[t];
      if (st.degenerate) {
        st.hinge = 0.0;
        st.wsq = 0.0;
        if (mix_update) st.wsq_parts = Eigen::VectorXd::Zero(M);
        return;
      }
      const Eigen::MatrixXd Kmix =
          composite_gram(g, static_cast<Eigen::Index>(t), theta);
      solve_task_small(task, Kmix, lambda[static_cast<Eigen::Index>(t)], C,
                       opts.inner_tol, &st);
      if (mix_update) {
        const Eigen::VectorXd yk = st.sol.alpha.cwiseProduct(task.labels);
        const double lt = lambda[static_cast<Eigen::Index>(t)];
        st.wsq_parts.resize(M);
        for (Eigen::Index m = 0; m < M; ++m) {
          const double raw =
              yk.dot(g.mats[t][static_cast<std::size_t>(m)] * yk);
          st.wsq_parts[m] = theta[m] * theta[m] * lt * lt * std::max(raw, 0.0);
        }
      }
    });
  };

  int outer = 0;
  for (outer = 1; outer <= opts.max_outer; ++outer) {
    if (outer > 1 && s.value() < 2.0) {
      model.task_weights = small_s_task_weights(w_norms, s);
    }
    solve_all(model.task_weights, model.kernel_weights);

    Eigen::VectorXd a(T);
    double hinge_total = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
      const auto& st = states[static_cast<std::size_t>(t)];
      a[t] = 0.5 * st.wsq;
      hinge_total += st.hinge;
    }

    if (mix_update) {
      Eigen::MatrixXd parts(T, M);
      for (Eigen::Index t = 0; t < T; ++t) {
        parts.row(t) = states[static_cast<std::size_t>(t)].wsq_parts;
      }
      model.kernel_weights =
          update_kernel_mix(parts, model.kernel_weights, *r, half_s);
      model.diag.kernel_weight_trace.push_back(model.kernel_weights);
      // Recompute the composite norms at the refreshed mix.
      for (Eigen::Index t = 0; t < T; ++t) {
        double acc = 0.0;
        for (Eigen::Index m = 0; m < M; ++m) {
          const double w2 = parts(t, m);
          if (w2 > 0.0) {
            acc += w2 / std::max(model.kernel_weights[m], kWeightFloor);
          }
        }
        a[t] = 0.5 * acc;
      }
    }

    for (Eigen::Index t = 0; t < T; ++t) {
      w_norms[t] = std::sqrt(2.0 * a[t]);
    }
    const double G = power_sum(a, half_s) + C * hinge_total;
    if (!model.diag.objective_trace.empty() &&
        G > model.diag.objective_trace.back() + kTraceSlack) {
      ++model.diag.objective_increases;
    }
    model.diag.objective_trace.push_back(G);
    if (std::isfinite(prev) &&
        std::abs(G - prev) <= opts.tol * std::max(1.0, std::abs(prev))) {
      break;
    }
    prev = G;
  }
  model.diag.outer_iterations = std::min(outer, opts.max_outer);

  // The mix moved after the last dual solve; re-align the expansions.
  if (mix_update) {
    if (s.value() < 2.0) {
      model.task_weights = small_s_task_weights(w_norms, s);
    }
    solve_all(model.task_weights, model.kernel_weights);
    Eigen::VectorXd a(T);
    double hinge_total = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
      a[t] = 0.5 * states[static_cast<std::size_t>(t)].wsq;
      hinge_total += states[static_cast<std::size_t>(t)].hinge;
    }
    const double G = power_sum(a, half_s) + C * hinge_total;
    if (!model.diag.objective_trace.empty() &&
        G > model.diag.objective_trace.back() + kTraceSlack) {
      ++model.diag.objective_increases;
    }
    model.diag.objective_trace.push_back(G);
  }

  model.tasks.resize(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    auto& tm = model.tasks[static_cast<std::size_t>(t)];
    const auto& task = data.tasks[static_cast<std::size_t>(t)];
    tm.name = task.name;
    tm.support_features = task.features;
    tm.support_labels = task.labels;
    const auto& st = states[static_cast<std::size_t>(t)];
    if (st.degenerate) {
      fit_constant(task, &tm);
    } else {
      tm.alpha = st.sol.alpha;
      tm.b = st.sol.b;
      tm.scale = model.task_weights[t];
    }
  }
  return model;
}

MtlModel train_large_core(const MultiTaskDataset& data,
                          const std::vector<KernelSpec>& kernels,
                          const GramStack& g, Exponent s,
                          std::optional<Exponent> r, double C,
                          const TrainOptions& opts,
                          const Eigen::VectorXd& kernel_weights) {
  check_large_s(s);
  data.validate();
  if (!(C >= 0.0)) throw NumericError("C must be nonnegative");
  const Eigen::Index T = data.num_tasks();
  const Exponent q = s.is_inf()
                         ? Exponent(1.0)
                         : Exponent(s.value() / (s.value() - 2.0));

  MtlModel model;
  model.s = s;
  model.C = C;
  model.kernels = kernels;
  model.r = r;
  model.kernel_weights = kernel_weights;
  model.task_weights = Eigen::VectorXd::Constant(
      T, q.is_inf() ? 1.0 : std::pow(static_cast<double>(T), -1.0 / q.value()));

  std::vector<TaskState> states(static_cast<std::size_t>(T));
  std::vector<Eigen::MatrixXd> Kmix(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    auto& st = states[static_cast<std::size_t>(t)];
    st.degenerate = task_is_degenerate(data.tasks[static_cast<std::size_t>(t)]);
    Kmix[static_cast<std::size_t>(t)] = composite_gram(g, t, kernel_weights);
  }

  Eigen::VectorXd duals = Eigen::VectorXd::Zero(T);
  double prev = -std::numeric_limits<double>::infinity();
  int outer = 0;
  for (outer = 1; outer <= opts.max_outer; ++outer) {
    parallel_for(static_cast<std::size_t>(T), opts.workers, [&](std::size_t t) {
      auto& st = states[t];
      if (st.degenerate) return;
      const double lt = std::max(model.task_weights[static_cast<Eigen::Index>(t)],
                                 kWeightFloor);
      st.sol = solve_svm_dual(Kmix[t], data.tasks[t].labels, C / lt,
                              opts.inner_tol);
    });
    for (Eigen::Index t = 0; t < T; ++t) {
      duals[t] = states[static_cast<std::size_t>(t)].degenerate
                     ? 0.0
                     : states[static_cast<std::size_t>(t)].sol.objective;
    }
    const double V = model.task_weights.dot(duals);
    if (!model.diag.objective_trace.empty() &&
        V < model.diag.objective_trace.back() - kTraceSlack) {
      ++model.diag.objective_increases;
    }
    model.diag.objective_trace.push_back(V);
    if (std::isfinite(prev) &&
        std::abs(V - prev) <= opts.tol * std::max(1.0, std::abs(prev))) {
      break;
    }
    prev = V;
    model.task_weights = large_s_task_weights(duals, s);
  }
  model.diag.outer_iterations = std::min(outer, opts.max_outer);

  model.tasks.resize(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    auto& tm = model.tasks[static_cast<std::size_t>(t)];
    const auto& task = data.tasks[static_cast<std::size_t>(t)];
    tm.name = task.name;
    tm.support_features = task.features;
    tm.support_labels = task.labels;
    const auto& st = states[static_cast<std::size_t>(t)];
    if (st.degenerate) {
      fit_constant(task, &tm);
    } else {
      tm.alpha = st.sol.alpha;
      tm.b = st.sol.b;
      tm.scale = 1.0;
    }
  }
  return model;
}

}  // namespace detail

MtlModel train_small_s(const MultiTaskDataset& data, const KernelSpec& kernel,
                       Exponent s, double C, const TrainOptions& opts) {
  const GramStack g = build_gram(data, {kernel});
  return detail::train_small_core(data, {kernel}, g, s, std::nullopt, C, opts);
}

MtlModel train_large_s(const MultiTaskDataset& data, const KernelSpec& kernel,
                       Exponent s, double C, const TrainOptions& opts) {
  const GramStack g = build_gram(data, {kernel});
  return detail::train_large_core(data, {kernel}, g, s, std::nullopt, C, opts,
                                  Eigen::VectorXd::Ones(1));
}

MtlModel train_mtl(const MultiTaskDataset& data, const KernelSpec& kernel,
                   Exponent s, double C, const TrainOptions& opts) {
  if (!s.is_inf() && s.value() <= 2.0) {
    return train_small_s(data, kernel, s, C, opts);
  }
  return train_large_s(data, kernel, s, C, opts);
}

double predict(const MtlModel& model, Eigen::Index task,
               const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  if (task < 0 || task >= model.num_tasks()) {
    throw InvalidTask("task index out of range");
  }
  const auto& tm = model.tasks[static_cast<std::size_t>(task)];
  if (tm.degenerate) return tm.b;
  double acc = 0.0;
  const Eigen::VectorXd yk = tm.alpha.cwiseProduct(tm.support_labels);
  for (std::size_t m = 0; m < model.kernels.size(); ++m) {
    const Eigen::VectorXd col =
        kernel_column(model.kernels[m], tm.support_features, x);
    acc += model.kernel_weights[static_cast<Eigen::Index>(m)] * col.dot(yk);
  }
  return tm.scale * acc + tm.b;
}

Eigen::VectorXd predict_task(const MtlModel& model, Eigen::Index task,
                             const Eigen::MatrixXd& X) {
  Eigen::VectorXd f(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    f[i] = predict(model, task, X.row(i));
  }
  return f;
}

double objective_value(const MtlModel& model, const MultiTaskDataset& data) {
  if (data.num_tasks() != model.num_tasks()) {
    throw InvalidDataset("dataset and model task counts differ");
  }
  const Eigen::Index T = model.num_tasks();
  Eigen::VectorXd a(T);
  double hinge_total = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& tm = model.tasks[static_cast<std::size_t>(t)];
    double wsq = 0.0;
    if (!tm.degenerate) {
      const Eigen::VectorXd yk = tm.alpha.cwiseProduct(tm.support_labels);
      for (std::size_t m = 0; m < model.kernels.size(); ++m) {
        const Eigen::MatrixXd K =
            kernel_matrix(model.kernels[m], tm.support_features);
        wsq += model.kernel_weights[static_cast<Eigen::Index>(m)] *
               yk.dot(K * yk);
      }
      wsq = std::max(0.0, wsq) * tm.scale * tm.scale;
    }
    a[t] = 0.5 * wsq;
    const auto& task = data.tasks[static_cast<std::size_t>(t)];
    const Eigen::VectorXd f = predict_task(model, t, task.features);
    hinge_total += hinge_sum(task.labels, f);
  }
  const double half_s = model.s.is_inf()
                            ? std::numeric_limits<double>::infinity()
                            : 0.5 * model.s.value();
  return detail::power_sum(a, half_s) + model.C * hinge_total;
}

double mean_task_accuracy(const MtlModel& model,
                          const MultiTaskDataset& data) {
  if (data.num_tasks() != model.num_tasks()) {
    throw InvalidDataset("dataset and model task counts differ");
  }
  double acc = 0.0;
  for (Eigen::Index t = 0; t < model.num_tasks(); ++t) {
    const auto& task = data.tasks[static_cast<std::size_t>(t)];
    const Eigen::VectorXd f = predict_task(model, t, task.features);
    Eigen::Index good = 0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      if (task.labels[i] * f[i] > 0.0) ++good;
    }
    acc += static_cast<double>(good) / static_cast<double>(f.size());
  }
  return acc / static_cast<double>(model.num_tasks());
}

double empirical_ramp_error(const MtlModel& model,
                            const MultiTaskDataset& data, double margin) {
  if (!(margin > 0.0)) throw NumericError("margin must be positive");
  if (data.num_tasks() != model.num_tasks()) {
    throw InvalidDataset("dataset and model task counts differ");
  }
  double total = 0.0;
  for (Eigen::Index t = 0; t < model.num_tasks(); ++t) {
    const auto& task = data.tasks[static_cast<std::size_t>(t)];
    const Eigen::VectorXd f = predict_task(model, t, task.features);
    double task_err = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      task_err += std::clamp(1.0 - task.labels[i] * f[i] / margin, 0.0, 1.0);
    }
    total += task_err / static_cast<double>(f.size());
  }
  return total / static_cast<double>(model.num_tasks());
}

}  // namespace mtsvm
