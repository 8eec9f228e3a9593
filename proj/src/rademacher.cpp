#include "mtsvm/rademacher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mtsvm/norms.hpp"
#include "mtsvm/parallel.hpp"
#include "mtsvm/rng.hpp"

namespace mtsvm {

std::string to_string(BoundBranch b) {
  switch (b) {
    case BoundBranch::single:
      return "single";
    case BoundBranch::equal_radius:
      return "equal_radius";
    case BoundBranch::multi_small_rstar:
      return "multi_small_rstar";
    case BoundBranch::multi_large_rstar:
      return "multi_large_rstar";
    case BoundBranch::multi_general:
      return "multi_general";
  }
  return "?";
}

std::string to_string(BoundStatus s) {
  switch (s) {
    case BoundStatus::ok:
      return "ok";
    case BoundStatus::assumption_violated:
      return "assumption-violated";
    case BoundStatus::unavailable:
      return "unavailable";
  }
  return "?";
}

std::vector<Eigen::VectorXd> sample_sigma(
    const std::vector<Eigen::Index>& task_sizes, std::uint64_t seed,
    std::int64_t sample_index) {
  std::vector<Eigen::VectorXd> out(task_sizes.size());
  for (std::size_t t = 0; t < task_sizes.size(); ++t) {
    CounterRng rng(seed, static_cast<std::uint64_t>(sample_index),
                   static_cast<std::uint64_t>(t));
    Eigen::VectorXd sig(task_sizes[t]);
    for (Eigen::Index i = 0; i < sig.size(); ++i) {
      sig[i] = rng.next_sign();
    }
    out[t] = std::move(sig);
  }
  return out;
}

QuadSamples sigma_quadratics(const GramStack& g, std::uint64_t seed,
                             int num_samples, int workers) {
  if (num_samples < 1) throw InvalidDataset("need at least one sample");
  const auto T = static_cast<std::size_t>(g.num_tasks());
  const auto M = static_cast<std::size_t>(g.num_kernels());
  QuadSamples out;
  out.task_sizes = g.task_sizes;
  out.max_diag = g.max_diag;
  out.quad.resize(static_cast<std::size_t>(num_samples));
  parallel_for(static_cast<std::size_t>(num_samples), workers, [&](std::size_t d) {
    const auto sig =
        sample_sigma(g.task_sizes, seed, static_cast<std::int64_t>(d));
    Eigen::MatrixXd q(T, M);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t m = 0; m < M; ++m) {
        q(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(m)) =
            sig[t].dot(g.mats[t][m] * sig[t]);
      }
    }
    out.quad[d] = std::move(q);
  });
  return out;
}

namespace {

// Negative quadratic forms beyond this slack mean the Gram matrix was not
// PSD after all; below it they are rounding dust and clamp to zero.
double negativity_floor(const QuadSamples& s) {
  double nmax = 1.0;
  for (const auto n : s.task_sizes) {
    nmax = std::max(nmax, static_cast<double>(n));
  }
  return -1e-8 * std::max(1.0, nmax * std::max(1.0, s.max_diag));
}

double checked_quad(double q, double floor) {
  if (q < floor) {
    throw NumericError("sigma' K sigma is negative beyond tolerance");
  }
  return std::max(q, 0.0);
}

struct MeanStd {
  double mean = 0.0;
  double stderr_of_mean = 0.0;
  int used = 0;
};

MeanStd mean_and_stderr(const std::vector<double>& v,
                        const std::vector<char>& ok) {
  MeanStd out;
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!ok[i]) continue;
    sum += v[i];
    ++out.used;
  }
  if (out.used == 0) return out;
  out.mean = sum / out.used;
  if (out.used > 1) {
    double ss = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!ok[i]) continue;
      const double d = v[i] - out.mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / (out.used - 1));
    out.stderr_of_mean = sd / std::sqrt(static_cast<double>(out.used));
  }
  return out;
}

// T^(2/s*) with the s = 1 case exact: s* = +inf gives exponent 0.
double pow_T(double T, Exponent sstar, double mult) {
  if (sstar.is_inf()) return 1.0;
  return std::pow(T, mult / sstar.value());
}

ErcReport finish_report(std::vector<double>&& values,
                        const std::vector<char>& converged, double scale,
                        const ErcParams& p, BoundResult bound) {
  ErcReport rep;
  const auto ms = mean_and_stderr(values, converged);
  rep.estimate = scale * ms.mean;
  rep.std_error = scale * ms.stderr_of_mean;
  rep.num_samples = static_cast<int>(values.size());
  rep.excluded_samples = static_cast<int>(values.size()) - ms.used;
  rep.bound = bound;
  if (p.keep_per_sample) rep.per_sample = std::move(values);
  return rep;
}

}  // namespace

ErcReport erc_single_from_samples(const QuadSamples& samples,
                                  const ErcParams& p, bool assumption_ok) {
  const std::size_t D = samples.quad.size();
  if (D == 0) throw InvalidDataset("no samples");
  if (samples.quad.front().cols() != 1) {
    throw InvalidDataset("expected a single kernel per task");
  }
  Eigen::Index N = samples.task_sizes.front();
  for (const auto n : samples.task_sizes) {
    if (n != N) {
      throw InvalidDataset(
          "tasks have unequal sizes; subsample to the minimum first "
          "(--subsample-to-min)");
    }
  }
  const auto T = static_cast<Eigen::Index>(samples.task_sizes.size());
  const Exponent sstar = dual_exponent(p.s);
  const double floor = negativity_floor(samples);

  std::vector<double> values(D);
  std::vector<char> ok(D, 1);
  for (std::size_t d = 0; d < D; ++d) {
    Eigen::VectorXd u(T);
    for (Eigen::Index t = 0; t < T; ++t) {
      u[t] = std::sqrt(checked_quad(samples.quad[d](t, 0), floor));
    }
    values[d] = lp_norm(u, sstar);
  }

  const double scale = 2.0 * std::sqrt(p.R) /
                       (static_cast<double>(T) * static_cast<double>(N));
  return finish_report(std::move(values), ok, scale, p,
                       erc_bound(T, N, 1, p.s, std::nullopt, p.R,
                                 assumption_ok));
}

ErcReport erc_single_kernel(const GramStack& g, const ErcParams& p) {
  if (g.num_kernels() != 1) {
    throw InvalidDataset("erc_single_kernel expects exactly one kernel");
  }
  const auto samples =
      sigma_quadratics(g, p.seed, p.num_samples, p.workers);
  return erc_single_from_samples(samples, p, check_bound_assumption(g));
}

namespace {

struct InnerMax {
  double value = 0.0;
  bool converged = false;
};

// max over the nonnegative r-ball of sum_t (theta . u_t)^pw, 0 < pw <= 1.
InnerMax maximize_kernel_mix(const Eigen::MatrixXd& U, Exponent r, double pw) {
  const Eigen::Index M = U.cols();
  auto eval = [&](const Eigen::VectorXd& theta) {
    double acc = 0.0;
    for (Eigen::Index t = 0; t < U.rows(); ++t) {
      const double z = U.row(t).dot(theta);
      if (z > 0.0) acc += std::pow(z, pw);
    }
    return acc;
  };
  auto grad = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* g) {
    g->setZero(M);
    for (Eigen::Index t = 0; t < U.rows(); ++t) {
      const double z = U.row(t).dot(theta);
      if (z > 0.0) {
        g->noalias() += pw * std::pow(z, pw - 1.0) * U.row(t).transpose();
      }
    }
  };

  const double init = r.is_inf()
                          ? 1.0
                          : std::pow(static_cast<double>(M), -1.0 / r.value());
  Eigen::VectorXd theta = Eigen::VectorXd::Constant(M, init);
  double h = eval(theta);

  InnerMax out;
  Eigen::VectorXd g(M), cand(M);
  for (int it = 0; it < 500; ++it) {
    grad(theta, &g);
    double step = 1.0;
    bool improved = false;
    double hc = h;
    while (step >= 1e-14) {
      cand = project_lr_ball(theta + step * g, r);
      hc = eval(cand);
      if (hc > h) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) {
      out.converged = true;
      break;
    }
    const double rel = (hc - h) / std::max(std::abs(hc), 1e-300);
    theta = cand;
    h = hc;
    if (rel < 1e-9) {
      out.converged = true;
      break;
    }
  }
  out.value = h;
  return out;
}

}  // namespace

ErcReport erc_multi_from_samples(const QuadSamples& samples,
                                 const ErcParams& p, bool assumption_ok) {
  const std::size_t D = samples.quad.size();
  if (D == 0) throw InvalidDataset("no samples");
  if (!p.r.has_value()) {
    throw InvalidDataset("multiple-kernel estimate needs the r exponent");
  }
  if (p.s < Exponent(2.0)) {
    throw UnsupportedExponent(
        "multiple-kernel estimate requires s >= 2 (concave inner problem); "
        "the closed-form bound covers smaller s");
  }
  Eigen::Index N = samples.task_sizes.front();
  for (const auto n : samples.task_sizes) {
    if (n != N) {
      throw InvalidDataset(
          "tasks have unequal sizes; subsample to the minimum first "
          "(--subsample-to-min)");
    }
  }
  const auto T = static_cast<Eigen::Index>(samples.task_sizes.size());
  const auto M = samples.quad.front().cols();
  const Exponent sstar = dual_exponent(p.s);
  const double pw = 0.5 * sstar.value();  // in (0, 1] since s >= 2
  const double floor = negativity_floor(samples);

  std::vector<double> values(D);
  std::vector<char> ok(D, 1);
  parallel_for(D, p.workers, [&](std::size_t d) {
    Eigen::MatrixXd U = samples.quad[d];
    for (Eigen::Index t = 0; t < U.rows(); ++t) {
      for (Eigen::Index m = 0; m < U.cols(); ++m) {
        U(t, m) = checked_quad(U(t, m), floor);
      }
    }
    const auto inner = maximize_kernel_mix(U, *p.r, pw);
    values[d] = std::pow(inner.value, 1.0 / sstar.value());
    ok[d] = inner.converged ? 1 : 0;
  });

  const double scale = 2.0 * std::sqrt(p.R) /
                       (static_cast<double>(T) * static_cast<double>(N));
  return finish_report(std::move(values), ok, scale, p,
                       erc_bound(T, N, M, p.s, p.r, p.R, assumption_ok));
}

ErcReport erc_multi_kernel(const GramStack& g, const ErcParams& p) {
  if (g.num_kernels() < 1) throw InvalidDataset("empty Gram stack");
  const auto samples =
      sigma_quadratics(g, p.seed, p.num_samples, p.workers);
  return erc_multi_from_samples(samples, p, check_bound_assumption(g));
}

BoundResult erc_bound(Eigen::Index T, Eigen::Index N, Eigen::Index M,
                      Exponent s, std::optional<Exponent> r, double R,
                      bool assumption_ok) {
  if (T < 1 || N < 1 || M < 1) {
    throw InvalidDataset("erc_bound: T, N, M must be positive");
  }
  if (!(R > 0.0)) throw NumericError("erc_bound: R must be positive");
  if (M >= 2 && !r.has_value()) {
    throw InvalidDataset("erc_bound: multiple kernels need the r exponent");
  }

  BoundResult out;
  out.status = assumption_ok ? BoundStatus::ok
                             : BoundStatus::assumption_violated;
  const double Td = static_cast<double>(T);
  const double Nd = static_cast<double>(N);
  const double Md = static_cast<double>(M);
  const double lead = 2.0 / (Td * std::sqrt(Nd));
  const Exponent sstar = dual_exponent(s);

  if (T == 1) {
    // rho = 2 ln T degenerates; no finite branch applies.
    out.status = BoundStatus::unavailable;
    out.value = std::numeric_limits<double>::quiet_NaN();
    out.branch = M >= 2 ? BoundBranch::multi_general : BoundBranch::single;
    return out;
  }

  // tau = (max{s, rho*})*; comparing s against rho* and substituting rho
  // directly keeps the s <= rho* case exact (no dual round trip).
  auto tau_for = [&](double rho) {
    const Exponent rho_star = dual_exponent(Exponent(rho));
    return (s <= rho_star) ? rho : sstar.value();
  };

  if (M == 1) {
    const double rho = 2.0 * std::log(Td);
    out.rho = rho;
    out.tau = tau_for(rho);
    out.value = lead * std::sqrt(out.tau * R * pow_T(Td, sstar, 2.0));
    out.branch = s.is_inf() ? BoundBranch::equal_radius : BoundBranch::single;
    return out;
  }

  const Exponent rstar = dual_exponent(*r);
  const double lnT = std::log(Td);
  const double lnMT = std::log(Md * Td);
  if (rstar.value() <= lnT) {
    const double rho = 2.0 * lnT;
    out.rho = rho;
    out.tau = tau_for(rho);
    const double mfac =
        rstar.is_inf() ? 1.0 : std::pow(Md, 1.0 / rstar.value());
    out.value = lead * std::sqrt(out.tau * R * pow_T(Td, sstar, 2.0) * mfac);
    out.branch = BoundBranch::multi_small_rstar;
  } else if (rstar.value() >= lnMT) {
    const double rho = 2.0 * lnMT;
    out.rho = rho;
    out.tau = tau_for(rho);
    out.value = lead * std::sqrt(out.tau * R * pow_T(Td, sstar, 2.0) *
                                 std::pow(Md, 2.0 / out.tau));
    out.branch = BoundBranch::multi_large_rstar;
  } else {
    out.rho = 2.0 * lnT;
    out.tau = sstar.value();
    const double mexp =
        std::max(rstar.is_inf() ? 0.0 : 1.0 / rstar.value(),
                 sstar.is_inf() ? 0.0 : 2.0 / sstar.value());
    out.value = lead * std::sqrt(R * sstar.value() * pow_T(Td, sstar, 2.0) *
                                 std::pow(Md, mexp));
    out.branch = BoundBranch::multi_general;
  }
  return out;
}

double generalization_bound(double empirical_error, double erc, double margin,
                            double delta, Eigen::Index T, Eigen::Index N) {
  if (!(margin > 0.0)) throw NumericError("margin must be positive");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw NumericError("delta must lie in (0, 1)");
  }
  if (T < 1 || N < 1) throw InvalidDataset("T and N must be positive");
  const double tail = std::sqrt(9.0 * std::log(2.0 / delta) /
                                (2.0 * static_cast<double>(T) *
                                 static_cast<double>(N)));
  return empirical_error + erc / margin + tail;
}

}  // namespace mtsvm
