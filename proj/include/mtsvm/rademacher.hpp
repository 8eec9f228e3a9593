#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtsvm/exponent.hpp"
#include "mtsvm/kernels.hpp"

namespace mtsvm {

// Which closed-form complexity bound applied.
//   single            one kernel per task
//   equal_radius      one kernel, s = +inf (the formula collapses to
//                     2 sqrt(R/N))
//   multi_small_rstar multiple kernels, r* <= ln T
//   multi_large_rstar multiple kernels, r* >= ln(MT)
//   multi_general     multiple kernels, r* in the gap between the two
enum class BoundBranch {
  single,
  equal_radius,
  multi_small_rstar,
  multi_large_rstar,
  multi_general,
};

enum class BoundStatus {
  ok,
  assumption_violated,  // some Gram diagonal exceeds 1
  unavailable,          // no finite formula applies (T = 1)
};

std::string to_string(BoundBranch b);
std::string to_string(BoundStatus s);

struct BoundResult {
  double value = 0.0;  // still reported when the assumption is violated
  BoundBranch branch = BoundBranch::single;
  BoundStatus status = BoundStatus::ok;
  double tau = 0.0;
  double rho = 0.0;
};

struct ErcParams {
  Exponent s;
  std::optional<Exponent> r;  // engaged for multiple-kernel spaces
  double R = 1.0;             // squared radius scale of the hypothesis ball
  int num_samples = 1000;
  std::uint64_t seed = 0;
  bool keep_per_sample = false;
  int workers = 1;
};

struct ErcReport {
  double estimate = 0.0;
  double std_error = 0.0;
  BoundResult bound;
  int num_samples = 0;
  int excluded_samples = 0;         // optimizer non-convergence
  std::vector<double> per_sample;   // raw per-draw values when requested
};

// Sign vectors, one per task, from the counter stream keyed by
// (seed, sample_index, task). A draw never depends on evaluation order.
std::vector<Eigen::VectorXd> sample_sigma(
    const std::vector<Eigen::Index>& task_sizes, std::uint64_t seed,
    std::int64_t sample_index);

// quad[d](t, m) = sigma_t' K_{t,m} sigma_t for D independent sign draws.
// Shared by both estimators so a sweep over exponents reuses one set of
// draws (common random numbers).
struct QuadSamples {
  std::vector<Eigen::MatrixXd> quad;
  std::vector<Eigen::Index> task_sizes;
  double max_diag = 0.0;
};
QuadSamples sigma_quadratics(const GramStack& g, std::uint64_t seed,
                             int num_samples, int workers);

// Monte Carlo estimate of the empirical Rademacher complexity of the
// trace-norm-coupled hypothesis ball for one kernel per task: the per-draw
// value is || (sqrt(sigma_t' K_t sigma_t))_t ||_{s*}, scaled by
// 2 sqrt(R) / (T N). Requires equal task sizes.
ErcReport erc_single_kernel(const GramStack& g, const ErcParams& p);
ErcReport erc_single_from_samples(const QuadSamples& samples,
                                  const ErcParams& p, bool assumption_ok);

// Multiple-kernel variant: per draw, maximizes
//   sum_t (theta . u_t)^(s*/2),  u_t^m = sigma_t' K_t^m sigma_t
// over {theta >= 0, ||theta||_r <= 1} by projected gradient ascent
// (backtracking from step 1, halt below 1e-9 relative improvement or 500
// iterations), then raises the optimum to 1/s*. Requires s >= 2 so the
// objective is concave; draws whose inner optimization fails to converge
// are excluded and counted.
ErcReport erc_multi_kernel(const GramStack& g, const ErcParams& p);
ErcReport erc_multi_from_samples(const QuadSamples& samples,
                                 const ErcParams& p, bool assumption_ok);

// Closed-form bound on the empirical Rademacher complexity, assuming unit
// kernel diagonals. Single kernel:
//   (2 / (T sqrt(N))) * sqrt(tau R T^(2/s*)),
//   tau = (max{s, rho*})*, rho = 2 ln T.
// Multiple kernels pick a branch by r*: r* <= ln T multiplies in M^(1/r*)
// (rho = 2 ln T), r* >= ln(MT) multiplies in M^(2/tau) (rho = 2 ln(MT)),
// and the gap region uses the general form
//   (2 / (T sqrt(N))) * sqrt(R s* T^(2/s*) M^max{1/r*, 2/s*}).
// T = 1 has no finite formula here: status = unavailable.
BoundResult erc_bound(Eigen::Index T, Eigen::Index N, Eigen::Index M,
                      Exponent s, std::optional<Exponent> r, double R,
                      bool assumption_ok);

// empirical_error + erc / margin + sqrt(9 ln(2/delta) / (2 T N)).
double generalization_bound(double empirical_error, double erc, double margin,
                            double delta, Eigen::Index T, Eigen::Index N);

// min(1, max(0, 1 - y f)): the margin surrogate used for empirical error.
inline double ramp_loss(double yf) {
  return std::min(1.0, std::max(0.0, 1.0 - yf));
}

}  // namespace mtsvm
