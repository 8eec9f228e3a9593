#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "mtsvm/errors.hpp"
#include "mtsvm/kernels.hpp"
#include "mtsvm/norms.hpp"
#include "mtsvm/rademacher.hpp"
#include "mtsvm/rng.hpp"

using namespace mtsvm;

namespace {

GramStack identity_stack(Eigen::Index T, Eigen::Index N) {
  GramStack g;
  g.mats.assign(static_cast<std::size_t>(T),
                {Eigen::MatrixXd::Identity(N, N)});
  g.task_sizes.assign(static_cast<std::size_t>(T), N);
  g.max_diag = 1.0;
  return g;
}

MultiTaskDataset gaussian_tasks(int T, int N, int d, std::uint64_t seed) {
  MultiTaskDataset data;
  CounterRng rng(seed);
  for (int t = 0; t < T; ++t) {
    TaskData task;
    task.name = "t" + std::to_string(t);
    task.features.resize(N, d);
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < d; ++j) task.features(i, j) = rng.next_gaussian();
    }
    task.labels = Eigen::VectorXd::Ones(N);
    task.labels[0] = -1.0;
    data.tasks.push_back(std::move(task));
  }
  return data;
}

ErcParams params(Exponent s, std::optional<Exponent> r, int D,
                 std::uint64_t seed, bool keep = false, int workers = 1) {
  return ErcParams{s, r, 1.0, D, seed, keep, workers};
}

}  // namespace

TEST_CASE("sigma draws are deterministic and unbiased") {
  const std::vector<Eigen::Index> sizes = {5, 3};
  const auto a = sample_sigma(sizes, 42, 7);
  const auto b = sample_sigma(sizes, 42, 7);
  REQUIRE(a.size() == 2);
  CHECK(a[0] == b[0]);
  CHECK(a[1] == b[1]);
  for (const auto& sig : a) {
    for (Eigen::Index i = 0; i < sig.size(); ++i) {
      CHECK(std::abs(sig[i]) == 1.0);
    }
  }
  const auto c = sample_sigma(sizes, 43, 7);
  CHECK((a[0] - c[0]).cwiseAbs().maxCoeff() > 0.0);

  double mean = 0.0;
  const int D = 10000;
  const Eigen::Index width = 64;
  for (int d = 0; d < D; ++d) {
    mean += sample_sigma({width}, 9, d)[0].sum();
  }
  mean /= static_cast<double>(D) * static_cast<double>(width);
  CHECK(std::abs(mean) <= 0.005);  // four standard errors
}

TEST_CASE("quadratic samples are worker-invariant") {
  const auto data = gaussian_tasks(3, 8, 2, 5);
  const auto g = build_gram(data, {KernelSpec::gaussian(1.0)});
  const auto q1 = sigma_quadratics(g, 11, 50, 1);
  const auto q4 = sigma_quadratics(g, 11, 50, 4);
  REQUIRE(q1.quad.size() == q4.quad.size());
  for (std::size_t d = 0; d < q1.quad.size(); ++d) {
    CHECK((q1.quad[d] - q4.quad[d]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("identity Gram closed forms") {
  const auto g = identity_stack(2, 4);
  // every draw gives u_t = sqrt(N) = 2, so there is no Monte Carlo noise
  struct Expect {
    Exponent s;
    double value;
  };
  const std::vector<Expect> cases = {
      {Exponent(1.0), 0.5},
      {Exponent(2.0), std::sqrt(8.0) / 4.0},
      {Exponent::infinity(), 1.0},
  };
  for (const auto& c : cases) {
    const auto rep = erc_single_kernel(g, params(c.s, std::nullopt, 64, 3));
    CHECK(rep.estimate == doctest::Approx(c.value).epsilon(1e-9));
    CHECK(rep.std_error <= 1e-12);
    CHECK(rep.excluded_samples == 0);
  }
}

TEST_CASE("per-sample values increase with s under shared draws") {
  const auto data = gaussian_tasks(3, 20, 3, 17);
  const auto g = build_gram(data, {KernelSpec::gaussian(1.0)});
  const auto quads = sigma_quadratics(g, 4, 200, 1);
  const std::vector<Exponent> grid = {Exponent(1.0),   Exponent(4.0 / 3.0),
                                      Exponent(2.0),   Exponent(4.0),
                                      Exponent(100.0), Exponent::infinity()};
  std::vector<std::vector<double>> per_s;
  for (const auto& s : grid) {
    auto p = params(s, std::nullopt, 200, 4, /*keep=*/true);
    const auto rep = erc_single_from_samples(quads, p, true);
    REQUIRE(rep.per_sample.size() == 200);
    per_s.push_back(rep.per_sample);
  }
  for (std::size_t k = 1; k < per_s.size(); ++k) {
    for (std::size_t d = 0; d < per_s[k].size(); ++d) {
      CHECK(per_s[k][d] >= per_s[k - 1][d] - 1e-12);
    }
  }
}

TEST_CASE("s = inf per-sample value equals the sum of task radii") {
  const auto data = gaussian_tasks(3, 10, 2, 23);
  const auto g = build_gram(data, {KernelSpec::gaussian(0.7)});
  const int D = 50;
  const std::uint64_t seed = 12;
  const auto quads = sigma_quadratics(g, seed, D, 1);
  auto p = params(Exponent::infinity(), std::nullopt, D, seed, /*keep=*/true);
  const auto rep = erc_single_from_samples(quads, p, true);
  REQUIRE(rep.per_sample.size() == D);
  for (int d = 0; d < D; ++d) {
    // recompute independently from the raw sign draws
    const auto sig = sample_sigma(g.task_sizes, seed, d);
    double total = 0.0;
    for (std::size_t t = 0; t < sig.size(); ++t) {
      total += std::sqrt(sig[t].dot(g.mats[t][0] * sig[t]));
    }
    CHECK(rep.per_sample[d] == doctest::Approx(total).epsilon(1e-10));
  }
}

TEST_CASE("single-kernel bound arithmetic") {
  SUBCASE("s = 1 known value") {
    const auto b = erc_bound(2, 4, 1, Exponent(1.0), std::nullopt, 1.0, true);
    CHECK(b.status == BoundStatus::ok);
    CHECK(b.branch == BoundBranch::single);
    CHECK(b.value == doctest::Approx(0.58870).epsilon(2e-5));
    // exact shape: (2/(T sqrt(N))) sqrt(2 R ln T)
    const double exact =
        2.0 / (2.0 * std::sqrt(4.0)) * std::sqrt(2.0 * std::log(2.0) * 1.0);
    CHECK(b.value == exact);
    CHECK(b.tau == 2.0 * std::log(2.0));
    CHECK(b.rho == 2.0 * std::log(2.0));
  }
  SUBCASE("s = rho* collapses to sqrt(2 e R ln T)") {
    const Eigen::Index T = 8, N = 5;
    const double rho = 2.0 * std::log(static_cast<double>(T));
    const Exponent s = dual_exponent(Exponent(rho));
    const auto b = erc_bound(T, N, 1, s, std::nullopt, 1.0, true);
    const double expect =
        2.0 / (static_cast<double>(T) * std::sqrt(static_cast<double>(N))) *
        std::sqrt(2.0 * std::exp(1.0) * std::log(static_cast<double>(T)));
    CHECK(b.value == doctest::Approx(expect).epsilon(1e-10));
  }
  SUBCASE("s = inf equal-radius constant 2 sqrt(R/N)") {
    const auto b =
        erc_bound(2, 4, 1, Exponent::infinity(), std::nullopt, 1.0, true);
    CHECK(b.branch == BoundBranch::equal_radius);
    CHECK(b.value == doctest::Approx(2.0 * std::sqrt(1.0 / 4.0)).epsilon(1e-14));
    CHECK(b.tau == 1.0);
  }
  SUBCASE("tau switches rule at s = rho*") {
    const Eigen::Index T = 8;
    const double rho = 2.0 * std::log(8.0);
    const double rho_star = rho / (rho - 1.0);
    // below the knee tau is pinned at rho, independent of s
    const auto below =
        erc_bound(T, 4, 1, Exponent(rho_star - 1e-6), std::nullopt, 1.0, true);
    const auto lower =
        erc_bound(T, 4, 1, Exponent(1.05), std::nullopt, 1.0, true);
    CHECK(below.tau == rho);
    CHECK(lower.tau == rho);
    // above the knee tau tracks s*, which starts just under rho and decays
    const auto above =
        erc_bound(T, 4, 1, Exponent(rho_star + 1e-3), std::nullopt, 1.0, true);
    const double sstar = (rho_star + 1e-3) / (rho_star + 1e-3 - 1.0);
    CHECK(above.tau == doctest::Approx(sstar).epsilon(1e-12));
    CHECK(above.tau < below.tau);
    const auto higher = erc_bound(T, 4, 1, Exponent(3.0), std::nullopt, 1.0, true);
    CHECK(higher.tau == doctest::Approx(1.5).epsilon(1e-12));
  }
  SUBCASE("assumption violation flips the status, keeps the number") {
    const auto b = erc_bound(2, 4, 1, Exponent(1.0), std::nullopt, 1.0, false);
    CHECK(b.status == BoundStatus::assumption_violated);
    CHECK(b.value == doctest::Approx(0.58870).epsilon(2e-5));
  }
  SUBCASE("R scales under the square root") {
    const auto b1 = erc_bound(2, 4, 1, Exponent(2.0), std::nullopt, 1.0, true);
    const auto b9 = erc_bound(2, 4, 1, Exponent(2.0), std::nullopt, 9.0, true);
    CHECK(b9.value == doctest::Approx(3.0 * b1.value).epsilon(1e-12));
  }
}

TEST_CASE("multi-kernel bound branches") {
  // r* = 2 <= ln 8: the small-r* branch with the M^(1/r*) factor
  const auto small =
      erc_bound(8, 4, 4, Exponent(2.0), Exponent(2.0), 1.0, true);
  CHECK(small.branch == BoundBranch::multi_small_rstar);
  CHECK(small.rho == 2.0 * std::log(8.0));
  {
    const auto base = erc_bound(8, 4, 1, Exponent(2.0), std::nullopt, 1.0, true);
    CHECK(small.value ==
          doctest::Approx(base.value * std::pow(4.0, 0.25)).epsilon(1e-12));
  }

  // r = 1 gives r* = inf >= ln(MT): the large-r* branch, rho = 2 ln MT
  const auto large =
      erc_bound(2, 4, 2, Exponent(2.0), Exponent(1.0), 1.0, true);
  CHECK(large.branch == BoundBranch::multi_large_rstar);
  CHECK(large.rho == 2.0 * std::log(4.0));
  // tau = (max{2, rho*})* with rho = 2 ln 4 > 2 so rho* < 2 and tau = s* = 2;
  // M^(2/tau) = 2
  CHECK(large.tau == 2.0);
  CHECK(large.value ==
        doctest::Approx(0.5 * std::sqrt(2.0 * 1.0 * 2.0 * 2.0)).epsilon(1e-12));

  // ln T < r* < ln(MT): the general form
  const auto gen = erc_bound(2, 4, 8, Exponent(2.0), Exponent(2.0), 1.0, true);
  CHECK(gen.branch == BoundBranch::multi_general);
  const double expect =
      0.5 * std::sqrt(1.0 * 2.0 * 2.0 * std::pow(8.0, 1.0));  // M^max{1/2,1}
  CHECK(gen.value == doctest::Approx(expect).epsilon(1e-12));

  // T = 1 has no finite formula
  const auto t1 = erc_bound(1, 5, 2, Exponent(2.0), Exponent(2.0), 1.0, true);
  CHECK(t1.status == BoundStatus::unavailable);
  CHECK(std::isnan(t1.value));
}

TEST_CASE("multi-kernel estimate with one kernel matches single") {
  const auto data = gaussian_tasks(2, 8, 2, 31);
  const auto g = build_gram(data, {KernelSpec::gaussian(1.0)});
  const int D = 100;
  const auto quads = sigma_quadratics(g, 7, D, 1);
  for (const auto& s : {Exponent(2.0), Exponent(4.0), Exponent::infinity()}) {
    auto ps = params(s, std::nullopt, D, 7);
    const auto single = erc_single_from_samples(quads, ps, true);
    for (const auto& r : {Exponent(1.0), Exponent(2.0), Exponent::infinity()}) {
      auto pm = params(s, r, D, 7);
      const auto multi = erc_multi_from_samples(quads, pm, true);
      CHECK(multi.estimate == doctest::Approx(single.estimate).epsilon(1e-9));
      CHECK(multi.excluded_samples == 0);
    }
  }
}

TEST_CASE("multi-kernel estimate requires s >= 2 and an r exponent") {
  const auto data = gaussian_tasks(2, 6, 2, 3);
  const auto g =
      build_gram(data, {KernelSpec::gaussian(1.0), KernelSpec::gaussian(4.0)});
  const auto quads = sigma_quadratics(g, 1, 10, 1);
  auto bad_s = params(Exponent(1.5), Exponent(1.0), 10, 1);
  CHECK_THROWS_AS(erc_multi_from_samples(quads, bad_s, true),
                  UnsupportedExponent);
  auto no_r = params(Exponent(2.0), std::nullopt, 10, 1);
  CHECK_THROWS_AS(erc_multi_from_samples(quads, no_r, true), InvalidDataset);
}

TEST_CASE("single-task multi-kernel estimate matches the Holder closed form") {
  // With T = 1 the inner problem is sup over the r-ball of theta'u raised
  // to 1/2, i.e. sqrt(||u||_{r*}).
  const auto data = gaussian_tasks(1, 6, 2, 47);
  const auto g =
      build_gram(data, {KernelSpec::gaussian(1.0), KernelSpec::gaussian(0.5)});
  const int D = 40;
  const std::uint64_t seed = 19;
  const auto quads = sigma_quadratics(g, seed, D, 1);
  for (const auto& r : {Exponent(1.0), Exponent(2.0)}) {
    auto p = params(Exponent(2.0), r, D, seed, /*keep=*/true);
    const auto rep = erc_multi_from_samples(quads, p, true);
    REQUIRE(rep.per_sample.size() == D);
    double closed_mean = 0.0;
    for (int d = 0; d < D; ++d) {
      const Eigen::VectorXd u = quads.quad[static_cast<std::size_t>(d)]
                                    .row(0)
                                    .transpose()
                                    .cwiseMax(0.0);
      const double closed = std::sqrt(lp_norm(u, dual_exponent(r)));
      CHECK(rep.per_sample[d] == doctest::Approx(closed).epsilon(1e-6));
      CHECK(rep.per_sample[d] <= closed + 1e-9);  // never above the optimum
      closed_mean += closed;
    }
    closed_mean *= 2.0 / (1.0 * 6.0 * D);
    CHECK(rep.estimate == doctest::Approx(closed_mean).epsilon(1e-6));

    // a theta grid cannot beat the optimizer by more than slack
    for (int d = 0; d < 6; ++d) {
      const Eigen::VectorXd u = quads.quad[static_cast<std::size_t>(d)]
                                    .row(0)
                                    .transpose()
                                    .cwiseMax(0.0);
      double grid_best = 0.0;
      for (double a = 0.0; a <= 1.0 + 1e-12; a += 2e-3) {
        for (double b = 0.0; b <= 1.0 + 1e-12; b += 2e-3) {
          Eigen::Vector2d th(a, b);
          if (lp_norm(th, r) > 1.0) continue;
          grid_best = std::max(grid_best, th.dot(u));
        }
      }
      CHECK(rep.per_sample[d] >= std::sqrt(grid_best) - 1e-5);
    }
  }
}

TEST_CASE("bound dominates the estimate on a normalized fixture") {
  const auto data = gaussian_tasks(3, 16, 3, 71);
  const auto g = build_gram(data, {KernelSpec::gaussian(1.0)});
  const auto quads = sigma_quadratics(g, 29, 300, 1);
  for (const auto& s :
       {Exponent(1.0), Exponent(2.0), Exponent(7.0), Exponent::infinity()}) {
    auto p = params(s, std::nullopt, 300, 29);
    const auto rep = erc_single_from_samples(quads, p, true);
    REQUIRE(rep.bound.status == BoundStatus::ok);
    CHECK(rep.bound.value >= rep.estimate - 3.0 * rep.std_error);
  }
}

TEST_CASE("unequal task sizes are rejected with guidance") {
  GramStack g;
  g.mats = {{Eigen::MatrixXd::Identity(3, 3)},
            {Eigen::MatrixXd::Identity(5, 5)}};
  g.task_sizes = {3, 5};
  g.max_diag = 1.0;
  CHECK_THROWS_WITH_AS(
      erc_single_kernel(g, params(Exponent(2.0), std::nullopt, 10, 0)),
      doctest::Contains("--subsample-to-min"), InvalidDataset);
}

TEST_CASE("generalization bound arithmetic") {
  const double v = generalization_bound(0.1, 0.2, 1.0, 0.05, 2, 4);
  const double expect = 0.1 + 0.2 + std::sqrt(9.0 * std::log(40.0) / 16.0);
  CHECK(v == doctest::Approx(expect).epsilon(1e-12));
  CHECK(v == doctest::Approx(1.74049).epsilon(1e-4));
  CHECK_THROWS_AS(generalization_bound(0.1, 0.2, 0.0, 0.05, 2, 4),
                  NumericError);
  CHECK_THROWS_AS(generalization_bound(0.1, 0.2, 1.0, 1.5, 2, 4),
                  NumericError);
}

TEST_CASE("ramp loss shape") {
  CHECK(ramp_loss(2.0) == 0.0);
  CHECK(ramp_loss(1.0) == 0.0);
  CHECK(ramp_loss(0.5) == 0.5);
  CHECK(ramp_loss(0.0) == 1.0);
  CHECK(ramp_loss(-3.0) == 1.0);
}

TEST_CASE("erc report is reproducible under a fixed seed") {
  const auto data = gaussian_tasks(2, 10, 2, 13);
  const auto g = build_gram(data, {KernelSpec::gaussian(1.0)});
  const auto a = erc_single_kernel(g, params(Exponent(2.0), std::nullopt, 60, 5));
  const auto b = erc_single_kernel(g, params(Exponent(2.0), std::nullopt, 60, 5));
  CHECK(a.estimate == b.estimate);
  CHECK(a.std_error == b.std_error);
  const auto c = erc_single_kernel(g, params(Exponent(2.0), std::nullopt, 60, 5,
                                             false, 4));
  CHECK(a.estimate == c.estimate);
}
