#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Cholesky>
#include <cmath>

#include "mtsvm/errors.hpp"
#include "mtsvm/kernels.hpp"
#include "mtsvm/rng.hpp"

using namespace mtsvm;

namespace {

Eigen::MatrixXd random_matrix(CounterRng& rng, Eigen::Index n, Eigen::Index d) {
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = rng.next_gaussian();
  }
  return X;
}

MultiTaskDataset one_task(const Eigen::MatrixXd& X) {
  MultiTaskDataset data;
  TaskData t;
  t.name = "t0";
  t.features = X;
  t.labels = Eigen::VectorXd::Ones(X.rows());
  if (X.rows() > 1) t.labels[0] = -1.0;
  data.tasks.push_back(std::move(t));
  return data;
}

}  // namespace

TEST_CASE("kernel spec validation") {
  CHECK_THROWS_AS(KernelSpec::gaussian(0.0).validate(), NumericError);
  CHECK_THROWS_AS(KernelSpec::gaussian(-2.0).validate(), NumericError);
  CHECK_THROWS_AS(KernelSpec::polynomial(0).validate(), NumericError);
  CHECK_NOTHROW(KernelSpec::gaussian(128.0).validate());
  CHECK_NOTHROW(KernelSpec::polynomial(2).validate());
  CHECK_NOTHROW(KernelSpec::linear().validate());
}

TEST_CASE("gaussian diagonal is exactly one") {
  CounterRng rng(7);
  const auto X = random_matrix(rng, 12, 3);
  for (double spread : {0.0078125, 1.0, 128.0}) {
    const auto K = kernel_matrix(KernelSpec::gaussian(spread), X);
    for (Eigen::Index i = 0; i < K.rows(); ++i) {
      CHECK(K(i, i) == 1.0);
    }
    CHECK(K.minCoeff() >= 0.0);
    CHECK(K.maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("gaussian matches the pointwise formula") {
  Eigen::MatrixXd X(2, 2);
  X << 0.0, 0.0, 3.0, 4.0;
  const double spread = 2.0;
  const auto K = kernel_matrix(KernelSpec::gaussian(spread), X);
  const double expected = std::exp(-25.0 / (2.0 * spread * spread));
  CHECK(K(0, 1) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(K(1, 0) == K(0, 1));
}

TEST_CASE("linear kernel on orthonormal rows is the identity") {
  Eigen::MatrixXd X(2, 2);
  X << 1.0, 0.0, 0.0, 1.0;
  const auto K = kernel_matrix(KernelSpec::linear(), X);
  CHECK(K(0, 0) == 1.0);
  CHECK(K(1, 1) == 1.0);
  CHECK(K(0, 1) == 0.0);
  CHECK(K(1, 0) == 0.0);
}

TEST_CASE("normalized linear kernel has unit self-similarity") {
  Eigen::MatrixXd X(1, 2);
  X << 3.0, 4.0;
  const auto K = kernel_matrix(KernelSpec::linear(/*normalize=*/true), X);
  CHECK(K(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("polynomial kernel closed form") {
  Eigen::MatrixXd X(2, 1);
  X << 1.0, 2.0;
  const auto K = kernel_matrix(KernelSpec::polynomial(2), X);
  // (x.y + 1)^2
  CHECK(K(0, 0) == doctest::Approx(4.0));
  CHECK(K(0, 1) == doctest::Approx(9.0));
  CHECK(K(1, 1) == doctest::Approx(25.0));
}

TEST_CASE("gram matrices are symmetric and PSD") {
  CounterRng rng(42);
  const std::vector<KernelSpec> specs = {
      KernelSpec::gaussian(0.5), KernelSpec::linear(),
      KernelSpec::linear(true), KernelSpec::polynomial(2),
      KernelSpec::polynomial(3, true)};
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.next_below(46));
    const auto X = random_matrix(rng, n, 4);
    for (const auto& spec : specs) {
      const auto K = kernel_matrix(spec, X);
      CHECK((K - K.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
      const Eigen::MatrixXd shifted =
          K + 1e-8 * Eigen::MatrixXd::Identity(n, n);
      Eigen::LLT<Eigen::MatrixXd> llt(shifted);
      CHECK(llt.info() == Eigen::Success);
    }
  }
}

TEST_CASE("build_gram shapes, validation, and max_diag") {
  CounterRng rng(11);
  MultiTaskDataset data;
  for (int t = 0; t < 3; ++t) {
    TaskData task;
    task.name = "t" + std::to_string(t);
    task.features = random_matrix(rng, 4 + t, 2);
    task.labels = Eigen::VectorXd::Ones(4 + t);
    task.labels[0] = -1.0;
    data.tasks.push_back(std::move(task));
  }
  const auto g = build_gram(
      data, {KernelSpec::gaussian(1.0), KernelSpec::polynomial(2)});
  CHECK(g.num_tasks() == 3);
  CHECK(g.num_kernels() == 2);
  CHECK(g.task_sizes == std::vector<Eigen::Index>{4, 5, 6});
  CHECK_FALSE(g.equal_task_sizes());
  CHECK_THROWS_AS((void)g.common_task_size(), InvalidDataset);
  CHECK(g.max_diag > 1.0);  // unnormalized polynomial diagonal
  CHECK_NOTHROW(g.validate());
}

TEST_CASE("bound assumption gate") {
  Eigen::MatrixXd X(1, 2);
  X << 3.0, 4.0;
  const auto data = one_task(X);

  const auto unnorm = build_gram(data, {KernelSpec::linear()});
  CHECK(unnorm.mats[0][0](0, 0) == 25.0);
  CHECK_FALSE(check_bound_assumption(unnorm));

  const auto norm = build_gram(data, {KernelSpec::linear(true)});
  CHECK(check_bound_assumption(norm));

  // scaling the offending stack by 1/25 restores the assumption
  GramStack scaled = unnorm;
  scaled.mats[0][0] /= 25.0;
  scaled.max_diag /= 25.0;
  CHECK(check_bound_assumption(scaled));

  const auto gauss = build_gram(data, {KernelSpec::gaussian(2.0)});
  CHECK(check_bound_assumption(gauss));
}

TEST_CASE("non-finite features are rejected") {
  Eigen::MatrixXd X(2, 2);
  X << 1.0, 2.0, std::numeric_limits<double>::quiet_NaN(), 0.0;
  const auto data = one_task(X);
  CHECK_THROWS_AS(build_gram(data, {KernelSpec::linear()}), NumericError);
}

TEST_CASE("kernel spec JSON round trip") {
  const std::vector<KernelSpec> specs = {
      KernelSpec::gaussian(128.0), KernelSpec::linear(true),
      KernelSpec::polynomial(3)};
  for (const auto& spec : specs) {
    const auto j = kernel_spec_to_json(spec);
    const auto back = kernel_spec_from_json(j, /*default_normalize=*/false);
    CHECK(back.kind == spec.kind);
    CHECK(back.spread == spec.spread);
    CHECK(back.degree == spec.degree);
    CHECK(back.normalize == spec.normalize);
  }
}

TEST_CASE("kernel spec JSON parsing") {
  using nlohmann::json;
  const auto g = kernel_spec_from_json(
      json{{"kind", "gaussian"}, {"spread", 128.0}}, true);
  CHECK(g.kind == KernelKind::gaussian);
  CHECK(g.spread == 128.0);
  CHECK_FALSE(g.normalize);  // gaussian is already unit-diagonal

  const auto l = kernel_spec_from_json(json{{"kind", "linear"}}, true);
  CHECK(l.normalize);  // default_normalize fills the gap
  const auto l2 = kernel_spec_from_json(json{{"kind", "linear"}}, false);
  CHECK_FALSE(l2.normalize);

  const auto p = kernel_spec_from_json(
      json{{"kind", "polynomial"}, {"degree", 2}, {"normalize", true}}, false);
  CHECK(p.degree == 2);
  CHECK(p.normalize);

  CHECK_THROWS_AS(kernel_spec_from_json(json{{"kind", "rbf"}}, false),
                  ParseError);
  CHECK_THROWS_AS(kernel_spec_from_json(json::array(), false), ParseError);
}

TEST_CASE("kernel_column agrees with kernel_matrix") {
  CounterRng rng(5);
  const auto X = random_matrix(rng, 8, 3);
  const std::vector<KernelSpec> specs = {
      KernelSpec::gaussian(1.5), KernelSpec::linear(true),
      KernelSpec::polynomial(2, true), KernelSpec::linear(),
      KernelSpec::polynomial(3)};
  for (const auto& spec : specs) {
    const auto K = kernel_matrix(spec, X);
    for (Eigen::Index q = 0; q < X.rows(); ++q) {
      const Eigen::VectorXd col = kernel_column(spec, X, X.row(q));
      CHECK((col - K.col(q)).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}
