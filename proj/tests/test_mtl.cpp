#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "mtsvm/dataset.hpp"
#include "mtsvm/errors.hpp"
#include "mtsvm/kernels.hpp"
#include "mtsvm/mtl.hpp"
#include "mtsvm/norms.hpp"
#include "mtsvm/rng.hpp"
#include "mtsvm/svm_dual.hpp"

using namespace mtsvm;

namespace {

MultiTaskDataset random_tasks(int T, int N, int d, std::uint64_t seed,
                              double shift = 1.0) {
  MultiTaskDataset data;
  for (int t = 0; t < T; ++t) {
    CounterRng rng(seed, static_cast<std::uint64_t>(t), 0);
    TaskData task;
    task.name = "t" + std::to_string(t);
    task.features.resize(N, d);
    task.labels.resize(N);
    for (int i = 0; i < N; ++i) {
      const double y = i % 2 == 0 ? 1.0 : -1.0;
      for (int j = 0; j < d; ++j) {
        task.features(i, j) = rng.next_gaussian() + y * shift;
      }
      task.labels[i] = y;
    }
    data.tasks.push_back(std::move(task));
  }
  return data;
}

Eigen::VectorXd task_w_norms(const MtlModel& model,
                             const MultiTaskDataset& data) {
  Eigen::VectorXd out(model.num_tasks());
  for (Eigen::Index t = 0; t < model.num_tasks(); ++t) {
    const auto& tm = model.tasks[static_cast<std::size_t>(t)];
    if (tm.degenerate) {
      out[t] = 0.0;
      continue;
    }
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(tm.alpha.size(), tm.alpha.size());
    for (std::size_t m = 0; m < model.kernels.size(); ++m) {
      K += model.kernel_weights[static_cast<Eigen::Index>(m)] *
           kernel_matrix(model.kernels[m],
                         data.tasks[static_cast<std::size_t>(t)].features);
    }
    const Eigen::VectorXd yk = tm.alpha.cwiseProduct(tm.support_labels);
    out[t] = tm.scale * std::sqrt(std::max(0.0, yk.dot(K * yk)));
  }
  return out;
}

}  // namespace

TEST_CASE("s = 2 decouples into independent per-task machines") {
  const auto data = random_tasks(3, 14, 2, 3);
  const auto kernel = KernelSpec::gaussian(1.0);
  const double C = 1.7;
  TrainOptions opts;
  opts.inner_tol = 1e-10;
  const auto model = train_mtl(data, kernel, Exponent(2.0), C, opts);
  REQUIRE(model.num_tasks() == 3);
  CHECK(model.task_weights.isApproxToConstant(1.0, 1e-12));

  const auto g = build_gram(data, {kernel});
  for (std::size_t t = 0; t < 3; ++t) {
    const auto solo =
        solve_svm_dual(g.mats[t][0], data.tasks[t].labels, C, 1e-10);
    CHECK((model.tasks[t].alpha - solo.alpha).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(model.tasks[t].b == doctest::Approx(solo.b).epsilon(1e-8));
    CHECK(model.tasks[t].scale == 1.0);
  }
}

TEST_CASE("small-s coupling weights") {
  SUBCASE("closed form at s = 1") {
    Eigen::VectorXd w(2);
    w << 1.0, 2.0;
    const auto lam = small_s_task_weights(w, Exponent(1.0));
    CHECK(lam[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
    CHECK(lam[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
    CHECK(lp_norm(lam, Exponent(1.0)) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("grid oracle: the update minimizes the weighted square sum") {
    Eigen::VectorXd w(2);
    w << 0.8, 1.7;
    for (const double s : {1.0, 1.3, 1.8}) {
      const auto lam = small_s_task_weights(w, Exponent(s));
      const double p = s / (2.0 - s);
      const auto cost = [&](double l0, double l1) {
        return w[0] * w[0] / (2.0 * l0) + w[1] * w[1] / (2.0 * l1);
      };
      const double mine = cost(lam[0], lam[1]);
      double best = mine;
      for (double l0 = 1e-3; l0 < 1.0; l0 += 1e-3) {
        const double rem = 1.0 - std::pow(l0, p);
        if (rem <= 0.0) break;
        const double l1 = std::pow(rem, 1.0 / p);
        best = std::min(best, cost(l0, l1));
      }
      CHECK(mine <= best + 1e-5);
      CHECK(lp_norm(lam, Exponent(p)) == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  SUBCASE("s = 2 gives unit weights, zero input gives uniform") {
    Eigen::VectorXd w(3);
    w << 0.3, 5.0, 1.1;
    CHECK(small_s_task_weights(w, Exponent(2.0)).isApproxToConstant(1.0));
    const auto lam =
        small_s_task_weights(Eigen::VectorXd::Zero(3), Exponent(1.0));
    CHECK(lam.isApproxToConstant(1.0 / 3.0, 1e-12));
  }
}

TEST_CASE("large-s coupling weights") {
  Eigen::VectorXd g(2);
  g << 3.0, 4.0;
  SUBCASE("s = 4 maps to the Euclidean ball") {
    const auto lam = large_s_task_weights(g, Exponent(4.0));
    CHECK(lam[0] == 0.6);
    CHECK(lam[1] == 0.8);
  }
  SUBCASE("s = inf puts all mass on the best task") {
    const auto lam = large_s_task_weights(g, Exponent::infinity());
    CHECK(lam[0] == 0.0);
    CHECK(lam[1] == 1.0);
  }
  SUBCASE("all-zero objectives give uniform weights") {
    const auto lam =
        large_s_task_weights(Eigen::VectorXd::Zero(4), Exponent(4.0));
    CHECK(lam.isApproxToConstant(std::pow(4.0, -0.5), 1e-12));
  }
}

TEST_CASE("identical tasks share the coupling weight") {
  auto data = random_tasks(1, 12, 2, 8);
  for (int copy = 0; copy < 3; ++copy) {
    data.tasks.push_back(data.tasks[0]);
    data.tasks.back().name = "copy" + std::to_string(copy);
  }
  TrainOptions opts;
  opts.max_outer = 300;
  opts.tol = 1e-12;
  const auto model =
      train_small_s(data, KernelSpec::gaussian(1.0), Exponent(1.5), 1.0, opts);
  for (Eigen::Index t = 1; t < 4; ++t) {
    CHECK(model.task_weights[t] ==
          doctest::Approx(model.task_weights[0]).epsilon(1e-9));
    CHECK((model.tasks[static_cast<std::size_t>(t)].alpha -
           model.tasks[0].alpha)
              .cwiseAbs()
              .maxCoeff() <= 1e-6);
  }
}

TEST_CASE("near-infinite s concentrates weight on the strongest task") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    // one large overlapping task dominates the dual objective; the small
    // well-separated tasks stay cheap even with a loose box
    MultiTaskDataset data;
    auto big = random_tasks(1, 20, 2, seed, 0.15);
    big.tasks[0].name = "big";
    data.tasks.push_back(big.tasks[0]);
    for (int t = 0; t < 2; ++t) {
      auto easy = random_tasks(1, 6, 2, seed + 10 * (t + 1), 3.0);
      easy.tasks[0].name = "easy" + std::to_string(t);
      data.tasks.push_back(easy.tasks[0]);
    }
    TrainOptions opts;
    opts.max_outer = 400;
    opts.tol = 1e-12;
    const auto model = train_large_s(data, KernelSpec::gaussian(1.0),
                                     Exponent(1e4), 1.0, opts);

    Eigen::Index wmax = 0;
    model.task_weights.maxCoeff(&wmax);

    // per-task dual objectives recomputed from the stored expansions
    const auto g = build_gram(data, {KernelSpec::gaussian(1.0)});
    Eigen::VectorXd duals(3);
    for (std::size_t t = 0; t < 3; ++t) {
      duals[static_cast<Eigen::Index>(t)] =
          dual_objective(g.mats[t][0], data.tasks[t].labels,
                         model.tasks[t].alpha);
    }
    Eigen::Index dmax = 0;
    duals.maxCoeff(&dmax);
    CHECK(wmax == dmax);
    CHECK(model.task_weights[wmax] == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("interior support vectors sit on the coupled margin") {
  const auto data = random_tasks(2, 16, 2, 21, 0.6);
  TrainOptions opts;
  opts.max_outer = 300;
  opts.tol = 1e-12;
  opts.inner_tol = 1e-10;
  const double C = 2.0;
  const auto model =
      train_small_s(data, KernelSpec::gaussian(1.0), Exponent(1.3), C, opts);
  int checked = 0;
  for (std::size_t t = 0; t < 2; ++t) {
    const Eigen::VectorXd f =
        predict_task(model, static_cast<Eigen::Index>(t),
                     data.tasks[t].features);
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const double a = model.tasks[t].alpha[i];
      if (a > 1e-6 && a < C - 1e-6) {
        CHECK(data.tasks[t].labels[i] * f[i] ==
              doctest::Approx(1.0).epsilon(1e-5));
        ++checked;
      }
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("linear-kernel model matches its explicit weight vector") {
  const auto data = random_tasks(2, 12, 3, 31, 1.4);
  TrainOptions opts;
  opts.inner_tol = 1e-10;
  const auto model =
      train_mtl(data, KernelSpec::linear(), Exponent(2.0), 50.0, opts);
  for (std::size_t t = 0; t < 2; ++t) {
    const auto& tm = model.tasks[t];
    const Eigen::VectorXd w =
        tm.support_features.transpose() *
        tm.alpha.cwiseProduct(tm.support_labels) * tm.scale;
    for (Eigen::Index i = 0; i < data.tasks[t].features.rows(); ++i) {
      const double by_hand = data.tasks[t].features.row(i).dot(w) + tm.b;
      const double by_model =
          predict(model, static_cast<Eigen::Index>(t),
                  data.tasks[t].features.row(i));
      CHECK(by_model == doctest::Approx(by_hand).epsilon(1e-8));
    }
  }
}

TEST_CASE("small-s objective trace never increases") {
  const auto data = random_tasks(3, 14, 2, 41, 0.7);
  for (const double s : {1.0, 1.3, 1.7, 2.0}) {
    TrainOptions opts;
    opts.max_outer = 120;
    opts.tol = 1e-10;
    const auto model =
        train_small_s(data, KernelSpec::gaussian(1.0), Exponent(s), 1.0, opts);
    CHECK(model.diag.objective_increases == 0);
    const auto& tr = model.diag.objective_trace;
    REQUIRE(tr.size() >= 1);
    for (std::size_t k = 1; k < tr.size(); ++k) {
      CHECK(tr[k] <= tr[k - 1] + 1e-10);
    }
    // the reported trace ends at the assembled model's objective
    CHECK(objective_value(model, data) ==
          doctest::Approx(tr.back()).epsilon(1e-6));
  }
}

TEST_CASE("coupling weights reach the fixed point of the norm map") {
  const auto data = random_tasks(3, 12, 2, 51, 0.8);
  TrainOptions opts;
  opts.max_outer = 500;
  opts.tol = 1e-13;
  opts.inner_tol = 1e-10;
  const Exponent s(1.5);
  const auto model =
      train_small_s(data, KernelSpec::gaussian(1.0), s, 1.0, opts);
  const Eigen::VectorXd w = task_w_norms(model, data);
  const Eigen::VectorXd lam = small_s_task_weights(w, s);
  CHECK((lam - model.task_weights).cwiseAbs().maxCoeff() <= 1e-5);
  CHECK(lp_norm(model.task_weights, Exponent(3.0)) ==
        doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("zero regularization cost gives the zero model") {
  const auto data = random_tasks(2, 8, 2, 61);
  const auto model =
      train_mtl(data, KernelSpec::gaussian(1.0), Exponent(1.5), 0.0, {});
  for (const auto& tm : model.tasks) {
    CHECK(tm.alpha.cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(objective_value(model, data) == 0.0);
}

TEST_CASE("degenerate tasks train as constants") {
  auto data = random_tasks(2, 8, 2, 71);
  data.tasks[1].labels.setOnes();
  const auto model =
      train_mtl(data, KernelSpec::gaussian(1.0), Exponent(2.0), 1.0, {});
  CHECK_FALSE(model.tasks[0].degenerate);
  CHECK(model.tasks[1].degenerate);
  CHECK(model.tasks[1].b == 1.0);
  Eigen::RowVectorXd x(2);
  x << 0.3, -0.4;
  CHECK(predict(model, 1, x) == 1.0);
  // full accuracy on the constant task
  Eigen::VectorXd f = predict_task(model, 1, data.tasks[1].features);
  CHECK((f.array() > 0).all());
}

TEST_CASE("prediction rejects out-of-range task indices") {
  const auto data = random_tasks(2, 6, 2, 81);
  const auto model =
      train_mtl(data, KernelSpec::gaussian(1.0), Exponent(2.0), 1.0, {});
  Eigen::RowVectorXd x(2);
  x << 0.0, 0.0;
  CHECK_THROWS_AS(predict(model, 2, x), InvalidTask);
  CHECK_THROWS_AS(predict(model, -1, x), InvalidTask);
}

TEST_CASE("ramp error and accuracy on a separable fit") {
  const auto data = random_tasks(2, 10, 2, 91, 2.5);
  TrainOptions opts;
  opts.inner_tol = 1e-10;
  const auto model =
      train_mtl(data, KernelSpec::linear(), Exponent(2.0), 500.0, opts);
  CHECK(mean_task_accuracy(model, data) == 1.0);
  CHECK(empirical_ramp_error(model, data) <= 1e-3);
  CHECK_THROWS_AS(empirical_ramp_error(model, data, 0.0), NumericError);
}

TEST_CASE("exponent domain guards") {
  const auto data = random_tasks(2, 6, 2, 99);
  CHECK_THROWS_AS(train_small_s(data, KernelSpec::gaussian(1.0),
                                Exponent(2.5), 1.0, {}),
                  UnsupportedExponent);
  CHECK_THROWS_AS(train_large_s(data, KernelSpec::gaussian(1.0),
                                Exponent(2.0), 1.0, {}),
                  UnsupportedExponent);
}
