#include "mtsvm/kernels.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

namespace mtsvm {

KernelSpec KernelSpec::gaussian(double spread) {
  KernelSpec s;
  s.kind = KernelKind::gaussian;
  s.spread = spread;
  s.validate();
  return s;
}

KernelSpec KernelSpec::linear(bool normalize) {
  KernelSpec s;
  s.kind = KernelKind::linear;
  s.normalize = normalize;
  return s;
}

KernelSpec KernelSpec::polynomial(int degree, bool normalize) {
  KernelSpec s;
  s.kind = KernelKind::polynomial;
  s.degree = degree;
  s.normalize = normalize;
  s.validate();
  return s;
}

void KernelSpec::validate() const {
  if (kind == KernelKind::gaussian && !(spread > 0.0)) {
    throw NumericError("gaussian kernel needs spread > 0");
  }
  if (kind == KernelKind::polynomial && degree < 1) {
    throw NumericError("polynomial kernel needs degree >= 1");
  }
}

double KernelSpec::eval_raw(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                            const Eigen::Ref<const Eigen::RowVectorXd>& y) const {
  switch (kind) {
    case KernelKind::gaussian: {
      const double d2 = (x - y).squaredNorm();
      return std::exp(-d2 / (2.0 * spread * spread));
    }
    case KernelKind::linear:
      return x.dot(y);
    case KernelKind::polynomial:
      return std::pow(x.dot(y) + 1.0, degree);
  }
  return 0.0;
}

std::string KernelSpec::describe() const {
  std::ostringstream os;
  switch (kind) {
    case KernelKind::gaussian:
      os << "gaussian(" << spread << ")";
      break;
    case KernelKind::linear:
      os << "linear";
      break;
    case KernelKind::polynomial:
      os << "poly(" << degree << ")";
      break;
  }
  if (normalize && kind != KernelKind::gaussian) os << "+norm";
  return os.str();
}

KernelSpec kernel_spec_from_json(const nlohmann::json& j,
                                 bool default_normalize) {
  if (!j.is_object() || !j.contains("kind")) {
    throw ParseError("kernel spec must be an object with a \"kind\" field");
  }
  const std::string kind = j.at("kind").get<std::string>();
  KernelSpec s;
  if (kind == "gaussian") {
    s.kind = KernelKind::gaussian;
    if (!j.contains("spread")) {
      throw ParseError("gaussian kernel spec needs \"spread\"");
    }
    s.spread = j.at("spread").get<double>();
  } else if (kind == "linear") {
    s.kind = KernelKind::linear;
  } else if (kind == "polynomial") {
    s.kind = KernelKind::polynomial;
    if (!j.contains("degree")) {
      throw ParseError("polynomial kernel spec needs \"degree\"");
    }
    s.degree = j.at("degree").get<int>();
  } else {
    throw ParseError("unknown kernel kind '" + kind + "'");
  }
  if (j.contains("normalize")) {
    s.normalize = j.at("normalize").get<bool>();
  } else {
    s.normalize = kind == "gaussian" ? false : default_normalize;
  }
  s.validate();
  return s;
}

nlohmann::json kernel_spec_to_json(const KernelSpec& spec) {
  nlohmann::json j;
  switch (spec.kind) {
    case KernelKind::gaussian:
      j["kind"] = "gaussian";
      j["spread"] = spec.spread;
      break;
    case KernelKind::linear:
      j["kind"] = "linear";
      break;
    case KernelKind::polynomial:
      j["kind"] = "polynomial";
      j["degree"] = spec.degree;
      break;
  }
  j["normalize"] = spec.normalize;
  return j;
}

bool GramStack::equal_task_sizes() const {
  for (const auto n : task_sizes) {
    if (n != task_sizes.front()) return false;
  }
  return true;
}

Eigen::Index GramStack::common_task_size() const {
  if (task_sizes.empty()) throw InvalidDataset("empty Gram stack");
  if (!equal_task_sizes()) {
    throw InvalidDataset(
        "tasks have unequal sizes; subsample to the minimum first "
        "(--subsample-to-min)");
  }
  return task_sizes.front();
}

void GramStack::validate() const {
  if (mats.empty()) throw InvalidDataset("empty Gram stack");
  for (std::size_t t = 0; t < mats.size(); ++t) {
    for (std::size_t m = 0; m < mats[t].size(); ++m) {
      const auto& K = mats[t][m];
      if (K.rows() != K.cols() || K.rows() != task_sizes[t]) {
        throw InvalidDataset("Gram matrix shape mismatch");
      }
      if (!K.allFinite()) {
        throw NumericError("Gram matrix has non-finite entries");
      }
      const double asym = (K - K.transpose()).cwiseAbs().maxCoeff();
      if (asym > 1e-10) {
        throw NumericError("Gram matrix asymmetric beyond tolerance");
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
          K, Eigen::EigenvaluesOnly);
      const double min_eig = es.eigenvalues().minCoeff();
      const double floor =
          -1e-8 * std::max(1e-30, K.trace()) / static_cast<double>(K.rows());
      if (min_eig < floor) {
        throw NumericError("Gram matrix not PSD within tolerance");
      }
    }
  }
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec,
                              const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  if (spec.kind == KernelKind::gaussian) {
    const Eigen::VectorXd sq = X.rowwise().squaredNorm();
    K.noalias() = -2.0 * X * X.transpose();
    K.colwise() += sq;
    K.rowwise() += sq.transpose();
    K = (-K.cwiseMax(0.0) / (2.0 * spec.spread * spec.spread)).array().exp();
  } else {
    K.noalias() = X * X.transpose();
    if (spec.kind == KernelKind::polynomial) {
      K = (K.array() + 1.0).pow(spec.degree);
    }
    if (spec.normalize) {
      Eigen::VectorXd d = K.diagonal();
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!(d[i] > 0.0)) {
          throw NumericError(
              "cannot normalize kernel with non-positive self-similarity");
        }
        d[i] = 1.0 / std::sqrt(d[i]);
      }
      K = d.asDiagonal() * K * d.asDiagonal();
      K.diagonal().setOnes();
    }
  }
  K = 0.5 * (K + K.transpose()).eval();
  return K;
}

Eigen::VectorXd kernel_column(const KernelSpec& spec, const Eigen::MatrixXd& X,
                              const Eigen::Ref<const Eigen::RowVectorXd>& q) {
  const Eigen::Index n = X.rows();
  Eigen::VectorXd col(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    col[i] = spec.eval_raw(X.row(i), q);
  }
  if (spec.normalize && spec.kind != KernelKind::gaussian) {
    const double kqq = spec.eval_raw(q, q);
    if (!(kqq > 0.0)) {
      throw NumericError(
          "cannot normalize kernel with non-positive self-similarity");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double kii = spec.eval_raw(X.row(i), X.row(i));
      if (!(kii > 0.0)) {
        throw NumericError(
            "cannot normalize kernel with non-positive self-similarity");
      }
      col[i] /= std::sqrt(kii * kqq);
    }
  }
  return col;
}

GramStack build_gram(const MultiTaskDataset& data,
                     const std::vector<KernelSpec>& specs) {
  data.validate();
  if (specs.empty()) throw InvalidDataset("no kernel specs given");
  for (const auto& s : specs) s.validate();
  for (const auto& task : data.tasks) {
    if (!task.features.allFinite()) {
      throw NumericError("task " + task.name + " has non-finite features");
    }
  }

  GramStack g;
  g.task_sizes = data.task_sizes();
  g.mats.resize(data.tasks.size());
  double max_diag = 0.0;
  for (std::size_t t = 0; t < data.tasks.size(); ++t) {
    g.mats[t].reserve(specs.size());
    for (const auto& spec : specs) {
      Eigen::MatrixXd K = kernel_matrix(spec, data.tasks[t].features);
      max_diag = std::max(max_diag, K.diagonal().maxCoeff());
      g.mats[t].push_back(std::move(K));
    }
  }
  g.max_diag = max_diag;
  g.validate();
  return g;
}

bool check_bound_assumption(const GramStack& g) {
  return g.max_diag <= 1.0 + 1e-12;
}

}  // namespace mtsvm
