#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "json.hpp"

#include "mtsvm/dataset.hpp"
#include "mtsvm/errors.hpp"

namespace mtsvm {

enum class KernelKind { gaussian, linear, polynomial };

// Kernel description. Conventions:
//   gaussian    k(x,y) = exp(-||x-y||^2 / (2 spread^2)), diag exactly 1
//   linear      k(x,y) = x.y
//   polynomial  k(x,y) = (x.y + 1)^degree
// With normalize set, k is replaced by k(x,y)/sqrt(k(x,x) k(y,y)).
struct KernelSpec {
  KernelKind kind = KernelKind::gaussian;
  double spread = 1.0;
  int degree = 2;
  bool normalize = false;

  static KernelSpec gaussian(double spread);
  static KernelSpec linear(bool normalize = false);
  static KernelSpec polynomial(int degree, bool normalize = false);

  void validate() const;

  // Raw kernel value, before any normalization.
  [[nodiscard]] double eval_raw(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                                const Eigen::Ref<const Eigen::RowVectorXd>& y) const;

  [[nodiscard]] std::string describe() const;
};

// JSON form: {"kind":"gaussian","spread":128.0}, {"kind":"linear",
// "normalize":true}, {"kind":"polynomial","degree":2}. `default_normalize`
// fills the normalize field when the document omits it: bound computations
// assume unit kernel diagonals, training does not.
KernelSpec kernel_spec_from_json(const nlohmann::json& j,
                                 bool default_normalize);
nlohmann::json kernel_spec_to_json(const KernelSpec& spec);

// T x M stack of task Gram matrices.
struct GramStack {
  std::vector<std::vector<Eigen::MatrixXd>> mats;  // [task][kernel]
  std::vector<Eigen::Index> task_sizes;
  double max_diag = 0.0;

  [[nodiscard]] Eigen::Index num_tasks() const {
    return static_cast<Eigen::Index>(mats.size());
  }
  [[nodiscard]] Eigen::Index num_kernels() const {
    return mats.empty() ? 0 : static_cast<Eigen::Index>(mats.front().size());
  }
  [[nodiscard]] bool equal_task_sizes() const;
  // Common task size; throws InvalidDataset when sizes differ.
  [[nodiscard]] Eigen::Index common_task_size() const;

  // Symmetry within 1e-10 and smallest eigenvalue >= -1e-8 * trace / n for
  // every matrix; throws NumericError otherwise.
  void validate() const;
};

// Build Gram matrices for every (task, kernel) pair. Matrices are
// symmetrized; max_diag is recorded for the bound-assumption check.
GramStack build_gram(const MultiTaskDataset& data,
                     const std::vector<KernelSpec>& specs);

// Single task helper used by build_gram and by prediction.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec,
                              const Eigen::MatrixXd& X);

// k(x_i, q) for all rows x_i of X against one query row, honoring
// normalization.
Eigen::VectorXd kernel_column(const KernelSpec& spec, const Eigen::MatrixXd& X,
                              const Eigen::Ref<const Eigen::RowVectorXd>& q);

// True when every Gram diagonal entry is <= 1 + 1e-12, the premise of the
// closed-form complexity bounds.
bool check_bound_assumption(const GramStack& g);

}  // namespace mtsvm
