#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "mtsvm/errors.hpp"

namespace mtsvm {

// One binary task: N_t feature rows with labels in {-1, +1}.
struct TaskData {
  std::string name;
  Eigen::MatrixXd features;  // N_t x d
  Eigen::VectorXd labels;    // N_t, each -1 or +1
};

struct MultiTaskDataset {
  std::vector<TaskData> tasks;

  [[nodiscard]] Eigen::Index num_tasks() const {
    return static_cast<Eigen::Index>(tasks.size());
  }
  [[nodiscard]] Eigen::Index feature_dim() const {
    return tasks.empty() ? 0 : tasks.front().features.cols();
  }
  [[nodiscard]] std::vector<Eigen::Index> task_sizes() const {
    std::vector<Eigen::Index> out;
    out.reserve(tasks.size());
    for (const auto& t : tasks) out.push_back(t.features.rows());
    return out;
  }

  // Throws InvalidDataset unless every task is non-empty, dimensions agree,
  // and labels are exactly +/-1.
  void validate() const;
};

// CSV with columns task_id,label,f1..fd. A header row is recognized by a
// non-numeric first field and skipped. Tasks appear in first-occurrence
// order of their task_id. Malformed rows raise ParseError with the
// 1-based line number.
MultiTaskDataset load_csv(const std::string& path);
void save_csv(const MultiTaskDataset& data, const std::string& path);

// One binary task per unordered pair of classes, pairs in ascending order
// of (i, j), the lower class labeled +1. Classes are the distinct values of
// class_labels in ascending order.
MultiTaskDataset one_vs_one_tasks(const Eigen::MatrixXd& features,
                                  const std::vector<int>& class_labels);

struct SplitResult {
  MultiTaskDataset train;
  MultiTaskDataset test;
  int warnings = 0;  // classes too small to split as requested
};

// Stratified split per task and class; deterministic in (seed, task index,
// class). Train receives round(fraction * n) of each class, clamped to
// [1, n-1] when n >= 2; a single-sample class goes entirely to train and
// bumps `warnings`.
SplitResult split(const MultiTaskDataset& data, double fraction,
                  std::uint64_t seed);

// T related binary tasks: w_t = relatedness * w_shared +
// (1 - relatedness) * w_private, normalized to unit length; features are
// standard Gaussian; labels sign(w_t . x) with independent flip probability
// `noise`.
MultiTaskDataset synth_multitask(int num_tasks, int samples_per_task, int dim,
                                 double relatedness, double noise,
                                 std::uint64_t seed);

// Deterministically subsample every task to the smallest task size,
// preserving within-task sample order.
MultiTaskDataset subsample_to_min(const MultiTaskDataset& data,
                                  std::uint64_t seed);

}  // namespace mtsvm
