#pragma once

#include "mtsvm/mtl.hpp"

namespace mtsvm {

// Multiple-kernel training: kernel_weights live on the nonnegative r-ball
// and are learned jointly with the per-task expansions.

// 1 <= s <= 2: alternate coupling update, per-task SVM on the weighted Gram,
// and a projected-gradient step on the kernel weights.
MklModel train_mkl_small_s(const MultiTaskDataset& data,
                           const std::vector<KernelSpec>& kernels, Exponent s,
                           Exponent r, double C, const TrainOptions& opts = {});

// s > 2: outer subgradient descent on the kernel weights around the
// fixed-mix dual-ascent core; returns the best iterate seen.
MklModel train_mkl_large_s(const MultiTaskDataset& data,
                           const std::vector<KernelSpec>& kernels, Exponent s,
                           Exponent r, double C, const TrainOptions& opts = {});

// Dispatch on s.
MklModel train_mkl(const MultiTaskDataset& data,
                   const std::vector<KernelSpec>& kernels, Exponent s,
                   Exponent r, double C, const TrainOptions& opts = {});

}  // namespace mtsvm
