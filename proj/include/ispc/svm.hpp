// Copyright 2026 The ispc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// One-vs-all RBF support vector machines trained by sequential minimal
// optimization, with z-score normalization and a cross-validated
// (C, gamma) grid search.

#ifndef ISPC_SVM_HPP_
#define ISPC_SVM_HPP_

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

namespace ispc {

/// k(a, b) = exp(-gamma |a - b|^2) for every row pair: A.rows() x B.rows().
Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double gamma);

struct SmoOptions {
  double tol = 1e-3;                   // stop once the maximal KKT violation is below this
  long max_iterations = 10'000'000;
};

struct SmoResult {
  Eigen::VectorXd alpha;  // 0 <= alpha_i <= C
  double bias = 0.0;      // f(x) = sum_i alpha_i y_i k(x_i, x) + bias
  double kkt_gap = 0.0;   // maximal violation at exit
  long iterations = 0;
  bool converged = false;
};

/// Solves max_a sum(a) - 1/2 a' Q a, Q_ij = y_i y_j K_ij, 0 <= a <= C,
/// y' a = 0 on a precomputed kernel. Working pairs are chosen by maximal
/// violation. Throws UsageError unless both labels (+1 and -1) are present.
SmoResult smo_solve(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& y, double C,
                    const SmoOptions& options = {});

/// sum(a) - 1/2 a' Q a.
double dual_objective(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& alpha);

struct BinaryMachine {
  Eigen::MatrixXd support;  // support vectors, one per row
  Eigen::VectorXd coef;     // alpha_i y_i
  double bias = 0.0;

  double decision(const Eigen::VectorXd& x, double gamma) const;
  Eigen::VectorXd decision(const Eigen::MatrixXd& xs, double gamma) const;
};

/// Binary machine on +-1 labels.
BinaryMachine svm_train_binary(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double C,
                               double gamma, const SmoOptions& options = {});

/// Column-wise z-scoring fit on training data. Columns with zero variance get
/// scale 1 and are excluded from the transformed output.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  std::vector<int> kept;  // input columns that survive

  static Standardizer fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  int input_dim() const { return static_cast<int>(mean.size()); }
  int output_dim() const { return static_cast<int>(kept.size()); }
};

/// Candidate values: every C with every gamma = gamma_scale / d, where d is
/// the normalized feature dimension.
struct SvmGrid {
  std::vector<double> C = {0.1, 1.0, 10.0, 100.0};
  std::vector<double> gamma_scale = {0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
};

struct GridScore {
  double C = 0.0;
  double gamma = 0.0;
  double cv_accuracy = 0.0;
};

struct SvmModel {
  Standardizer normalizer;
  double C = 1.0;
  double gamma = 1.0;
  std::vector<BinaryMachine> machines;  // one per class, class c versus rest
  std::vector<GridScore> search;        // cross-validation table

  int classes() const { return static_cast<int>(machines.size()); }
};

/// Fold index per sample. Within each class, samples are ordered by a hash
/// of their content and dealt round-robin, so the assignment is independent
/// of row order.
std::vector<int> assign_folds(const Eigen::MatrixXd& x, const std::vector<int>& labels, int folds);

/// Normalization, grid search by mean cross-validated accuracy (ties go to
/// the smaller C, then the smaller gamma) and a final refit on all data.
/// Labels are class indices in [0, n_classes). Throws UsageError on an empty
/// grid and DataError when a class has fewer than `folds` samples.
SvmModel svm_train_ova(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                       int n_classes = 3, const SvmGrid& grid = {}, int folds = 5,
                       const SmoOptions& options = {});

/// One-vs-all training at fixed hyperparameters (no search).
SvmModel svm_train_ova_fixed(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                             int n_classes, double C, double gamma,
                             const SmoOptions& options = {});

struct SvmPrediction {
  int label = 0;
  Eigen::VectorXd scores;  // per-class decision values
};

/// Arg-max decision value; ties go to the lower class index. Throws
/// UsageError on a dimension mismatch.
SvmPrediction svm_predict(const SvmModel& m, const Eigen::VectorXd& x);
std::vector<int> svm_predict(const SvmModel& m, const Eigen::MatrixXd& xs);

inline constexpr const char* kSvmMagic = "ISPCSVM1";

void save_svm(const std::filesystem::path& path, const SvmModel& m);
SvmModel load_svm(const std::filesystem::path& path);

}  // namespace ispc

#endif  // ISPC_SVM_HPP_
