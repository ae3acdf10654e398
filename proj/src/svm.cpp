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

#include "ispc/svm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>

#include "ispc/container.hpp"
#include "ispc/error.hpp"

namespace ispc {

namespace {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::VectorXd na = a.rowwise().squaredNorm();
  const Eigen::VectorXd nb = b.rowwise().squaredNorm();
  Eigen::MatrixXd d = -2.0 * a * b.transpose();
  d.colwise() += na;
  d.rowwise() += nb.transpose();
  return d.cwiseMax(0.0);
}

bool in_up(double y, double a, double C) { return y > 0 ? a < C : a > 0; }
bool in_low(double y, double a, double C) { return y > 0 ? a > 0 : a < C; }

std::uint64_t row_hash(const Eigen::MatrixXd& x, Eigen::Index r, int label) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ULL;
    }
  };
  mix(static_cast<std::uint64_t>(label));
  for (Eigen::Index c = 0; c < x.cols(); ++c) mix(std::bit_cast<std::uint64_t>(x(r, c)));
  return h;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

Eigen::VectorXd one_vs_rest(const std::vector<int>& labels, int cls) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i)) = labels[i] == cls ? 1.0 : -1.0;
  return y;
}

BinaryMachine machine_from(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const SmoResult& r) {
  std::vector<Eigen::Index> sv;
  for (Eigen::Index i = 0; i < r.alpha.size(); ++i)
    if (r.alpha(i) > 0.0) sv.push_back(i);
  BinaryMachine m;
  m.support = take_rows(x, sv);
  m.coef.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k)
    m.coef(static_cast<Eigen::Index>(k)) = r.alpha(sv[k]) * y(sv[k]);
  m.bias = r.bias;
  return m;
}

// One-vs-all machines on already normalized data with a precomputed kernel.
std::vector<BinaryMachine> train_machines(const Eigen::MatrixXd& z, const Eigen::MatrixXd& kernel,
                                          const std::vector<int>& labels, int n_classes,
                                          double C, const SmoOptions& options) {
  std::vector<BinaryMachine> machines;
  for (int c = 0; c < n_classes; ++c) {
    const Eigen::VectorXd y = one_vs_rest(labels, c);
    machines.push_back(machine_from(z, y, smo_solve(kernel, y, C, options)));
  }
  return machines;
}

int argmax_lowest(const Eigen::VectorXd& v) {
  int best = 0;
  for (Eigen::Index k = 1; k < v.size(); ++k)
    if (v(k) > v(best)) best = static_cast<int>(k);
  return best;
}

void check_labels(const std::vector<int>& labels, Eigen::Index rows, int n_classes) {
  if (static_cast<Eigen::Index>(labels.size()) != rows) throw UsageError("one label per sample required");
  for (int l : labels)
    if (l < 0 || l >= n_classes) throw UsageError("label out of range");
}

}  // namespace

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double gamma) {
  if (a.cols() != b.cols()) throw UsageError("kernel operands differ in dimension");
  return (-gamma * squared_distances(a, b).array()).exp().matrix();
}

SmoResult smo_solve(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& y, double C,
                    const SmoOptions& options) {
  const Eigen::Index n = y.size();
  if (kernel.rows() != n || kernel.cols() != n) throw UsageError("kernel must be n x n");
  if (!(C > 0.0)) throw UsageError("C must be positive");
  if (!(y.array() > 0).any() || !(y.array() < 0).any())
    throw UsageError("SVM training needs both classes");

  SmoResult r;
  r.alpha = Eigen::VectorXd::Zero(n);
  // Gradient of 1/2 a'Qa - sum(a).
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);
  auto& alpha = r.alpha;

  for (;;) {
    Eigen::Index i = -1, j = -1;
    double up = -std::numeric_limits<double>::infinity();
    double low = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
      const double v = -y(k) * grad(k);
      if (in_up(y(k), alpha(k), C) && v > up) up = v, i = k;
      if (in_low(y(k), alpha(k), C) && v < low) low = v, j = k;
    }
    r.kkt_gap = (i < 0 || j < 0) ? 0.0 : up - low;
    if (r.kkt_gap < options.tol) {
      r.converged = true;
      break;
    }
    if (r.iterations >= options.max_iterations) break;
    ++r.iterations;

    // Move along a_i += y_i t, a_j -= y_j t, which keeps y'a fixed.
    const double curvature = std::max(kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j), 1e-12);
    double t = r.kkt_gap / curvature;
    t = std::min(t, y(i) > 0 ? C - alpha(i) : alpha(i));
    t = std::min(t, y(j) > 0 ? alpha(j) : C - alpha(j));
    alpha(i) += y(i) * t;
    alpha(j) -= y(j) * t;
    for (Eigen::Index k : {i, j}) {
      if (alpha(k) < 1e-14 * C) alpha(k) = 0.0;
      if (alpha(k) > C * (1.0 - 1e-14)) alpha(k) = C;
    }
    grad.array() += t * y.array() * (kernel.col(i) - kernel.col(j)).array();
  }

  // Bias from free vectors; midpoint of the feasible interval otherwise.
  double sum = 0.0, lo = -std::numeric_limits<double>::infinity(),
         hi = std::numeric_limits<double>::infinity();
  int free = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double yg = y(k) * grad(k);
    if (alpha(k) > 0.0 && alpha(k) < C) {
      sum += yg;
      ++free;
    } else if ((alpha(k) >= C) == (y(k) > 0)) {
      lo = std::max(lo, yg);
    } else {
      hi = std::min(hi, yg);
    }
  }
  double rho = 0.0;
  if (free > 0)
    rho = sum / free;
  else if (std::isfinite(lo) && std::isfinite(hi))
    rho = 0.5 * (lo + hi);
  else
    rho = std::isfinite(lo) ? lo : hi;
  r.bias = -rho;
  return r;
}

double dual_objective(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& alpha) {
  const Eigen::VectorXd ya = y.cwiseProduct(alpha);
  return alpha.sum() - 0.5 * ya.dot(kernel * ya);
}

double BinaryMachine::decision(const Eigen::VectorXd& x, double gamma) const {
  if (support.rows() == 0) return bias;
  if (x.size() != support.cols()) throw UsageError("feature dimension mismatch");
  const Eigen::VectorXd d2 = (support.rowwise() - x.transpose()).rowwise().squaredNorm();
  return coef.dot((-gamma * d2.array()).exp().matrix()) + bias;
}

Eigen::VectorXd BinaryMachine::decision(const Eigen::MatrixXd& xs, double gamma) const {
  if (support.rows() == 0) return Eigen::VectorXd::Constant(xs.rows(), bias);
  return (rbf_kernel(xs, support, gamma) * coef).array() + bias;
}

BinaryMachine svm_train_binary(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double C,
                               double gamma, const SmoOptions& options) {
  if (x.rows() != y.size() || x.rows() < 2) throw UsageError("need at least two labelled samples");
  if (!(gamma > 0.0)) throw UsageError("gamma must be positive");
  return machine_from(x, y, smo_solve(rbf_kernel(x, x, gamma), y, C, options));
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  if (x.rows() < 1) throw DataError("cannot normalize an empty feature matrix");
  if (!x.allFinite()) throw DataError("non-finite feature values");
  Standardizer s;
  s.mean = x.colwise().mean().transpose();
  s.scale = ((x.rowwise() - s.mean.transpose()).colwise().squaredNorm() / static_cast<double>(x.rows()))
                .cwiseSqrt()
                .transpose();
  for (Eigen::Index c = 0; c < s.scale.size(); ++c) {
    if (s.scale(c) > 0.0)
      s.kept.push_back(static_cast<int>(c));
    else
      s.scale(c) = 1.0;
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean.size()) throw UsageError("feature dimension mismatch");
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k)
    out.col(static_cast<Eigen::Index>(k)) = (x.col(kept[k]).array() - mean(kept[k])) / scale(kept[k]);
  return out;
}

Eigen::VectorXd Standardizer::apply(const Eigen::VectorXd& x) const {
  return apply(Eigen::MatrixXd(x.transpose())).transpose();
}

std::vector<int> assign_folds(const Eigen::MatrixXd& x, const std::vector<int>& labels, int folds) {
  if (folds < 2) throw UsageError("need at least two folds");
  const int n_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<int> fold(labels.size(), 0);
  for (int c = 0; c < n_classes; ++c) {
    std::vector<std::pair<std::uint64_t, std::size_t>> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) members.emplace_back(row_hash(x, static_cast<Eigen::Index>(i), c), i);
    std::sort(members.begin(), members.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 0; k < members.size(); ++k) fold[members[k].second] = static_cast<int>(k % folds);
  }
  return fold;
}

SvmModel svm_train_ova_fixed(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                             int n_classes, double C, double gamma, const SmoOptions& options) {
  check_labels(labels, x.rows(), n_classes);
  SvmModel m;
  m.normalizer = Standardizer::fit(x);
  m.C = C;
  m.gamma = gamma;
  const Eigen::MatrixXd z = m.normalizer.apply(x);
  m.machines = train_machines(z, rbf_kernel(z, z, gamma), labels, n_classes, C, options);
  return m;
}

SvmModel svm_train_ova(const Eigen::MatrixXd& x, const std::vector<int>& labels, int n_classes,
                       const SvmGrid& grid, int folds, const SmoOptions& options) {
  if (grid.C.empty() || grid.gamma_scale.empty()) throw UsageError("empty hyperparameter grid");
  check_labels(labels, x.rows(), n_classes);
  for (int c = 0; c < n_classes; ++c)
    if (std::count(labels.begin(), labels.end(), c) < folds)
      throw DataError("class " + std::to_string(c) + " has fewer samples than folds");

  const Standardizer full = Standardizer::fit(x);
  const double dim = static_cast<double>(std::max(full.output_dim(), 1));
  const std::vector<int> fold = assign_folds(x, labels, folds);

  // Per-fold normalized data and squared distances are shared by all grid points.
  struct FoldData {
    Eigen::MatrixXd z_train, z_test, d_train, d_test;
    std::vector<int> y_train, y_test;
  };
  std::vector<FoldData> data(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> tr, te;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      (fold[i] == f ? te : tr).push_back(static_cast<Eigen::Index>(i));
      (fold[i] == f ? data[f].y_test : data[f].y_train).push_back(labels[i]);
    }
    Standardizer s = Standardizer::fit(take_rows(x, tr));
    s.kept = full.kept;
    data[f].z_train = s.apply(take_rows(x, tr));
    data[f].z_test = s.apply(take_rows(x, te));
    data[f].d_train = squared_distances(data[f].z_train, data[f].z_train);
    data[f].d_test = squared_distances(data[f].z_test, data[f].z_train);
  }

  SvmModel best;
  double best_score = -1.0;
  for (double C : grid.C) {
    for (double scale : grid.gamma_scale) {
      const double gamma = scale / dim;
      std::size_t correct = 0;
      for (const FoldData& d : data) {
        const Eigen::MatrixXd k_train = (-gamma * d.d_train.array()).exp().matrix();
        const Eigen::MatrixXd k_test = (-gamma * d.d_test.array()).exp().matrix();
        Eigen::MatrixXd scores(k_test.rows(), n_classes);
        for (int c = 0; c < n_classes; ++c) {
          const Eigen::VectorXd y = one_vs_rest(d.y_train, c);
          const SmoResult r = smo_solve(k_train, y, C, options);
          scores.col(c) = (k_test * r.alpha.cwiseProduct(y)).array() + r.bias;
        }
        for (Eigen::Index i = 0; i < scores.rows(); ++i)
          correct += argmax_lowest(scores.row(i).transpose()) == d.y_test[static_cast<std::size_t>(i)];
      }
      const double acc = static_cast<double>(correct) / static_cast<double>(labels.size());
      best.search.push_back({C, gamma, acc});
      if (acc > best_score) {
        best_score = acc;
        best.C = C;
        best.gamma = gamma;
      }
    }
  }
  // Ties: smaller C, then smaller gamma, whatever the grid order.
  for (const GridScore& g : best.search)
    if (g.cv_accuracy == best_score && (g.C < best.C || (g.C == best.C && g.gamma < best.gamma))) {
      best.C = g.C;
      best.gamma = g.gamma;
    }

  SvmModel fitted = svm_train_ova_fixed(x, labels, n_classes, best.C, best.gamma, options);
  fitted.search = std::move(best.search);
  return fitted;
}

SvmPrediction svm_predict(const SvmModel& m, const Eigen::VectorXd& x) {
  if (x.size() != m.normalizer.input_dim()) throw UsageError("feature dimension mismatch");
  const Eigen::VectorXd z = m.normalizer.apply(x);
  SvmPrediction p;
  p.scores.resize(m.classes());
  for (int c = 0; c < m.classes(); ++c) p.scores(c) = m.machines[static_cast<std::size_t>(c)].decision(z, m.gamma);
  p.label = argmax_lowest(p.scores);
  return p;
}

std::vector<int> svm_predict(const SvmModel& m, const Eigen::MatrixXd& xs) {
  if (xs.cols() != m.normalizer.input_dim()) throw UsageError("feature dimension mismatch");
  const Eigen::MatrixXd z = m.normalizer.apply(xs);
  Eigen::MatrixXd scores(xs.rows(), m.classes());
  for (int c = 0; c < m.classes(); ++c) scores.col(c) = m.machines[static_cast<std::size_t>(c)].decision(z, m.gamma);
  std::vector<int> out(static_cast<std::size_t>(xs.rows()));
  for (Eigen::Index i = 0; i < xs.rows(); ++i) out[static_cast<std::size_t>(i)] = argmax_lowest(scores.row(i).transpose());
  return out;
}

void save_svm(const std::filesystem::path& path, const SvmModel& m) {
  nlohmann::json header = {{"format", kSvmMagic}, {"C", m.C}, {"gamma", m.gamma},
                           {"classes", m.classes()}, {"kept", m.normalizer.kept}};
  nlohmann::json biases = nlohmann::json::array();
  std::vector<NamedTensor> tensors = {{"normalizer.mean", m.normalizer.mean},
                                      {"normalizer.scale", m.normalizer.scale}};
  for (int c = 0; c < m.classes(); ++c) {
    const BinaryMachine& b = m.machines[static_cast<std::size_t>(c)];
    biases.push_back(b.bias);
    tensors.push_back({"machine" + std::to_string(c) + ".support", b.support});
    tensors.push_back({"machine" + std::to_string(c) + ".coef", b.coef});
  }
  header["bias"] = biases;
  nlohmann::json search = nlohmann::json::array();
  for (const GridScore& g : m.search) search.push_back({{"C", g.C}, {"gamma", g.gamma}, {"cv_accuracy", g.cv_accuracy}});
  header["search"] = search;
  write_tensor_container(path, kSvmMagic, std::move(header), tensors);
}

SvmModel load_svm(const std::filesystem::path& path) {
  const TensorContainer c = read_tensor_container(path, kSvmMagic);
  SvmModel m;
  try {
    m.C = c.header.at("C").get<double>();
    m.gamma = c.header.at("gamma").get<double>();
    m.normalizer.kept = c.header.at("kept").get<std::vector<int>>();
    m.normalizer.mean = c.at("normalizer.mean");
    m.normalizer.scale = c.at("normalizer.scale");
    const int classes = c.header.at("classes").get<int>();
    for (int k = 0; k < classes; ++k) {
      BinaryMachine b;
      b.support = c.at("machine" + std::to_string(k) + ".support");
      b.coef = c.at("machine" + std::to_string(k) + ".coef");
      b.bias = c.header.at("bias").at(static_cast<std::size_t>(k)).get<double>();
      m.machines.push_back(std::move(b));
    }
    for (const auto& g : c.header.value("search", nlohmann::json::array()))
      m.search.push_back({g.at("C").get<double>(), g.at("gamma").get<double>(), g.at("cv_accuracy").get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed SVM header: " + e.what());
  }
  for (int k : m.normalizer.kept)
    if (k < 0 || k >= m.normalizer.input_dim()) throw DataError(path.string() + ": bad column index");
  return m;
}

}  // namespace ispc
