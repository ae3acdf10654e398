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

// Experiment harness: speaker-independent splits, fixed-length padding, the
// thirteen experimental conditions (SVM with/without VAD or attention
// weights on three feature sets, and four LSTM variants), the repeated-run
// protocol, reports and attention export.

#ifndef ISPC_EXPERIMENT_HPP_
#define ISPC_EXPERIMENT_HPP_

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ispc/features.hpp"
#include "ispc/manifest.hpp"
#include "ispc/nn/config.hpp"
#include "ispc/nn/model.hpp"
#include "ispc/nn/train.hpp"
#include "ispc/svm.hpp"
#include "ispc/vad.hpp"
#include "json.hpp"

namespace ispc {

// ---------------------------------------------------------------------------
// Splits

enum class Partition : int { Train = 0, Valid = 1, Test = 2 };

std::string_view partition_name(Partition p);  // "train", "valid", "test"
Partition parse_partition(std::string_view s);

struct SplitPlan {
  std::map<std::string, Partition> speakers;
  std::array<double, 3> targets = {0.50, 0.15, 0.35};
  std::array<double, 3> fractions = {0.0, 0.0, 0.0};  // achieved file fractions
  std::uint64_t seed = 0;

  /// Throws DataError for an unknown speaker.
  Partition of(const std::string& speaker) const;
  /// Manifest indices of the records in partition `p`, in manifest order.
  std::vector<std::size_t> indices(const Manifest& m, Partition p) const;
};

/// Greedy speaker assignment. Every partition first receives one speaker of
/// each class (when the class has enough speakers); the remaining speakers,
/// largest first, go to the partition whose file count for that class lags
/// its target the most. Throws DataError with fewer than three speakers.
SplitPlan make_splits(const Manifest& manifest,
                      std::array<double, 3> proportions = {0.50, 0.15, 0.35},
                      std::uint64_t seed = 0);

/// Throws DataError if any speaker is assigned twice or missing.
void check_speaker_disjoint(const SplitPlan& plan, const Manifest& manifest);

nlohmann::json to_json(const SplitPlan& plan);
SplitPlan split_plan_from_json(const nlohmann::json& j);
void write_splits(const std::filesystem::path& path, const SplitPlan& plan);
SplitPlan read_splits(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Sequences and aggregation

struct PaddedSequence {
  Eigen::MatrixXd values;  // L x n_B; rows >= valid_length hold the mask value
  int valid_length = 0;
};

/// Crops to the first L frames or pads with the mask value (NaN).
PaddedSequence pad_or_crop(const Eigen::MatrixXd& frames, int max_length);

using nn::accuracy;

/// sum_t alpha_t f_t. Throws UsageError on a length mismatch or weights that
/// do not sum to one.
Eigen::VectorXd weighted_feature_aggregate(const Eigen::MatrixXd& frame_features,
                                           const Eigen::VectorXd& alpha);

// ---------------------------------------------------------------------------
// Conditions

enum class FeatureSet { Mfcc, Modulation, Falk };

std::string_view feature_set_name(FeatureSet f);  // "mfcc", "modspec", "falk"

enum class Condition {
  SvmVadMfcc, SvmMfcc, SvmAttnMfcc,
  SvmVadModulation, SvmModulation, SvmAttnModulation,
  SvmVadFalk, SvmFalk, SvmAttnFalk,
  BasicLstmVad, BasicLstm, LstmMean, LstmAttention,
};

struct ConditionInfo {
  Condition condition;
  std::string_view name;
  bool is_svm = false;
  FeatureSet features = FeatureSet::Mfcc;  // SVM conditions only
  bool vad = false;
  bool attention_weights = false;
  nn::Pooling pooling = nn::Pooling::Last;  // LSTM conditions only
};

const std::vector<ConditionInfo>& all_conditions();
const ConditionInfo& condition_info(Condition c);
/// Accepts names such as "svm/falk", "svm+vad/mfcc", "svm+attnw/modspec",
/// "basic-lstm", "basic-lstm+vad", "lstm-mean", "lstm-attn".
Condition parse_condition(std::string_view name);

// ---------------------------------------------------------------------------
// Reports

using Confusion = std::array<std::array<int, kNumLevels>, kNumLevels>;  // [true][predicted]

struct RunReport {
  std::string condition;
  std::vector<double> accuracies;
  std::vector<Confusion> confusions;
  std::vector<int> best_epochs;         // LSTM runs
  std::vector<GridScore> svm_choices;   // SVM runs: selected (C, gamma, cv accuracy)
  std::string note;

  double mean() const;
  double stddev() const;  // sample standard deviation; 0 for a single run
};

nlohmann::json to_json(const RunReport& r);
RunReport run_report_from_json(const nlohmann::json& j);
/// `{"reports": [...]}` with floats rounded to nine significant digits.
void write_report_json(const std::filesystem::path& path, const std::vector<RunReport>& reports,
                       const nlohmann::json& config = nlohmann::json::object());
/// One row per run: condition,run,accuracy.
std::string report_csv(const std::vector<RunReport>& reports);

// ---------------------------------------------------------------------------
// Protocol

enum class Precision { Float, Double };

struct ExperimentOptions {
  nn::NetConfig net;
  nn::TrainConfig train;
  VadConfig vad;
  ModulationConfig modulation;
  SvmGrid grid;
  int folds = 5;
  SmoOptions smo;
  int runs = 20;
  std::uint64_t seed = 0;
  std::array<double, 3> proportions = {0.50, 0.15, 0.35};
  Precision precision = Precision::Float;
  int jobs = 1;  // worker threads for feature extraction and independent runs

  /// Network and training hyperparameters at their canonical values.
  static ExperimentOptions canonical();
  /// Reduced network used for single-core acceptance runs.
  static ExperimentOptions desk();
  void validate() const;
};

nlohmann::json to_json(const ExperimentOptions& o);

using ProgressFn = std::function<void(const std::string&)>;

/// Runs conditions on one manifest and split. Features are extracted once
/// and trained attention models are shared between the LSTM-Attn and
/// "SVM + attention weights" conditions.
class Experiment {
 public:
  Experiment(Manifest manifest, SplitPlan plan, ExperimentOptions options,
             ProgressFn progress = {});
  ~Experiment();
  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;

  RunReport run(Condition c);

  /// Trained model of run `r` for an LSTM pooling head (trains on demand).
  const nn::SequenceModel<double>& lstm_model(nn::Pooling pooling, bool vad, int r);

  const Manifest& manifest() const { return manifest_; }
  const SplitPlan& plan() const { return plan_; }
  const ExperimentOptions& options() const { return options_; }
  const Warnings& warnings() const { return warnings_; }

 private:
  struct Impl;
  Manifest manifest_;
  SplitPlan plan_;
  ExperimentOptions options_;
  ProgressFn progress_;
  Warnings warnings_;
  std::unique_ptr<Impl> impl_;
};

/// make_splits with options.seed followed by Experiment::run.
RunReport run_condition(Condition c, const Manifest& manifest, const ExperimentOptions& options,
                        ProgressFn progress = {});

// ---------------------------------------------------------------------------
// Feature helpers shared by the CLI

/// Normalized log-mel input of an utterance; with `vad`, speech frames only
/// (selected before normalization).
Eigen::MatrixXd lstm_input(const Waveform& w, const VadConfig* vad = nullptr);

/// Utterance-level SVM vector: temporal mean of MFCC+deltas (26), the
/// averaged modulation spectrum (184) or the six-feature set (6).
/// `frame_weights`, when given, holds one weight per 10 ms frame and replaces
/// uniform averaging.
Eigen::VectorXd utterance_features(const Waveform& w, FeatureSet f,
                                   const Eigen::VectorXd* frame_weights = nullptr,
                                   const ModulationConfig& mod = {},
                                   Warnings* warnings = nullptr);

// ---------------------------------------------------------------------------
// Attention export

struct AttentionTrace {
  Eigen::VectorXd frame_time_s;  // centre of each valid frame
  Eigen::VectorXd alpha;
  double mean_weight = 0.0;      // 1 / T
};

/// Attention weights of a trained attention model on one utterance. Throws
/// UsageError for a model without an attention head.
AttentionTrace attention_trace(const nn::SequenceModel<double>& model, const Waveform& w);

/// Writes `frame_time_s,alpha,mean_weight`.
void write_attention_csv(const std::filesystem::path& path, const AttentionTrace& trace);
/// Writes `time_s,amplitude` for the waveform overlay.
void write_waveform_csv(const std::filesystem::path& path, const Waveform& w);

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads. The first exception
/// thrown (lowest index) is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace ispc

#endif  // ISPC_EXPERIMENT_HPP_
