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

#include "ispc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "ispc/audio.hpp"
#include "ispc/container.hpp"
#include "ispc/error.hpp"
#include "ispc/nn/checkpoint.hpp"
#include "ispc/nn/network.hpp"
#include "ispc/random.hpp"

namespace ispc {

using Eigen::Index;

// ---------------------------------------------------------------------------
// Splits

std::string_view partition_name(Partition p) {
  switch (p) {
    case Partition::Train: return "train";
    case Partition::Valid: return "valid";
    case Partition::Test: return "test";
  }
  return "?";
}

Partition parse_partition(std::string_view s) {
  if (s == "train") return Partition::Train;
  if (s == "valid") return Partition::Valid;
  if (s == "test") return Partition::Test;
  throw DataError("unknown partition '" + std::string(s) + "'");
}

Partition SplitPlan::of(const std::string& speaker) const {
  const auto it = speakers.find(speaker);
  if (it == speakers.end()) throw DataError("speaker '" + speaker + "' is not in the split plan");
  return it->second;
}

std::vector<std::size_t> SplitPlan::indices(const Manifest& m, Partition p) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (of(m[i].speaker_id) == p) out.push_back(i);
  return out;
}

namespace {

struct SpeakerInfo {
  std::string id;
  int level = 0;
  int files = 0;
  std::uint64_t rank = 0;  // seeded tie-breaker
};

std::vector<SpeakerInfo> collect_speakers(const Manifest& manifest) {
  std::map<std::string, std::array<int, kNumLevels>> counts;
  for (const auto& r : manifest) counts[r.speaker_id][static_cast<int>(r.level())] += 1;
  std::vector<SpeakerInfo> out;
  for (const auto& [id, c] : counts) {
    SpeakerInfo s;
    s.id = id;
    s.level = static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin());
    s.files = std::accumulate(c.begin(), c.end(), 0);
    out.push_back(s);
  }
  return out;
}

}  // namespace

SplitPlan make_splits(const Manifest& manifest, std::array<double, 3> proportions,
                      std::uint64_t seed) {
  double total_p = 0.0;
  for (double p : proportions) {
    if (!(p > 0.0)) throw UsageError("split proportions must be positive");
    total_p += p;
  }
  if (std::abs(total_p - 1.0) > 1e-9) throw UsageError("split proportions must sum to 1");

  std::vector<SpeakerInfo> speakers = collect_speakers(manifest);
  if (speakers.size() < 3) throw DataError("at least three speakers are needed for a split");
  Rng rng = make_rng(seed, "splits");
  for (auto& s : speakers) s.rank = rng();

  SplitPlan plan;
  plan.targets = proportions;
  plan.seed = seed;
  std::array<std::array<double, 3>, kNumLevels> class_files{};  // [level][partition]
  std::array<double, kNumLevels> class_total{};
  for (const auto& s : speakers) class_total[static_cast<std::size_t>(s.level)] += s.files;

  auto assign = [&](const SpeakerInfo& s, int p) {
    plan.speakers[s.id] = static_cast<Partition>(p);
    class_files[static_cast<std::size_t>(s.level)][static_cast<std::size_t>(p)] += s.files;
  };

  std::vector<const SpeakerInfo*> rest;
  for (int level = 0; level < kNumLevels; ++level) {
    std::vector<const SpeakerInfo*> pool;
    for (const auto& s : speakers)
      if (s.level == level) pool.push_back(&s);
    std::sort(pool.begin(), pool.end(), [](auto* a, auto* b) { return a->rank < b->rank; });
    // Train and test are served before validation when speakers are scarce.
    constexpr std::array<int, 3> order = {0, 2, 1};
    std::size_t k = 0;
    for (int p : order)
      if (k < pool.size()) assign(*pool[k++], p);
    rest.insert(rest.end(), pool.begin() + static_cast<std::ptrdiff_t>(k), pool.end());
  }
  std::sort(rest.begin(), rest.end(), [](auto* a, auto* b) {
    return a->files != b->files ? a->files > b->files : a->rank < b->rank;
  });
  for (const SpeakerInfo* s : rest) {
    const auto lv = static_cast<std::size_t>(s->level);
    int best = 0;
    double best_deficit = -std::numeric_limits<double>::infinity();
    for (int p = 0; p < 3; ++p) {
      const double deficit = proportions[static_cast<std::size_t>(p)] * class_total[lv] -
                             class_files[lv][static_cast<std::size_t>(p)];
      if (deficit > best_deficit) best_deficit = deficit, best = p;
    }
    assign(*s, best);
  }

  std::array<double, 3> files{};
  for (const auto& r : manifest) files[static_cast<std::size_t>(plan.of(r.speaker_id))] += 1.0;
  for (std::size_t p = 0; p < 3; ++p) plan.fractions[p] = files[p] / static_cast<double>(manifest.size());
  check_speaker_disjoint(plan, manifest);
  return plan;
}

void check_speaker_disjoint(const SplitPlan& plan, const Manifest& manifest) {
  std::map<std::string, std::set<Partition>> seen;
  for (const auto& r : manifest) seen[r.speaker_id].insert(plan.of(r.speaker_id));
  for (const auto& [id, parts] : seen)
    if (parts.size() != 1) throw DataError("speaker '" + id + "' straddles partitions");
}

nlohmann::json to_json(const SplitPlan& plan) {
  nlohmann::json speakers = nlohmann::json::object();
  for (const auto& [id, p] : plan.speakers) speakers[id] = partition_name(p);
  nlohmann::json fractions = nlohmann::json::array();
  for (double f : plan.fractions) fractions.push_back(round_significant(f));
  return {{"seed", plan.seed},
          {"targets", plan.targets},
          {"fractions", fractions},
          {"speakers", speakers}};
}

SplitPlan split_plan_from_json(const nlohmann::json& j) {
  SplitPlan plan;
  try {
    plan.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("targets")) plan.targets = j.at("targets").get<std::array<double, 3>>();
    if (j.contains("fractions")) plan.fractions = j.at("fractions").get<std::array<double, 3>>();
    for (const auto& [id, p] : j.at("speakers").items())
      plan.speakers[id] = parse_partition(p.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed split plan: ") + e.what());
  }
  return plan;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace

void write_splits(const std::filesystem::path& path, const SplitPlan& plan) {
  write_text(path, to_json(plan).dump(2) + "\n");
}

SplitPlan read_splits(const std::filesystem::path& path) {
  return split_plan_from_json(read_json(path));
}

// ---------------------------------------------------------------------------
// Sequences and aggregation

PaddedSequence pad_or_crop(const Eigen::MatrixXd& frames, int max_length) {
  if (frames.rows() < 1) throw DataError("cannot pad an empty sequence");
  if (max_length < 1) throw UsageError("L must be positive");
  PaddedSequence out;
  out.valid_length = static_cast<int>(std::min<Index>(frames.rows(), max_length));
  out.values = Eigen::MatrixXd::Constant(max_length, frames.cols(), nn::kMaskValue<double>);
  out.values.topRows(out.valid_length) = frames.topRows(out.valid_length);
  return out;
}

Eigen::VectorXd weighted_feature_aggregate(const Eigen::MatrixXd& frame_features,
                                           const Eigen::VectorXd& alpha) {
  if (alpha.size() != frame_features.rows()) throw UsageError("one weight per frame required");
  if (std::abs(alpha.sum() - 1.0) > 1e-6) throw UsageError("frame weights must sum to one");
  return frame_features.transpose() * alpha;
}

// ---------------------------------------------------------------------------
// Conditions

std::string_view feature_set_name(FeatureSet f) {
  switch (f) {
    case FeatureSet::Mfcc: return "mfcc";
    case FeatureSet::Modulation: return "modspec";
    case FeatureSet::Falk: return "falk";
  }
  return "?";
}

const std::vector<ConditionInfo>& all_conditions() {
  using C = Condition;
  using F = FeatureSet;
  using P = nn::Pooling;
  static const std::vector<ConditionInfo> table = {
      {C::SvmVadMfcc, "svm+vad/mfcc", true, F::Mfcc, true, false, P::Last},
      {C::SvmMfcc, "svm/mfcc", true, F::Mfcc, false, false, P::Last},
      {C::SvmAttnMfcc, "svm+attnw/mfcc", true, F::Mfcc, false, true, P::Last},
      {C::SvmVadModulation, "svm+vad/modspec", true, F::Modulation, true, false, P::Last},
      {C::SvmModulation, "svm/modspec", true, F::Modulation, false, false, P::Last},
      {C::SvmAttnModulation, "svm+attnw/modspec", true, F::Modulation, false, true, P::Last},
      {C::SvmVadFalk, "svm+vad/falk", true, F::Falk, true, false, P::Last},
      {C::SvmFalk, "svm/falk", true, F::Falk, false, false, P::Last},
      {C::SvmAttnFalk, "svm+attnw/falk", true, F::Falk, false, true, P::Last},
      {C::BasicLstmVad, "basic-lstm+vad", false, F::Mfcc, true, false, P::Last},
      {C::BasicLstm, "basic-lstm", false, F::Mfcc, false, false, P::Last},
      {C::LstmMean, "lstm-mean", false, F::Mfcc, false, false, P::Mean},
      {C::LstmAttention, "lstm-attn", false, F::Mfcc, false, false, P::Attention},
  };
  return table;
}

const ConditionInfo& condition_info(Condition c) {
  for (const auto& info : all_conditions())
    if (info.condition == c) return info;
  throw UsageError("unknown condition");
}

Condition parse_condition(std::string_view name) {
  for (const auto& info : all_conditions())
    if (info.name == name) return info.condition;
  std::string known;
  for (const auto& info : all_conditions()) known += (known.empty() ? "" : "|") + std::string(info.name);
  throw UsageError("unknown condition '" + std::string(name) + "' (" + known + ")");
}

// ---------------------------------------------------------------------------
// Reports

double RunReport::mean() const {
  if (accuracies.empty()) return 0.0;
  return std::accumulate(accuracies.begin(), accuracies.end(), 0.0) /
         static_cast<double>(accuracies.size());
}

double RunReport::stddev() const {
  if (accuracies.size() < 2) return 0.0;
  const double mu = mean();
  double ss = 0.0;
  for (double a : accuracies) ss += (a - mu) * (a - mu);
  return std::sqrt(ss / static_cast<double>(accuracies.size() - 1));
}

nlohmann::json to_json(const RunReport& r) {
  nlohmann::json acc = nlohmann::json::array();
  for (double a : r.accuracies) acc.push_back(round_significant(a));
  nlohmann::json svm = nlohmann::json::array();
  for (const GridScore& g : r.svm_choices)
    svm.push_back({{"C", round_significant(g.C)},
                   {"gamma", round_significant(g.gamma)},
                   {"cv_accuracy", round_significant(g.cv_accuracy)}});
  nlohmann::json j = {{"condition", r.condition},
                      {"runs", r.accuracies.size()},
                      {"accuracies", acc},
                      {"mean", round_significant(r.mean())},
                      {"std", round_significant(r.stddev())},
                      {"confusions", r.confusions},
                      {"best_epochs", r.best_epochs},
                      {"svm", svm}};
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

RunReport run_report_from_json(const nlohmann::json& j) {
  RunReport r;
  try {
    r.condition = j.at("condition").get<std::string>();
    r.accuracies = j.at("accuracies").get<std::vector<double>>();
    r.confusions = j.value("confusions", std::vector<Confusion>{});
    r.best_epochs = j.value("best_epochs", std::vector<int>{});
    for (const auto& g : j.value("svm", nlohmann::json::array()))
      r.svm_choices.push_back({g.at("C").get<double>(), g.at("gamma").get<double>(),
                               g.at("cv_accuracy").get<double>()});
    r.note = j.value("note", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return r;
}

void write_report_json(const std::filesystem::path& path, const std::vector<RunReport>& reports,
                       const nlohmann::json& config) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& r : reports) list.push_back(to_json(r));
  write_text(path, nlohmann::json{{"config", config}, {"reports", list}}.dump(2) + "\n");
}

std::string report_csv(const std::vector<RunReport>& reports) {
  std::ostringstream out;
  out << "condition,run,accuracy\n" << std::setprecision(9);
  for (const auto& r : reports)
    for (std::size_t k = 0; k < r.accuracies.size(); ++k)
      out << r.condition << ',' << k << ',' << round_significant(r.accuracies[k]) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Options

ExperimentOptions ExperimentOptions::canonical() { return {}; }

ExperimentOptions ExperimentOptions::desk() {
  ExperimentOptions o;
  o.net.dense1_units = 32;
  o.net.lstm_units = 32;
  o.net.dense2_units = 32;
  o.train.learning_rate = 0.002;
  o.train.max_epochs = 100;
  return o;
}

void ExperimentOptions::validate() const {
  net.validate();
  train.validate();
  vad.validate();
  if (net.input_bands != kLogMelBands) throw UsageError("n_B must match the log-mel band count (32)");
  if (net.classes != kNumLevels) throw UsageError("n_C must be 3");
  if (runs < 1) throw UsageError("runs must be >= 1");
  if (folds < 2) throw UsageError("folds must be >= 2");
  if (jobs < 1) throw UsageError("jobs must be >= 1");
}

nlohmann::json to_json(const ExperimentOptions& o) {
  return {{"net", nn::to_json(o.net)},
          {"train",
           {{"learning_rate", o.train.learning_rate},
            {"batch_size", o.train.batch_size},
            {"max_epochs", o.train.max_epochs},
            {"beta1", o.train.beta1},
            {"beta2", o.train.beta2},
            {"epsilon", o.train.epsilon},
            {"clip_gradients", o.train.clip_gradients},
            {"clip_norm", o.train.clip_norm}}},
          {"vad",
           {{"noise_init_frames", o.vad.noise_init_frames},
            {"lrt_threshold", o.vad.lrt_threshold},
            {"hangover_frames", o.vad.hangover_frames},
            {"snr_smoothing", o.vad.snr_smoothing}}},
          {"lhmr_split", o.modulation.low_band_split},
          {"svm", {{"C", o.grid.C}, {"gamma_scale", o.grid.gamma_scale}, {"folds", o.folds},
                   {"tol", o.smo.tol}}},
          {"runs", o.runs},
          {"seed", o.seed},
          {"proportions", o.proportions},
          {"precision", o.precision == Precision::Float ? "float" : "double"}};
}

// ---------------------------------------------------------------------------
// Feature helpers

Eigen::MatrixXd lstm_input(const Waveform& w, const VadConfig* vad) {
  if (vad == nullptr) return log_mel(w).values;
  const VadDecision d = vad_decide(w, *vad);
  LogMelSpectrogram spec = log_mel_energies(w);
  spec.values = apply_vad(spec.values, d.speech);
  normalize_utterance(spec);
  return spec.values;
}

namespace {

struct FrameFeatures {
  Eigen::MatrixXd mfcc;  // T x 26
  FalkFrameStats stats;
};

FrameFeatures frame_features(const Waveform& w, const ModulationConfig& mod) {
  return {mfcc_delta(w), falk_frame_stats(w, mod)};
}

Eigen::VectorXd pool_features(const FrameFeatures& ff, FeatureSet f,
                              const Eigen::VectorXd* weights, const ModulationConfig& mod,
                              Warnings* warnings) {
  const Index T = ff.mfcc.rows();
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(T, 1.0 / static_cast<double>(T));
  const Eigen::VectorXd& alpha = weights != nullptr ? *weights : uniform;
  if (alpha.size() != T) throw UsageError("frame weight length does not match the utterance");
  switch (f) {
    case FeatureSet::Mfcc:
      if (weights == nullptr) return ff.mfcc.colwise().mean().transpose();
      return weighted_feature_aggregate(ff.mfcc, alpha);
    case FeatureSet::Modulation: {
      const auto& frames = ff.stats.modulation;
      if (weights == nullptr)
        return average_modulation(frames, Eigen::VectorXd::Ones(frames.energies.rows())).flattened();
      return average_modulation(frames, window_weights_from_frames(frames, alpha, FrameGrid::standard()))
          .flattened();
    }
    case FeatureSet::Falk:
      if (weights == nullptr)
        return pool_falk(ff.stats, Eigen::VectorXd::Ones(T), mod.low_band_split, warnings).as_vector();
      return pool_falk(ff.stats, alpha, mod.low_band_split, warnings).as_vector();
  }
  throw UsageError("unknown feature set");
}

}  // namespace

Eigen::VectorXd utterance_features(const Waveform& w, FeatureSet f, const Eigen::VectorXd* frame_weights,
                                   const ModulationConfig& mod, Warnings* warnings) {
  return pool_features(frame_features(w, mod), f, frame_weights, mod, warnings);
}

// ---------------------------------------------------------------------------
// Parallel helper

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Experiment

namespace {

template <typename S>
nn::PaddedBatch<S> make_batch(const std::vector<Eigen::MatrixXd>& inputs, const std::vector<int>& labels,
                              const std::vector<std::size_t>& idx, int max_length) {
  nn::PaddedBatch<S> batch;
  for (std::size_t i : idx) {
    const PaddedSequence p = pad_or_crop(inputs[i], max_length);
    batch.push_back(p.values.template cast<S>(), p.valid_length, labels[i]);
  }
  return batch;
}

Confusion confusion_of(const std::vector<int>& predicted, const std::vector<int>& truth) {
  Confusion c{};
  for (std::size_t i = 0; i < truth.size(); ++i)
    c[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])] += 1;
  return c;
}

struct TrainedRun {
  nn::SequenceModel<double> model;
  int best_epoch = 0;
  double test_accuracy = 0.0;
  Confusion confusion{};
};

template <typename S>
TrainedRun train_and_test(const nn::NetConfig& net, nn::TrainConfig tc,
                          const std::vector<Eigen::MatrixXd>& inputs, const std::vector<int>& labels,
                          const std::vector<std::size_t>& train_idx,
                          const std::vector<std::size_t>& valid_idx,
                          const std::vector<std::size_t>& test_idx) {
  const auto train_set = make_batch<S>(inputs, labels, train_idx, net.max_length);
  const auto valid_set = make_batch<S>(inputs, labels, valid_idx, net.max_length);
  const auto test_set = make_batch<S>(inputs, labels, test_idx, net.max_length);
  nn::TrainResult<S> result = nn::train<S>(net, tc, train_set, valid_set);
  TrainedRun run;
  const std::vector<int> predicted = nn::predict(result.model, test_set);
  run.test_accuracy = accuracy(predicted, test_set.labels);
  run.confusion = confusion_of(predicted, test_set.labels);
  run.best_epoch = result.best_epoch;
  run.model = result.model.template cast<double>();
  return run;
}

template <typename S>
std::vector<int> predict_as(const nn::SequenceModel<double>& model, const nn::PaddedBatch<S>& batch) {
  return nn::predict(model.template cast<S>(), batch);
}

std::string format_accuracy(double a) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << a;
  return s.str();
}

}  // namespace

struct Experiment::Impl {
  std::vector<Waveform> waves;
  std::vector<int> labels;
  std::vector<std::size_t> train_idx, valid_idx, test_idx, fit_idx;  // fit = train + valid
  std::map<bool, std::vector<Eigen::MatrixXd>> lstm_inputs;          // by VAD flag
  std::vector<FrameFeatures> frames;                                  // full utterances
  std::vector<FrameFeatures> speech_frames;                           // after VAD
  std::map<std::pair<int, bool>, std::vector<TrainedRun>> runs;      // (pooling, vad)
  std::mutex mutex;
};

Experiment::Experiment(Manifest manifest, SplitPlan plan, ExperimentOptions options, ProgressFn progress)
    : manifest_(std::move(manifest)),
      plan_(std::move(plan)),
      options_(std::move(options)),
      progress_(std::move(progress)),
      impl_(std::make_unique<Impl>()) {
  options_.validate();
  if (manifest_.empty()) throw DataError("empty manifest");
  check_speaker_disjoint(plan_, manifest_);
  auto& im = *impl_;
  for (const auto& r : manifest_) im.labels.push_back(static_cast<int>(r.level()));
  im.train_idx = plan_.indices(manifest_, Partition::Train);
  im.valid_idx = plan_.indices(manifest_, Partition::Valid);
  im.test_idx = plan_.indices(manifest_, Partition::Test);
  if (im.train_idx.empty() || im.valid_idx.empty() || im.test_idx.empty())
    throw DataError("every partition needs at least one utterance");
  im.fit_idx = im.train_idx;
  im.fit_idx.insert(im.fit_idx.end(), im.valid_idx.begin(), im.valid_idx.end());
  std::sort(im.fit_idx.begin(), im.fit_idx.end());

  im.waves.resize(manifest_.size());
  std::vector<Warnings> w(manifest_.size());
  parallel_for(manifest_.size(), options_.jobs, [&](std::size_t i) {
    im.waves[i] = load_wav(manifest_[i].path, &w[i]);
    if (im.waves[i].sample_rate != kCanonicalSampleRate)
      throw DataError(manifest_[i].path.string() + ": features require 16 kHz audio");
  });
  for (auto& ws : w) warnings_.insert(warnings_.end(), ws.begin(), ws.end());
}

Experiment::~Experiment() = default;

const nn::SequenceModel<double>& Experiment::lstm_model(nn::Pooling pooling, bool vad, int r) {
  auto& im = *impl_;
  const auto key = std::make_pair(static_cast<int>(pooling), vad);
  if (!im.runs.contains(key)) {
    if (!im.lstm_inputs.contains(vad)) {
      std::vector<Eigen::MatrixXd> inputs(im.waves.size());
      parallel_for(im.waves.size(), options_.jobs, [&](std::size_t i) {
        inputs[i] = lstm_input(im.waves[i], vad ? &options_.vad : nullptr);
      });
      im.lstm_inputs[vad] = std::move(inputs);
    }
    const auto& inputs = im.lstm_inputs[vad];
    nn::NetConfig net = options_.net;
    net.pooling = pooling;
    std::vector<TrainedRun> runs(static_cast<std::size_t>(options_.runs));
    std::atomic<int> done{0};
    parallel_for(runs.size(), options_.jobs, [&](std::size_t k) {
      nn::TrainConfig tc = options_.train;
      tc.seed = options_.seed + k;
      runs[k] = options_.precision == Precision::Float
                    ? train_and_test<float>(net, tc, inputs, im.labels, im.train_idx, im.valid_idx, im.test_idx)
                    : train_and_test<double>(net, tc, inputs, im.labels, im.train_idx, im.valid_idx, im.test_idx);
      if (progress_) {
        std::lock_guard<std::mutex> lock(im.mutex);
        progress_(std::string(nn::pooling_name(pooling)) + (vad ? "+vad" : "") + " run " +
                  std::to_string(++done) + "/" + std::to_string(runs.size()) + ": test accuracy " +
                  format_accuracy(runs[k].test_accuracy) + " (best epoch " +
                  std::to_string(runs[k].best_epoch) + ")");
      }
    });
    im.runs[key] = std::move(runs);
  }
  return im.runs.at(key).at(static_cast<std::size_t>(r)).model;
}

RunReport Experiment::run(Condition c) {
  const ConditionInfo& info = condition_info(c);
  auto& im = *impl_;
  RunReport report;
  report.condition = std::string(info.name);

  if (!info.is_svm) {
    lstm_model(info.pooling, info.vad, 0);
    for (const TrainedRun& r : im.runs.at({static_cast<int>(info.pooling), info.vad})) {
      report.accuracies.push_back(r.test_accuracy);
      report.confusions.push_back(r.confusion);
      report.best_epochs.push_back(r.best_epoch);
    }
    return report;
  }

  std::vector<FrameFeatures>& cache = info.vad ? im.speech_frames : im.frames;
  if (cache.empty()) {
    std::vector<FrameFeatures> computed(im.waves.size());
    parallel_for(im.waves.size(), options_.jobs, [&](std::size_t i) {
      if (info.vad) {
        const Waveform speech = speech_only(im.waves[i], vad_decide(im.waves[i], options_.vad),
                                            FrameGrid::standard());
        computed[i] = frame_features(speech, options_.modulation);
      } else {
        computed[i] = frame_features(im.waves[i], options_.modulation);
      }
    });
    cache = std::move(computed);
  }

  // Per-run frame weights: attention weights of run r, zero beyond L.
  auto weights_for_run = [&](int r) {
    std::vector<Eigen::VectorXd> weights(im.waves.size());
    const nn::SequenceModel<double>& model = lstm_model(nn::Pooling::Attention, false, r);
    const nn::SequenceModel<float> model_f = model.cast<float>();
    const auto& inputs = im.lstm_inputs.at(false);
    parallel_for(im.waves.size(), options_.jobs, [&](std::size_t i) {
      const PaddedSequence p = pad_or_crop(inputs[i], model.config.max_length);
      Eigen::VectorXd alpha;
      if (options_.precision == Precision::Float) {
        alpha = nn::forward_item(model_f, Eigen::MatrixXf(p.values.cast<float>()), p.valid_length, false)
                    .alpha.cast<double>();
      } else {
        alpha = nn::forward_item(model, p.values, p.valid_length, false).alpha;
      }
      Eigen::VectorXd full = Eigen::VectorXd::Zero(cache[i].mfcc.rows());
      full.head(alpha.size()) = alpha / alpha.sum();
      weights[i] = std::move(full);
    });
    return weights;
  };

  const int repeats = info.attention_weights ? options_.runs : 1;
  for (int r = 0; r < repeats; ++r) {
    std::vector<Eigen::VectorXd> weights;
    if (info.attention_weights) weights = weights_for_run(r);
    const Index n = static_cast<Index>(im.waves.size());
    std::vector<Eigen::VectorXd> rows(im.waves.size());
    std::vector<Warnings> warns(im.waves.size());
    parallel_for(im.waves.size(), options_.jobs, [&](std::size_t i) {
      rows[i] = pool_features(cache[i], info.features, info.attention_weights ? &weights[i] : nullptr,
                              options_.modulation, &warns[i]);
    });
    if (r == 0)
      for (auto& ws : warns) warnings_.insert(warnings_.end(), ws.begin(), ws.end());
    Eigen::MatrixXd x(n, rows[0].size());
    for (Index i = 0; i < n; ++i) x.row(i) = rows[static_cast<std::size_t>(i)].transpose();
    if (!x.allFinite()) throw NumericError(report.condition + ": non-finite utterance features");

    auto subset = [&](const std::vector<std::size_t>& idx, std::vector<int>& y) {
      Eigen::MatrixXd out(static_cast<Index>(idx.size()), x.cols());
      y.clear();
      for (std::size_t k = 0; k < idx.size(); ++k) {
        out.row(static_cast<Index>(k)) = x.row(static_cast<Index>(idx[k]));
        y.push_back(im.labels[idx[k]]);
      }
      return out;
    };
    std::vector<int> y_fit, y_test;
    const Eigen::MatrixXd x_fit = subset(im.fit_idx, y_fit);
    const Eigen::MatrixXd x_test = subset(im.test_idx, y_test);
    const SvmModel model = svm_train_ova(x_fit, y_fit, kNumLevels, options_.grid, options_.folds, options_.smo);
    const std::vector<int> predicted = svm_predict(model, x_test);
    report.accuracies.push_back(accuracy(predicted, y_test));
    report.confusions.push_back(confusion_of(predicted, y_test));
    double cv = 0.0;
    for (const GridScore& g : model.search)
      if (g.C == model.C && g.gamma == model.gamma) cv = g.cv_accuracy;
    report.svm_choices.push_back({model.C, model.gamma, cv});
    if (progress_)
      progress_(report.condition + (repeats > 1 ? " run " + std::to_string(r + 1) + "/" + std::to_string(repeats) : "") +
                ": test accuracy " + format_accuracy(report.accuracies.back()));
  }
  if (info.attention_weights && info.features == FeatureSet::Falk)
    report.note = "attention weights applied to frame-level intermediates (interpretation)";
  return report;
}

RunReport run_condition(Condition c, const Manifest& manifest, const ExperimentOptions& options,
                        ProgressFn progress) {
  Experiment e(manifest, make_splits(manifest, options.proportions, options.seed), options,
               std::move(progress));
  return e.run(c);
}

// ---------------------------------------------------------------------------
// Attention export

AttentionTrace attention_trace(const nn::SequenceModel<double>& model, const Waveform& w) {
  if (model.config.pooling != nn::Pooling::Attention)
    throw UsageError("attention export needs a model with an attention head");
  const PaddedSequence p = pad_or_crop(lstm_input(w), model.config.max_length);
  const auto tr = nn::forward_item(model, p.values, p.valid_length, false);
  const FrameGrid grid = FrameGrid::standard(w.sample_rate);
  AttentionTrace out;
  out.alpha = tr.alpha;
  out.frame_time_s.resize(p.valid_length);
  for (int t = 0; t < p.valid_length; ++t)
    out.frame_time_s(t) = static_cast<double>(t * grid.hop_length + grid.frame_length / 2) / w.sample_rate;
  out.mean_weight = 1.0 / p.valid_length;
  return out;
}

void write_attention_csv(const std::filesystem::path& path, const AttentionTrace& trace) {
  std::ostringstream out;
  out << "frame_time_s,alpha,mean_weight\n" << std::setprecision(9);
  for (Index t = 0; t < trace.alpha.size(); ++t)
    out << round_significant(trace.frame_time_s(t)) << ',' << round_significant(trace.alpha(t)) << ','
        << round_significant(trace.mean_weight) << '\n';
  write_text(path, out.str());
}

void write_waveform_csv(const std::filesystem::path& path, const Waveform& w) {
  std::ostringstream out;
  out << "time_s,amplitude\n" << std::setprecision(9);
  for (Index i = 0; i < w.size(); ++i)
    out << round_significant(static_cast<double>(i) / w.sample_rate) << ','
        << round_significant(w.samples(i)) << '\n';
  write_text(path, out.str());
}

}  // namespace ispc
