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

// Command-line entry point.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
// Errors are printed on stderr as "ERROR:<code>: <message>".

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ispc/audio.hpp"
#include "ispc/container.hpp"
#include "ispc/error.hpp"
#include "ispc/experiment.hpp"
#include "ispc/features.hpp"
#include "ispc/manifest.hpp"
#include "ispc/nn/checkpoint.hpp"
#include "ispc/nn/grad_check.hpp"
#include "ispc/nn/train.hpp"
#include "ispc/vad.hpp"

namespace fs = std::filesystem;

namespace {

using namespace ispc;

struct Common {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string format = "json";
  std::string config;
};

struct Settings {
  std::string profile = "canonical";
  std::string precision = "float";
  std::string pooling = "attention";
  ExperimentOptions opts = ExperimentOptions::canonical();
  std::vector<std::string> conditions;
  bool vad = false;
  std::string manifest, splits, out, model, wav, partition = "test", waveform_out, kind = "all";
  int speakers_per_class = 4;
  int utterances = 10;
  double step = 1e-5;
};

std::string number(double v) {
  std::ostringstream s;
  s << std::setprecision(9) << round_significant(v);
  return s.str();
}

// Network, training and VAD flags shared by the training subcommands. The
// options stay attached to `opts` so that a profile can be applied to the
// fields the user left unset.
struct ModelFlags {
  CLI::Option *dense1, *lstm, *dense2, *lr, *epochs;
};

ModelFlags add_model_flags(CLI::App* sub, Settings& s) {
  auto& n = s.opts.net;
  auto& t = s.opts.train;
  ModelFlags f{};
  sub->add_option("--profile", s.profile, "Hyperparameter profile")->check(CLI::IsMember({"canonical", "desk"}));
  sub->add_option("--max-length", n.max_length, "Padded sequence length L");
  f.dense1 = sub->add_option("--dense1-units", n.dense1_units, "First dense layer width");
  f.lstm = sub->add_option("--lstm-units", n.lstm_units, "LSTM units");
  f.dense2 = sub->add_option("--dense2-units", n.dense2_units, "Second dense layer width");
  sub->add_option("--dropout", n.dropout_rate, "Dropout rate on the second dense layer");
  f.lr = sub->add_option("--learning-rate", t.learning_rate, "Adam learning rate");
  sub->add_option("--batch-size", t.batch_size, "Mini-batch size");
  f.epochs = sub->add_option("--epochs", t.max_epochs, "Maximum number of epochs");
  sub->add_option("--beta1", t.beta1);
  sub->add_option("--beta2", t.beta2);
  sub->add_option("--adam-epsilon", t.epsilon);
  sub->add_flag("--clip-gradients", t.clip_gradients, "Clip the global gradient norm");
  sub->add_option("--clip-norm", t.clip_norm);
  sub->add_option("--precision", s.precision, "Training scalar")->check(CLI::IsMember({"float", "double"}));
  return f;
}

void add_vad_flags(CLI::App* sub, Settings& s) {
  auto& v = s.opts.vad;
  sub->add_option("--vad-noise-frames", v.noise_init_frames, "Frames used to initialise the noise PSD");
  sub->add_option("--vad-threshold", v.lrt_threshold, "Threshold on the mean log likelihood ratio");
  sub->add_option("--vad-hangover", v.hangover_frames, "Longest bridged non-speech gap (frames)");
  sub->add_option("--vad-smoothing", v.snr_smoothing, "Decision-directed smoothing factor");
}

// Unset options take the profile value, which also becomes the default shown
// in the resolved config so that the block replays to the same run.
void apply_profile(Settings& s, const ModelFlags& f) {
  if (s.profile != "desk") return;
  const ExperimentOptions d = ExperimentOptions::desk();
  auto set = [](CLI::Option* o, auto& field, auto value) {
    if (o->count() > 0) return;
    field = value;
    o->default_str(number(value));
  };
  set(f.dense1, s.opts.net.dense1_units, d.net.dense1_units);
  set(f.lstm, s.opts.net.lstm_units, d.net.lstm_units);
  set(f.dense2, s.opts.net.dense2_units, d.net.dense2_units);
  set(f.lr, s.opts.train.learning_rate, d.train.learning_rate);
  set(f.epochs, s.opts.train.max_epochs, d.train.max_epochs);
}

// Reads a flat key=value file into "--key=value" tokens.
std::vector<std::string> config_tokens(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    auto strip = [](std::string x) {
      const auto a = x.find_first_not_of(" \t\r");
      const auto b = x.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string{} : x.substr(a, b - a + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    if (key.empty() || key == "config") throw UsageError(path.string() + ":" + std::to_string(line_no) + ": bad key");
    tokens.push_back("--" + key + "=" + strip(line.substr(eq + 1)));
  }
  return tokens;
}

void print_resolved(const CLI::App& app, const CLI::App& sub) {
  std::cerr << "# resolved config: " << app.get_name() << ' ' << sub.get_name() << '\n';
  auto dump = [](const CLI::App& a) {
    for (const CLI::Option* o : a.get_options()) {
      const std::string name = o->get_single_name();
      if (name == "help" || name == "config" || o->get_lnames().empty()) continue;
      std::string value;
      if (o->count() > 0) {
        for (const auto& r : o->results()) value += (value.empty() ? "" : ",") + r;
      } else {
        value = o->get_default_str();
        if (value.size() >= 2 && value.front() == '[' && value.back() == ']') value = value.substr(1, value.size() - 2);
      }
      if (value.empty()) continue;
      std::cerr << name << '=' << value << '\n';
    }
  };
  dump(app);
  dump(sub);
  std::cerr << "# end resolved config\n";
}

Manifest load_nonempty_manifest(const std::string& path) {
  if (path.empty()) throw UsageError("--manifest is required");
  Manifest m = read_manifest(path);
  if (m.empty()) throw DataError("manifest " + path + " lists no utterances");
  return m;
}

void report_warnings(const Warnings& w) {
  for (const auto& msg : w) std::cerr << "WARNING: " << msg << '\n';
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_synth(const Common& c, const Settings& s) {
  if (s.out.empty()) throw UsageError("--out is required");
  CorpusSpec spec;
  spec.speakers_per_class = s.speakers_per_class;
  spec.utterances_per_speaker = s.utterances;
  spec.seed = c.seed;
  const Manifest m = synth_corpus(spec, s.out);
  std::cout << "wrote " << m.size() << " utterances to " << (fs::path(s.out) / "manifest.csv").string() << '\n';
  return 0;
}

int cmd_featurize(const Common& c, const Settings& s) {
  if (s.out.empty()) throw UsageError("--out is required");
  const Manifest m = load_nonempty_manifest(s.manifest);
  fs::create_directories(s.out);
  const bool all = s.kind == "all";
  std::vector<std::string> rows(m.size());
  std::vector<Warnings> warns(m.size());
  parallel_for(m.size(), c.jobs, [&](std::size_t i) {
    const Waveform w = load_wav(m[i].path, &warns[i]);
    if (w.sample_rate != kCanonicalSampleRate) throw DataError(m[i].path.string() + ": features require 16 kHz audio");
    const fs::path stem = fs::path(s.out) / m[i].path.stem();
    std::ostringstream row;
    row << m[i].path.string() << ',' << m[i].speaker_id << ',' << m[i].score;
    if (all || s.kind == "logmel") write_feature_matrix(stem.string() + ".logmel.feat", log_mel(w).values);
    if (all || s.kind == "mfcc") {
      const Eigen::MatrixXd mf = mfcc_delta(w);
      write_feature_matrix(stem.string() + ".mfcc.feat", mf);
      const Eigen::VectorXd mean = mf.colwise().mean().transpose();
      for (Eigen::Index k = 0; k < mean.size(); ++k) row << ',' << number(mean(k));
    }
    if (all || s.kind == "modspec") {
      const ModulationSpectrum ms = modulation_spectrum(w, s.opts.modulation);
      write_feature_matrix(stem.string() + ".modspec.feat", ms.energies);
      const Eigen::VectorXd flat = ms.flattened();
      for (Eigen::Index k = 0; k < flat.size(); ++k) row << ',' << number(flat(k));
    }
    if (all || s.kind == "falk") {
      const Eigen::VectorXd f = utterance_features(w, FeatureSet::Falk, nullptr, s.opts.modulation, &warns[i]);
      for (Eigen::Index k = 0; k < f.size(); ++k) row << ',' << number(f(k));
    }
    rows[i] = row.str();
  });
  std::ofstream csv(fs::path(s.out) / "utterance_features.csv");
  if (!csv) throw DataError("cannot write utterance_features.csv");
  csv << "path,speaker_id,score";
  if (all || s.kind == "mfcc")
    for (int k = 0; k < 2 * kNumCepstra; ++k) csv << ",mfcc_" << k;
  if (all || s.kind == "modspec")
    for (int k = 0; k < kAcousticBands * kModulationBands; ++k) csv << ",modspec_" << k;
  if (all || s.kind == "falk")
    csv << ",std_delta_c0,lp_residual_kurtosis,lhmr,pct_voiced,f0_std,f0_range";
  csv << '\n';
  for (const auto& r : rows) csv << r << '\n';
  for (const auto& w : warns) report_warnings(w);
  std::cout << "featurized " << m.size() << " utterances into " << s.out << '\n';
  return 0;
}

int cmd_vad(const Common&, const Settings& s) {
  if (s.wav.empty()) throw UsageError("--wav is required");
  Warnings warns;
  const Waveform w = load_wav(s.wav, &warns);
  report_warnings(warns);
  const VadDecision d = vad_decide(w, s.opts.vad);
  std::ostringstream out;
  out << "frame_index,decision,llr\n";
  for (Eigen::Index t = 0; t < d.frames(); ++t)
    out << t << ',' << (d.speech[static_cast<std::size_t>(t)] ? 1 : 0) << ',' << number(d.llr(t)) << '\n';
  if (s.out.empty()) {
    std::cout << out.str();
  } else {
    std::ofstream f(s.out);
    if (!f) throw DataError("cannot write " + s.out);
    f << out.str();
  }
  return 0;
}

int cmd_split(const Common& c, const Settings& s) {
  const Manifest m = load_nonempty_manifest(s.manifest);
  const SplitPlan plan = make_splits(m, s.opts.proportions, c.seed);
  if (!s.out.empty()) write_splits(s.out, plan);
  std::cout << "train " << number(plan.fractions[0]) << ", valid " << number(plan.fractions[1]) << ", test "
            << number(plan.fractions[2]) << '\n';
  return 0;
}

SplitPlan plan_for(const Manifest& m, const Common& c, const Settings& s) {
  return s.splits.empty() ? make_splits(m, s.opts.proportions, c.seed) : read_splits(s.splits);
}

template <typename S>
nn::PaddedBatch<S> batch_of(const Manifest& m, const std::vector<std::size_t>& idx, const nn::NetConfig& net,
                            const VadConfig* vad, int jobs) {
  std::vector<Eigen::MatrixXd> inputs(idx.size());
  parallel_for(idx.size(), jobs, [&](std::size_t k) { inputs[k] = lstm_input(load_wav(m[idx[k]].path), vad); });
  nn::PaddedBatch<S> b;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const PaddedSequence p = pad_or_crop(inputs[k], net.max_length);
    b.push_back(p.values.template cast<S>(), p.valid_length, static_cast<int>(m[idx[k]].level()));
  }
  return b;
}

template <typename S>
int train_typed(const Common& c, const Settings& s, const Manifest& m, const SplitPlan& plan) {
  nn::NetConfig net = s.opts.net;
  net.pooling = nn::parse_pooling(s.pooling);
  nn::TrainConfig tc = s.opts.train;
  tc.seed = c.seed;
  const VadConfig* vad = s.vad ? &s.opts.vad : nullptr;
  const auto train_set = batch_of<S>(m, plan.indices(m, Partition::Train), net, vad, c.jobs);
  const auto valid_set = batch_of<S>(m, plan.indices(m, Partition::Valid), net, vad, c.jobs);
  if (train_set.empty() || valid_set.empty()) throw DataError("train and valid partitions must be nonempty");
  if (c.format == "csv") std::cout << "epoch,train_loss,train_accuracy,valid_loss,valid_accuracy\n";
  const auto result = nn::train<S>(net, tc, train_set, valid_set, [&](const nn::EpochRecord& r) {
    if (c.format == "csv")
      std::cout << r.epoch << ',' << number(r.train_loss) << ',' << number(r.train_accuracy) << ','
                << number(r.valid_loss) << ',' << number(r.valid_accuracy) << '\n';
    else
      std::cout << nlohmann::json{{"epoch", r.epoch}, {"train_loss", round_significant(r.train_loss)},
                                  {"train_accuracy", round_significant(r.train_accuracy)},
                                  {"valid_loss", round_significant(r.valid_loss)},
                                  {"valid_accuracy", round_significant(r.valid_accuracy)}}
                       .dump()
                << '\n';
    std::cout.flush();
  });
  nn::Checkpoint ckpt;
  ckpt.model = result.model.template cast<double>();
  ckpt.seed = c.seed;
  ckpt.epoch = result.best_epoch;
  ckpt.metrics = {{"best_valid_accuracy", round_significant(result.best_valid_accuracy)}, {"vad", s.vad}};
  nn::save_checkpoint(s.out, ckpt);
  std::cerr << "saved best model (epoch " << result.best_epoch << ") to " << s.out << '\n';
  return 0;
}

int cmd_train(const Common& c, const Settings& s) {
  if (s.out.empty()) throw UsageError("--out is required");
  const Manifest m = load_nonempty_manifest(s.manifest);
  const SplitPlan plan = plan_for(m, c, s);
  return s.precision == "double" ? train_typed<double>(c, s, m, plan) : train_typed<float>(c, s, m, plan);
}

int cmd_evaluate(const Common& c, const Settings& s) {
  if (s.model.empty()) throw UsageError("--model is required");
  const Manifest m = load_nonempty_manifest(s.manifest);
  const SplitPlan plan = plan_for(m, c, s);
  const nn::Checkpoint ckpt = nn::load_checkpoint(s.model);
  const bool vad = ckpt.metrics.value("vad", false);
  const auto idx = plan.indices(m, parse_partition(s.partition));
  if (idx.empty()) throw DataError("partition '" + s.partition + "' is empty");
  const auto batch = batch_of<double>(m, idx, ckpt.model.config, vad ? &s.opts.vad : nullptr, c.jobs);
  const std::vector<int> pred = nn::predict(ckpt.model, batch);
  RunReport r;
  r.condition = std::string("checkpoint/") + std::string(nn::pooling_name(ckpt.model.config.pooling)) + (vad ? "+vad" : "");
  r.accuracies.push_back(accuracy(pred, batch.labels));
  Confusion conf{};
  for (std::size_t i = 0; i < pred.size(); ++i)
    conf[static_cast<std::size_t>(batch.labels[i])][static_cast<std::size_t>(pred[i])] += 1;
  r.confusions.push_back(conf);
  if (c.format == "csv")
    std::cout << report_csv({r});
  else
    std::cout << to_json(r).dump(2) << '\n';
  if (!s.out.empty()) write_report_json(s.out, {r});
  return 0;
}

int cmd_run_condition(const Common& c, const Settings& s) {
  const Manifest m = load_nonempty_manifest(s.manifest);
  ExperimentOptions o = s.opts;
  o.seed = c.seed;
  o.jobs = c.jobs;
  o.precision = s.precision == "double" ? Precision::Double : Precision::Float;
  std::vector<Condition> conds;
  for (const auto& name : s.conditions) {
    if (name == "all") {
      for (const auto& info : all_conditions()) conds.push_back(info.condition);
    } else {
      conds.push_back(parse_condition(name));
    }
  }
  if (conds.empty()) throw UsageError("--condition is required");
  Experiment e(m, plan_for(m, c, s), o, [](const std::string& msg) { std::cerr << msg << '\n'; });
  std::vector<RunReport> reports;
  for (Condition cond : conds) reports.push_back(e.run(cond));
  report_warnings(e.warnings());
  nlohmann::json config = to_json(o);
  config["splits"] = to_json(e.plan());
  if (!s.out.empty()) write_report_json(s.out, reports, config);
  if (c.format == "csv") {
    std::cout << report_csv(reports);
  } else {
    for (const auto& r : reports)
      std::cout << std::left << std::setw(20) << r.condition << " mean " << number(r.mean()) << " std "
                << number(r.stddev()) << " (" << r.accuracies.size() << " runs)\n";
  }
  return 0;
}

int cmd_export_attention(const Common&, const Settings& s) {
  if (s.model.empty() || s.wav.empty() || s.out.empty())
    throw UsageError("--model, --wav and --out are required");
  const nn::Checkpoint ckpt = nn::load_checkpoint(s.model);
  const Waveform w = load_wav(s.wav);
  write_attention_csv(s.out, attention_trace(ckpt.model, w));
  if (!s.waveform_out.empty()) write_waveform_csv(s.waveform_out, w);
  return 0;
}

int cmd_grad_check(const Common& c, const Settings& s) {
  std::vector<nn::Pooling> heads;
  if (s.pooling == "all")
    heads = {nn::Pooling::Last, nn::Pooling::Mean, nn::Pooling::Attention};
  else
    heads = {nn::parse_pooling(s.pooling)};
  constexpr double kLimit = 1e-4;
  double worst = 0.0;
  nlohmann::json out = nlohmann::json::array();
  for (nn::Pooling p : heads) {
    const nn::GradCheckReport r = nn::grad_check(nn::tiny_net_config(p), c.seed, s.step);
    worst = std::max(worst, r.max_relative_error);
    out.push_back({{"pooling", nn::pooling_name(p)},
                   {"max_relative_error", r.max_relative_error},
                   {"entries", r.entries_checked}});
    if (c.format == "csv") {
      if (out.size() == 1) std::cout << "pooling,max_relative_error,entries\n";
      std::cout << nn::pooling_name(p) << ',' << r.max_relative_error << ',' << r.entries_checked << '\n';
    }
  }
  if (c.format != "csv") std::cout << out.dump(2) << '\n';
  std::cout << "max relative error " << worst << '\n';
  if (!(worst < kLimit)) throw NumericError("gradient check failed: max relative error " + std::to_string(worst));
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"Speech intelligibility level classification"};
  app.name("ispc");
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();

  Common c;
  Settings s;
  app.add_option("--seed", c.seed, "Base seed for every random stream");
  app.add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--format", c.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--config", c.config, "Flat key=value file; command-line flags win");

  auto* synth = app.add_subcommand("synth-data", "Generate the synthetic corpus");
  synth->add_option("--out", s.out, "Output directory");
  synth->add_option("--speakers-per-class", s.speakers_per_class);
  synth->add_option("--utterances", s.utterances, "Utterances per speaker");

  auto* feat = app.add_subcommand("featurize", "Extract features for every utterance");
  feat->add_option("--manifest", s.manifest);
  feat->add_option("--out", s.out, "Output directory");
  feat->add_option("--kind", s.kind)->check(CLI::IsMember({"all", "logmel", "mfcc", "modspec", "falk"}));
  feat->add_option("--lhmr-split", s.opts.modulation.low_band_split);

  auto* vad = app.add_subcommand("vad", "Per-frame speech decisions as CSV");
  vad->add_option("--wav", s.wav);
  vad->add_option("--out", s.out, "CSV path (default stdout)");
  add_vad_flags(vad, s);

  auto* split = app.add_subcommand("split", "Speaker-independent train/valid/test split");
  split->add_option("--manifest", s.manifest);
  split->add_option("--out", s.out, "splits.json path");
  split->add_option("--proportions", s.opts.proportions)->delimiter(',');

  auto* train = app.add_subcommand("train", "Train one LSTM model");
  train->add_option("--manifest", s.manifest);
  train->add_option("--splits", s.splits, "splits.json (default: computed from --seed)");
  train->add_option("--out", s.out, "Checkpoint path");
  train->add_option("--pooling", s.pooling)->check(CLI::IsMember({"last", "mean", "attention"}));
  train->add_flag("--vad", s.vad, "Drop non-speech frames before normalization");
  const ModelFlags train_flags = add_model_flags(train, s);
  add_vad_flags(train, s);

  auto* eval = app.add_subcommand("evaluate", "Accuracy of a checkpoint on a partition");
  eval->add_option("--manifest", s.manifest);
  eval->add_option("--splits", s.splits);
  eval->add_option("--model", s.model);
  eval->add_option("--partition", s.partition)->check(CLI::IsMember({"train", "valid", "test"}));
  eval->add_option("--out", s.out, "report.json path");
  add_vad_flags(eval, s);

  auto* runc = app.add_subcommand("run-condition", "Run experimental conditions");
  runc->add_option("--manifest", s.manifest);
  runc->add_option("--splits", s.splits);
  runc->add_option("--condition", s.conditions, "Condition name(s) or 'all'")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  runc->add_option("--runs", s.opts.runs, "Repetitions of LSTM and attention-weighted conditions");
  runc->add_option("--out", s.out, "report.json path");
  runc->add_option("--lhmr-split", s.opts.modulation.low_band_split);
  runc->add_option("--svm-folds", s.opts.folds);
  runc->add_option("--svm-tol", s.opts.smo.tol);
  const ModelFlags run_flags = add_model_flags(runc, s);
  add_vad_flags(runc, s);

  auto* exp = app.add_subcommand("export-attention", "Attention weights of one utterance as CSV");
  exp->add_option("--model", s.model);
  exp->add_option("--wav", s.wav);
  exp->add_option("--out", s.out, "Attention CSV path");
  exp->add_option("--waveform-out", s.waveform_out, "Waveform overlay CSV path");

  auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient check on a tiny network");
  grad->add_option("--pooling", s.pooling)->check(CLI::IsMember({"all", "last", "mean", "attention"}));
  grad->add_option("--step", s.step, "Central difference step");
  s.pooling = "attention";

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  // Splice config-file tokens right after the subcommand name so later
  // command-line flags take precedence.
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (!config_path.empty()) {
    const auto tokens = config_tokens(config_path);
    auto pos = std::find_if(args.begin(), args.end(), [&](const std::string& a) {
      return app.get_subcommand_no_throw(a) != nullptr;
    });
    if (pos != args.end()) ++pos;
    args.insert(pos, tokens.begin(), tokens.end());
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERROR:1: " << e.what() << '\n';
    return 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (grad->parsed() && grad->get_option("--pooling")->count() == 0) {
    s.pooling = "all";
    grad->get_option("--pooling")->default_str("all");
  }
  if (train->parsed()) apply_profile(s, train_flags);
  if (runc->parsed()) apply_profile(s, run_flags);
  print_resolved(app, *sub);

  if (synth->parsed()) return cmd_synth(c, s);
  if (feat->parsed()) return cmd_featurize(c, s);
  if (vad->parsed()) return cmd_vad(c, s);
  if (split->parsed()) return cmd_split(c, s);
  if (train->parsed()) return cmd_train(c, s);
  if (eval->parsed()) return cmd_evaluate(c, s);
  if (runc->parsed()) return cmd_run_condition(c, s);
  if (exp->parsed()) return cmd_export_attention(c, s);
  return cmd_grad_check(c, s);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ispc::UsageError& e) {
    std::cerr << "ERROR:1: " << e.what() << '\n';
    return 1;
  } catch (const ispc::NumericError& e) {
    std::cerr << "ERROR:3: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "ERROR:2: " << e.what() << '\n';
    return 2;
  }
}
