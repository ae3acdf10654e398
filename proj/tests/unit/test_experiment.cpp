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

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "ispc/container.hpp"
#include "ispc/experiment.hpp"
#include "support/signals.hpp"

using namespace ispc;

namespace {

Manifest fake_manifest(int speakers_per_class, int files_per_speaker) {
  Manifest m;
  const int scores[] = {20, 50, 80};
  for (int c = 0; c < 3; ++c)
    for (int s = 0; s < speakers_per_class; ++s)
      for (int f = 0; f < files_per_speaker; ++f)
        m.push_back({"/nonexistent/" + std::to_string(c) + "_" + std::to_string(s) + "_" + std::to_string(f) + ".wav",
                     "S" + std::to_string(c) + "_" + std::to_string(s), scores[c]});
  return m;
}

/// Small synthetic corpus shared by the protocol tests.
const Manifest& small_corpus() {
  static const Manifest m = [] {
    CorpusSpec spec;
    spec.speakers_per_class = 3;
    spec.utterances_per_speaker = 6;
    spec.seed = 5;
    return synth_corpus(spec, testing::temp_dir("exp_corpus"));
  }();
  return m;
}

ExperimentOptions quick_options() {
  ExperimentOptions o = ExperimentOptions::desk();
  o.net.dense1_units = 4;
  o.net.lstm_units = 4;
  o.net.dense2_units = 4;
  o.net.max_length = 200;
  o.train.max_epochs = 2;
  o.train.batch_size = 8;
  o.folds = 2;
  o.grid.C = {1.0};
  o.grid.gamma_scale = {1.0};
  o.seed = 3;
  return o;
}

}  // namespace

TEST_CASE("score binning boundaries") {
  CHECK(bin_score(33) == Level::Low);
  CHECK(bin_score(34) == Level::Medium);
  CHECK(bin_score(66) == Level::Medium);
  CHECK(bin_score(67) == Level::High);
  CHECK(bin_score(0) == Level::Low);
  CHECK(bin_score(100) == Level::High);
  CHECK_THROWS_AS(bin_score(-1), DataError);
  CHECK_THROWS_AS(bin_score(101), DataError);
  int prev = 0;
  for (int s = 0; s <= 100; ++s) {
    const int l = static_cast<int>(bin_score(s));
    CHECK(l >= prev);
    prev = l;
  }
  CHECK(level_name(Level::Medium) == "M");
}

TEST_CASE("manifest round trip and validation") {
  const auto dir = testing::temp_dir("manifest");
  Manifest m = {{dir / "a.wav", "s1", 10}, {dir / "b.wav", "s2", 90}};
  write_manifest(dir / "m.csv", m);
  const Manifest r = read_manifest(dir / "m.csv");
  REQUIRE(r.size() == 2);
  CHECK(r[1].speaker_id == "s2");
  CHECK(r[1].score == 90);
  std::ofstream(dir / "bad.csv") << "path,speaker_id,score\nx.wav,s,140\n";
  CHECK_THROWS_AS(read_manifest(dir / "bad.csv"), DataError);
  std::ofstream(dir / "hdr.csv") << "file,speaker,score\n";
  CHECK_THROWS_AS(read_manifest(dir / "hdr.csv"), DataError);
}

TEST_CASE("speaker-independent splits") {
  SUBCASE("28 speakers with equal files land near the targets") {
    Manifest m = fake_manifest(9, 10);
    m.resize(m.size() - 0);
    // 28 speakers: drop the last two speakers of class H.
    m.erase(std::remove_if(m.begin(), m.end(), [](const ManifestRecord& r) { return r.speaker_id == "S2_7" || r.speaker_id == "S2_8"; }), m.end());
    std::set<std::string> spk;
    for (const auto& r : m) spk.insert(r.speaker_id);
    REQUIRE(spk.size() == 25);
    Manifest extra = fake_manifest(1, 10);
    for (auto& r : extra) r.speaker_id += "_x";
    m.insert(m.end(), extra.begin(), extra.end());
    spk.clear();
    for (const auto& r : m) spk.insert(r.speaker_id);
    REQUIRE(spk.size() == 28);

    const SplitPlan p = make_splits(m, {0.5, 0.15, 0.35}, 4);
    check_speaker_disjoint(p, m);
    CHECK(p.fractions[0] == doctest::Approx(0.50).epsilon(0.1));
    CHECK(std::abs(p.fractions[0] - 0.50) <= 0.05);
    CHECK(std::abs(p.fractions[1] - 0.15) <= 0.05);
    CHECK(std::abs(p.fractions[2] - 0.35) <= 0.05);
    for (Partition part : {Partition::Train, Partition::Valid, Partition::Test}) {
      std::set<Level> levels;
      for (auto i : p.indices(m, part)) levels.insert(m[i].level());
      CHECK(levels.size() == 3);
    }
    const SplitPlan q = make_splits(m, {0.5, 0.15, 0.35}, 4);
    CHECK(q.speakers == p.speakers);
  }
  SUBCASE("files never straddle partitions") {
    const Manifest m = fake_manifest(4, 7);
    const SplitPlan p = make_splits(m);
    std::map<std::string, std::set<Partition>> seen;
    for (Partition part : {Partition::Train, Partition::Valid, Partition::Test})
      for (auto i : p.indices(m, part)) seen[m[i].speaker_id].insert(part);
    for (const auto& [s, parts] : seen) CHECK(parts.size() == 1);
    CHECK(seen.size() == 12);
  }
  SUBCASE("errors") {
    Manifest two = fake_manifest(1, 3);
    two.erase(std::remove_if(two.begin(), two.end(), [](const ManifestRecord& r) { return r.speaker_id == "S2_0"; }), two.end());
    CHECK_THROWS_AS(make_splits(two), DataError);
    CHECK_THROWS_AS(make_splits(fake_manifest(3, 2), {0.5, 0.5, 0.5}), UsageError);
    SplitPlan p = make_splits(fake_manifest(3, 2));
    p.speakers.erase(p.speakers.begin());
    CHECK_THROWS_AS(check_speaker_disjoint(p, fake_manifest(3, 2)), DataError);
    CHECK_THROWS_AS(p.of("nobody"), DataError);
  }
  SUBCASE("JSON round trip") {
    const auto dir = testing::temp_dir("splits");
    const SplitPlan p = make_splits(fake_manifest(3, 4), {0.5, 0.15, 0.35}, 2);
    write_splits(dir / "splits.json", p);
    const SplitPlan r = read_splits(dir / "splits.json");
    CHECK(r.speakers == p.speakers);
    CHECK(r.seed == 2);
    CHECK(partition_name(parse_partition("valid")) == "valid");
  }
}

TEST_CASE("pad_or_crop") {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(750, 32);
  const PaddedSequence a = pad_or_crop(x.topRows(699), 700);
  CHECK(a.valid_length == 699);
  CHECK(a.values.rows() == 700);
  CHECK(a.values.row(699).array().isNaN().all());
  CHECK(a.values.topRows(699) == x.topRows(699));
  const PaddedSequence b = pad_or_crop(x.topRows(700), 700);
  CHECK(b.valid_length == 700);
  CHECK(b.values == x.topRows(700));
  const PaddedSequence c = pad_or_crop(x, 700);
  CHECK(c.valid_length == 700);
  CHECK(c.values == x.topRows(700));
  CHECK_THROWS_AS(pad_or_crop(Eigen::MatrixXd(0, 32), 700), DataError);
}

TEST_CASE("accuracy") {
  CHECK(accuracy({0, 1, 2, 2}, {0, 1, 2, 0}) == 0.75);
  CHECK(accuracy({1, 1}, {1, 1}) == 1.0);
  CHECK(accuracy({0, 0}, {1, 2}) == 0.0);
  CHECK_THROWS_AS(accuracy({}, {}), UsageError);
}

TEST_CASE("weighted feature aggregation") {
  const Eigen::MatrixXd f = Eigen::MatrixXd::Random(5, 3);
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(5, 0.2);
  CHECK((weighted_feature_aggregate(f, uniform) - f.colwise().mean().transpose()).cwiseAbs().maxCoeff() < 1e-15);
  Eigen::VectorXd onehot = Eigen::VectorXd::Zero(5);
  onehot(3) = 1.0;
  CHECK(weighted_feature_aggregate(f, onehot) == Eigen::VectorXd(f.row(3).transpose()));
  const Eigen::MatrixXd g = Eigen::Vector2d(1, 3);
  CHECK(weighted_feature_aggregate(g, Eigen::Vector2d(0.25, 0.75))(0) == 2.5);
  CHECK_THROWS_AS(weighted_feature_aggregate(f, Eigen::Vector2d(0.5, 0.5)), UsageError);
  CHECK_THROWS_AS(weighted_feature_aggregate(f, Eigen::VectorXd::Constant(5, 0.3)), UsageError);
}

TEST_CASE("conditions") {
  CHECK(all_conditions().size() == 13);
  std::set<std::string> names;
  for (const auto& c : all_conditions()) {
    names.insert(std::string(c.name));
    CHECK(parse_condition(c.name) == c.condition);
  }
  CHECK(names.size() == 13);
  CHECK(condition_info(parse_condition("svm+attnw/falk")).attention_weights);
  CHECK(condition_info(parse_condition("lstm-attn")).pooling == nn::Pooling::Attention);
  CHECK(condition_info(parse_condition("basic-lstm+vad")).vad);
  CHECK_THROWS_AS(parse_condition("svm/unknown"), UsageError);
}

TEST_CASE("run reports") {
  RunReport r;
  r.condition = "lstm-attn";
  r.accuracies = {0.5, 0.75, 1.0, 0.8};
  const double mean = (0.5 + 0.75 + 1.0 + 0.8) / 4.0;
  double ss = 0.0;
  for (double a : r.accuracies) ss += (a - mean) * (a - mean);
  CHECK(std::abs(r.mean() - mean) <= 1e-12);
  CHECK(std::abs(r.stddev() - std::sqrt(ss / 3.0)) <= 1e-12);
  RunReport one;
  one.accuracies = {0.6};
  CHECK(one.stddev() == 0.0);

  r.confusions.assign(4, Confusion{});
  r.confusions[0][1][2] = 7;
  r.best_epochs = {1, 2, 3, 4};
  r.note = "x";
  const RunReport back = run_report_from_json(to_json(r));
  CHECK(back.accuracies == r.accuracies);
  CHECK(back.confusions[0][1][2] == 7);
  CHECK(back.best_epochs == r.best_epochs);
  CHECK(back.note == "x");

  const std::string csv = report_csv({r});
  CHECK(csv.rfind("condition,run,accuracy\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  const auto dir = testing::temp_dir("report");
  RunReport p;
  p.condition = "svm/mfcc";
  p.accuracies = {1.0 / 3.0};
  write_report_json(dir / "report.json", {p}, {{"seed", 1}});
  const auto j = nlohmann::json::parse(testing::file_bytes(dir / "report.json"));
  CHECK(j["reports"][0]["accuracies"][0].get<double>() == 0.333333333);
  CHECK(j["config"]["seed"] == 1);
  CHECK(round_significant(123.456789012345) == 123.456789);
}

TEST_CASE("experiment options") {
  const ExperimentOptions c = ExperimentOptions::canonical();
  CHECK(c.net.lstm_units == 128);
  CHECK(c.train.learning_rate == 0.0002);
  CHECK(c.runs == 20);
  CHECK(c.folds == 5);
  c.validate();
  ExperimentOptions bad = c;
  bad.net.input_bands = 20;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = c;
  bad.runs = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  CHECK(to_json(c)["runs"] == 20);
}

TEST_CASE("LSTM input and utterance features") {
  const Waveform w = load_wav(small_corpus()[0].path);
  const Eigen::MatrixXd x = lstm_input(w);
  CHECK(x.cols() == 32);
  CHECK(x.rows() == log_mel(w).frames());
  VadConfig vad;
  const Eigen::MatrixXd xv = lstm_input(w, &vad);
  CHECK(xv.rows() == vad_decide(w, vad).speech_frames());
  CHECK(utterance_features(w, FeatureSet::Mfcc).size() == 26);
  CHECK(utterance_features(w, FeatureSet::Modulation).size() == 184);
  CHECK(utterance_features(w, FeatureSet::Falk).size() == 6);
  CHECK((utterance_features(w, FeatureSet::Mfcc) - mfcc_delta(w).colwise().mean().transpose()).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::VectorXd ones = Eigen::VectorXd::Constant(x.rows(), 1.0 / static_cast<double>(x.rows()));
  for (FeatureSet f : {FeatureSet::Mfcc, FeatureSet::Modulation, FeatureSet::Falk})
    CHECK((utterance_features(w, f, &ones) - utterance_features(w, f)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("protocol structure") {
  const ExperimentOptions o = quick_options();
  const RunReport attn = run_condition(Condition::LstmAttention, small_corpus(), o);
  CHECK(attn.condition == "lstm-attn");
  CHECK(attn.accuracies.size() == 20);
  CHECK(attn.confusions.size() == 20);
  CHECK(attn.best_epochs.size() == 20);
  for (double a : attn.accuracies) {
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
  int total = 0;
  for (const auto& row : attn.confusions[0])
    for (int v : row) total += v;
  const SplitPlan plan = make_splits(small_corpus(), o.proportions, o.seed);
  CHECK(total == static_cast<int>(plan.indices(small_corpus(), Partition::Test).size()));

  const RunReport falk = run_condition(Condition::SvmFalk, small_corpus(), o);
  CHECK(falk.accuracies.size() == 1);
  CHECK(falk.svm_choices.size() == 1);

  const RunReport again = run_condition(Condition::LstmAttention, small_corpus(), o);
  CHECK(again.accuracies == attn.accuracies);
  CHECK(again.confusions == attn.confusions);
}

TEST_CASE("attention weights for SVM conditions") {
  ExperimentOptions o = quick_options();
  o.runs = 2;
  Experiment e(small_corpus(), make_splits(small_corpus(), o.proportions, o.seed), o);
  const RunReport r = e.run(Condition::SvmAttnFalk);
  CHECK(r.accuracies.size() == 2);
  CHECK(!r.note.empty());
  const RunReport m = e.run(Condition::SvmAttnMfcc);
  CHECK(m.accuracies.size() == 2);
  CHECK(e.lstm_model(nn::Pooling::Attention, false, 0).attention.size() == 4);
}

TEST_CASE("attention export") {
  ExperimentOptions o = quick_options();
  o.runs = 1;
  Experiment e(small_corpus(), make_splits(small_corpus(), o.proportions, o.seed), o);
  const auto& model = e.lstm_model(nn::Pooling::Attention, false, 0);
  const Waveform w = load_wav(small_corpus()[3].path);
  const AttentionTrace t = attention_trace(model, w);
  const auto T = std::min<Eigen::Index>(lstm_input(w).rows(), model.config.max_length);
  CHECK(t.alpha.size() == T);
  CHECK(t.frame_time_s.size() == T);
  CHECK(t.alpha.sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(t.mean_weight == doctest::Approx(1.0 / static_cast<double>(T)));
  CHECK(t.frame_time_s(0) == doctest::Approx(0.01));
  CHECK(t.frame_time_s(1) - t.frame_time_s(0) == doctest::Approx(0.01));

  const auto dir = testing::temp_dir("attn_export");
  write_attention_csv(dir / "a.csv", t);
  std::istringstream in(testing::file_bytes(dir / "a.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "frame_time_s,alpha,mean_weight");
  Eigen::Index rows = 0;
  double sum = 0.0;
  std::set<std::string> mean_column;
  while (std::getline(in, line)) {
    ++rows;
    std::stringstream ls(line);
    std::string a, b, c;
    std::getline(ls, a, ',');
    std::getline(ls, b, ',');
    std::getline(ls, c, ',');
    sum += std::stod(b);
    mean_column.insert(c);
  }
  CHECK(rows == T);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(mean_column.size() == 1);
  write_waveform_csv(dir / "w.csv", w);
  CHECK(testing::file_bytes(dir / "w.csv").rfind("time_s,amplitude\n", 0) == 0);

  auto mean_model = model;
  mean_model.config.pooling = nn::Pooling::Mean;
  CHECK_THROWS_AS(attention_trace(mean_model, w), UsageError);
}

TEST_CASE("parallel_for covers every index and rethrows the first failure") {
  std::vector<int> hit(50, 0);
  parallel_for(50, 4, [&](std::size_t i) { hit[i] += 1; });
  CHECK(std::all_of(hit.begin(), hit.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_WITH(parallel_for(10, 3, [](std::size_t i) { if (i == 4 || i == 7) throw DataError("at " + std::to_string(i)); }), "at 4");
}
