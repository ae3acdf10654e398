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
#include <numeric>

#include "ispc/experiment.hpp"
#include "ispc/nn/checkpoint.hpp"
#include "ispc/nn/grad_check.hpp"
#include "ispc/nn/train.hpp"
#include "support/nn_checks.hpp"
#include "support/signals.hpp"

using namespace ispc;
using namespace ispc::nn;

namespace {

Matrix<double> mat(std::initializer_list<std::initializer_list<double>> cols) {
  // One initializer per column (frame).
  Matrix<double> m(static_cast<Eigen::Index>(cols.begin()->size()), static_cast<Eigen::Index>(cols.size()));
  Eigen::Index c = 0;
  for (const auto& col : cols) {
    Eigen::Index r = 0;
    for (double v : col) m(r++, c) = v;
    ++c;
  }
  return m;
}

}  // namespace

TEST_CASE("LSTM with zero parameters outputs zeros") {
  LstmLayer<double> p;
  p.input_weight = Matrix<double>::Zero(8, 3);
  p.recurrent_weight = Matrix<double>::Zero(8, 2);
  p.bias = Vector<double>::Zero(8);
  const auto tr = lstm_forward(p, Matrix<double>::Random(3, 5).eval());
  CHECK(tr.hidden.isZero(0.0));
}

TEST_CASE("LSTM matches the scalar-loop recurrence") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(checks::lstm_oracle_error(seed) <= 1e-12);
}

TEST_CASE("LSTM outputs over valid frames ignore trailing frames") {
  std::mt19937_64 rng(2);
  LstmLayer<double> p;
  p.input_weight = checks::normal_matrix(8, 3, 0.5, rng);
  p.recurrent_weight = checks::normal_matrix(8, 2, 0.5, rng);
  p.bias = checks::normal_matrix(8, 1, 0.5, rng);
  const Matrix<double> x = checks::normal_matrix(3, 7, 1.0, rng);
  const auto full = lstm_forward(p, x), head = lstm_forward(p, x.leftCols(4).eval());
  CHECK(full.hidden.leftCols(4) == head.hidden);
}

TEST_CASE("pooling heads") {
  SUBCASE("last takes the final valid frame") {
    const Matrix<double> y = mat({{1, 2}, {3, 4}, {5, 6}});
    CHECK(pool_last<double>(y) == Vector<double>(Eigen::Vector2d(5, 6)));
    CHECK(pool_last<double>(y, 2) == Vector<double>(Eigen::Vector2d(3, 4)));
    CHECK(pool_last<double>(y.leftCols(1).eval()) == Vector<double>(Eigen::Vector2d(1, 2)));
    CHECK_THROWS_AS(pool_last<double>(y, 0), UsageError);
  }
  SUBCASE("constant frames pool to the constant") {
    const Matrix<double> y = Eigen::Vector3d(0.2, -1, 4).replicate(1, 6);
    const Vector<double> v = Eigen::Vector3d(0.2, -1, 4);
    CHECK(pool_last<double>(y) == v);
    CHECK((pool_mean<double>(y) - v).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("mean of two frames") {
    CHECK(pool_mean<double>(mat({{1, 0}, {0, 1}})) == Vector<double>(Eigen::Vector2d(0.5, 0.5)));
    CHECK(pool_mean<double>(mat({{1, 0}, {0, 1}, {9, 9}}), 2) == Vector<double>(Eigen::Vector2d(0.5, 0.5)));
  }
  SUBCASE("attention weights") {
    const Matrix<double> y = Matrix<double>::Random(3, 4);
    const Vector<double> a = attention_weights<double>(Vector<double>::Zero(3), y);
    for (int t = 0; t < 4; ++t) CHECK(a(t) == doctest::Approx(0.25).epsilon(1e-15));
    // u'y = (ln 1, ln 3).
    const Matrix<double> y2 = mat({{0.0}, {std::log(3.0)}});
    const Vector<double> b = attention_weights<double>(Vector<double>::Ones(1), y2);
    CHECK(b(0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(b(1) == doctest::Approx(0.75).epsilon(1e-15));
    const Vector<double> c = attention_weights<double>(Vector<double>::Ones(3), Matrix<double>::Random(3, 6).eval(), 4);
    CHECK(c.tail(2).isZero(0.0));
    CHECK(c.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("attention pooling arithmetic") {
    const Matrix<double> y = mat({{4, 0}, {0, 4}});
    const Vector<double> u = Eigen::Vector2d(0.0, std::log(3.0) / 4.0);
    const Vector<double> z = pool_attention<double>(u, y);
    CHECK(z(0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(z(1) == doctest::Approx(3.0).epsilon(1e-14));
  }
  SUBCASE("a dominant frame takes over") {
    const Matrix<double> y = mat({{1, 0}, {0, 1}, {0.5, 0.5}});
    const Vector<double> z = pool_attention<double>(Eigen::Vector2d(0.0, 200.0), y);
    CHECK((z - y.col(1)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("random identities") {
    for (std::uint64_t s = 0; s < 50; ++s) {
      const auto r = checks::pooling_check(s);
      CHECK(r.zero_u_vs_mean <= 1e-12);
      CHECK(r.single_frame_spread <= 1e-12);
      CHECK(r.alpha_sum_error <= 1e-12);
      CHECK(r.alpha_min >= 0.0);
    }
  }
}

TEST_CASE("softmax is shift invariant") {
  const Vector<double> x = Eigen::Vector3d(0.3, -2.0, 5.0);
  const Vector<double> shifted = (x.array() + 123.4).matrix();
  CHECK((softmax(x) - softmax(shifted)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(softmax(Vector<double>(Eigen::Vector3d(1000, 0, -1000))).allFinite());
}

TEST_CASE("forward pass probabilities") {
  const NetConfig cfg = tiny_net_config(Pooling::Attention);
  const auto m = checks::random_model(cfg, 4);
  const auto batch = random_batch<double>(cfg, 10, 4);
  const Matrix<double> p = forward(m, batch);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    CHECK(p.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK((p.row(i).array() > 0.0).all());
    CHECK((p.row(i).array() < 1.0).all());
  }
  CHECK(forward(m, batch) == p);

  auto z = m;
  z.output_weight.setZero();
  z.output_bias.setZero();
  const Matrix<double> u = forward(z, batch);
  CHECK((u.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
  const auto lg = loss_and_grad(z, batch, false);
  CHECK(lg.loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("dropout only acts in training") {
  NetConfig cfg = tiny_net_config(Pooling::Mean);
  cfg.dropout_rate = 0.5;
  cfg.dense2_units = 40;
  const auto m = checks::random_model(cfg, 1);
  const auto batch = random_batch<double>(cfg, 1, 1);
  Rng rng(3);
  const auto tr = forward_item(m, batch.inputs[0], batch.valid_lengths[0], true, &rng);
  const auto dropped = (tr.dropout_mask.array() == 0.0).count();
  CHECK(dropped > 0);
  CHECK(dropped < 40);
  CHECK(((tr.dropout_mask.array() == 0.0) || (tr.dropout_mask.array() == 2.0)).all());
  const auto inf = forward_item(m, batch.inputs[0], batch.valid_lengths[0], false);
  CHECK((inf.dropout_mask.array() == 1.0).all());
  CHECK_THROWS_AS(forward_item(m, batch.inputs[0], batch.valid_lengths[0], true), UsageError);
}

TEST_CASE("gradients match central finite differences") {
  for (Pooling p : {Pooling::Last, Pooling::Mean, Pooling::Attention}) {
    const auto r = grad_check(tiny_net_config(p), 11);
    CAPTURE(pooling_name(p));
    CHECK(r.max_relative_error < 1e-4);
    CHECK(r.per_tensor.count("attention") == 1);
  }
  NetConfig bad = tiny_net_config(Pooling::Mean);
  bad.dropout_rate = 0.1;
  CHECK_THROWS_AS(grad_check(bad, 1), UsageError);
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(1e-12, 0.0) == doctest::Approx(1e-4));
}

TEST_CASE("padding changes no output, loss or gradient") {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto r = checks::masking_check(s);
    CHECK(r.logit_difference == 0.0);
    CHECK(r.loss_difference <= 1e-12);
    CHECK(r.gradient_difference <= 1e-12);
  }
}

TEST_CASE("inputs beyond the valid length receive no gradient") {
  // Perturbing a padded value has no effect on loss or gradient.
  const NetConfig cfg = tiny_net_config(Pooling::Attention);
  const auto m = checks::random_model(cfg, 9);
  auto batch = random_batch<double>(cfg, 1, 9);
  while (batch.valid_lengths[0] == cfg.max_length) batch = random_batch<double>(cfg, 1, 10);
  const auto a = loss_and_grad(m, batch, false);
  batch.inputs[0].bottomRows(cfg.max_length - batch.valid_lengths[0]).setConstant(1e6);
  const auto b = loss_and_grad(m, batch, false);
  CHECK(a.loss == b.loss);
  zip_tensors([&](const char*, const auto& x, const auto& y) { CHECK(x == y); }, a.grad, b.grad);
}

TEST_CASE("Adam") {
  const NetConfig cfg = tiny_net_config(Pooling::Attention);
  TrainConfig tc;
  SUBCASE("first step moves by the learning rate against the gradient sign") {
    auto params = checks::random_model(cfg, 1);
    const auto start = params;
    auto grads = SequenceModel<double>::zeros(cfg);
    zip_tensors([](const char*, auto& g) { g.setConstant(-0.37); }, grads);
    AdamState<double> st(cfg);
    adam_step(params, grads, st, tc);
    CHECK(st.step == 1);
    zip_tensors(
        [&](const char*, const auto& p, const auto& s) {
          for (Eigen::Index k = 0; k < p.size(); ++k)
            CHECK(std::abs((p.data()[k] - s.data()[k]) / tc.learning_rate - 1.0) < 1e-6);
        },
        params, start);
  }
  SUBCASE("zero gradients leave parameters unchanged") {
    auto params = checks::random_model(cfg, 2);
    const auto start = params;
    const auto zero = SequenceModel<double>::zeros(cfg);
    AdamState<double> st(cfg);
    for (int i = 0; i < 25; ++i) adam_step(params, zero, st, tc);
    zip_tensors([](const char*, const auto& a, const auto& b) { CHECK(a == b); }, params, start);
  }
  SUBCASE("identical streams give identical trajectories") {
    auto a = checks::random_model(cfg, 3), b = a;
    AdamState<double> sa(cfg), sb(cfg);
    const auto batch = random_batch<double>(cfg, 5, 3);
    for (int i = 0; i < 5; ++i) {
      adam_step(a, loss_and_grad(a, batch, false).grad, sa, tc);
      adam_step(b, loss_and_grad(b, batch, false).grad, sb, tc);
    }
    zip_tensors([](const char*, const auto& x, const auto& y) { CHECK(x == y); }, a, b);
  }
}

TEST_CASE("initialization") {
  NetConfig cfg;
  cfg.max_length = 700;
  cfg.lstm_units = 16;
  const auto m = init_model<double>(cfg, 5);
  CHECK((m.attention.array() == 1.0 / 700.0).all());
  CHECK(m.attention.size() == 16);
  CHECK((m.lstm.bias.segment(16, 16).array() == 1.0).all());
  CHECK(m.lstm.bias.head(16).isZero(0.0));
  CHECK(m.lstm.bias.tail(32).isZero(0.0));
  CHECK(m.dense1_bias.isZero(0.0));
  const double limit = std::sqrt(6.0 / (32 + 32));
  CHECK(m.dense1_weight.cwiseAbs().maxCoeff() <= limit);
  cfg.pooling = Pooling::Mean;
  CHECK(init_model<double>(cfg, 5).attention.size() == 0);
  cfg.lstm_units = 0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  NetConfig canonical;
  CHECK(canonical.max_length == 700);
  CHECK(canonical.input_bands == 32);
  CHECK(canonical.dense1_units == 32);
  CHECK(canonical.lstm_units == 128);
  CHECK(canonical.dense2_units == 50);
  CHECK(canonical.classes == 3);
  CHECK(canonical.dropout_rate == 0.33);
  TrainConfig tc;
  CHECK(tc.learning_rate == 0.0002);
  CHECK(tc.batch_size == 32);
  CHECK(tc.max_epochs == 40);
}

TEST_CASE("training separates linearly separable toy sequences") {
  NetConfig cfg;
  cfg.max_length = 12;
  cfg.input_bands = 2;
  cfg.dense1_units = 4;
  cfg.lstm_units = 4;
  cfg.dense2_units = 4;
  cfg.classes = 2;
  cfg.dropout_rate = 0.0;
  cfg.pooling = Pooling::Mean;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 0.3);
  std::uniform_int_distribution<int> len(3, 12);
  PaddedBatch<double> data;
  for (int i = 0; i < 64; ++i) {
    const int label = i % 2, T = len(rng);
    Matrix<double> x = Matrix<double>::Constant(12, 2, kMaskValue<double>);
    for (int t = 0; t < T; ++t) x(t, 0) = (label ? 1.0 : -1.0) + g(rng), x(t, 1) = g(rng);
    data.push_back(std::move(x), T, label);
  }
  TrainConfig tc;
  tc.learning_rate = 0.01;
  tc.batch_size = 8;
  tc.max_epochs = 40;
  tc.seed = 3;
  const auto r = train(cfg, tc, data, data);
  CHECK(r.best_valid_accuracy >= 0.99);
  CHECK(accuracy(predict(r.model, data), data.labels) >= 0.99);
  CHECK(r.log.size() == 40);
  CHECK(r.best_epoch >= 1);

  const auto again = train(cfg, tc, data, data);
  REQUIRE(again.log.size() == r.log.size());
  for (std::size_t e = 0; e < r.log.size(); ++e) {
    CHECK(again.log[e].train_loss == r.log[e].train_loss);
    CHECK(again.log[e].valid_accuracy == r.log[e].valid_accuracy);
  }
}

TEST_CASE("training loss falls over the first epochs on the synthetic corpus") {
  const auto profiles = default_class_profiles();
  Rng rng(21);
  PaddedBatch<float> data;
  NetConfig cfg;
  cfg.max_length = 300;
  cfg.dense1_units = 8;
  cfg.lstm_units = 8;
  cfg.dense2_units = 8;
  cfg.pooling = Pooling::Attention;
  for (int s = 0; s < 6; ++s) {
    const SpeakerTraits spk = draw_speaker(rng);
    for (int u = 0; u < 8; ++u) {
      const int c = s % 3;
      const PaddedSequence p = pad_or_crop(lstm_input(synth_utterance(profiles[static_cast<std::size_t>(c)], spk, rng)), 300);
      data.push_back(p.values.cast<float>(), p.valid_length, c);
    }
  }
  TrainConfig tc;
  tc.learning_rate = 0.002;
  tc.max_epochs = 6;
  tc.batch_size = 8;
  tc.seed = 1;
  const auto r = train(cfg, tc, data, data);
  int falling = 0;
  for (std::size_t e = 1; e < r.log.size(); ++e) falling += r.log[e].train_loss <= r.log[e - 1].train_loss;
  CHECK(falling >= 4);
}

TEST_CASE("training rejects empty sets and reports divergence") {
  const NetConfig cfg = tiny_net_config(Pooling::Last);
  TrainConfig tc;
  const auto batch = random_batch<double>(cfg, 4, 1);
  CHECK_THROWS_AS(train(cfg, tc, PaddedBatch<double>{}, batch), DataError);
  tc.learning_rate = 1e300;
  tc.max_epochs = 3;
  CHECK_THROWS_AS(train(cfg, tc, batch, batch), NumericError);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = testing::temp_dir("ckpt");
  Checkpoint c;
  c.model = checks::random_model(tiny_net_config(Pooling::Attention), 6);
  c.seed = 42;
  c.epoch = 7;
  c.metrics = {{"best_valid_accuracy", 0.5}};
  save_checkpoint(dir / "m.ispc", c);
  CHECK(testing::file_bytes(dir / "m.ispc").rfind("ISPCMODL1", 0) == 0);
  const Checkpoint back = load_checkpoint(dir / "m.ispc");
  CHECK(back.seed == 42);
  CHECK(back.epoch == 7);
  CHECK(back.metrics == c.metrics);
  CHECK(back.model.config.pooling == Pooling::Attention);
  CHECK(back.model.config.max_length == 6);
  zip_tensors(
      [](const char*, const auto& a, const auto& b) {
        CHECK(a.rows() == b.rows());
        CHECK(a.cols() == b.cols());
        CHECK(a.template cast<float>() == b.template cast<float>());
      },
      c.model, back.model);
  std::ofstream(dir / "bad.ispc") << "garbage";
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ispc"), DataError);
}

TEST_CASE("float and double forward passes agree") {
  const NetConfig cfg = tiny_net_config(Pooling::Attention);
  const auto m = checks::random_model(cfg, 8);
  const auto bd = random_batch<double>(cfg, 6, 8);
  const auto bf = random_batch<float>(cfg, 6, 8);
  CHECK((forward(m, bd) - forward(m.cast<float>(), bf).cast<double>()).cwiseAbs().maxCoeff() < 1e-5);
}
