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

#include <algorithm>
#include <cmath>
#include <vector>

#include "ispc/features.hpp"
#include "support/oracles.hpp"
#include "support/signals.hpp"

using namespace ispc;

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Envelope of a 16 kHz signal: rectified and block-averaged to 1 kHz.
std::vector<double> rectified_envelope(const Eigen::VectorXd& x) {
  std::vector<double> env;
  for (Eigen::Index i = 0; i + 16 <= x.size(); i += 16) env.push_back(x.segment(i, 16).cwiseAbs().mean());
  return env;
}

}  // namespace

TEST_CASE("mel filterbank matches the triangle oracle") {
  const Eigen::MatrixXd fb = mel_filterbank(40, 512, 16000, 0.0, 8000.0);
  REQUIRE(fb.rows() == 40);
  REQUIRE(fb.cols() == 257);
  CHECK((fb.array() >= 0.0).all());
  for (int j = 0; j < 40; ++j)
    for (int k = 0; k < 257; ++k) CHECK(fb(j, k) == doctest::Approx(oracle::triangle(j, k * 16000.0 / 512, 40, 0.0, 8000.0)).epsilon(1e-9));

  const Eigen::VectorXd c = mel_center_frequencies(40, 0.0, 8000.0);
  const auto oc = oracle::mel_centres(40, 0.0, 8000.0);
  for (int j = 0; j < 40; ++j) CHECK(c(j) == doctest::Approx(oc[static_cast<std::size_t>(j)]).epsilon(1e-12));
  for (int j = 1; j < 40; ++j) CHECK(c(j) > c(j - 1));
}

TEST_CASE("each triangle peaks where its neighbours vanish") {
  const int n = 12;
  const Eigen::VectorXd c = mel_center_frequencies(n, 100.0, 6000.0);
  // A fine FFT grid places bins near the centres.
  const int n_fft = 1 << 16;
  const Eigen::MatrixXd fb = mel_filterbank(n, n_fft, 16000, 100.0, 6000.0);
  for (int j = 1; j + 1 < n; ++j) {
    const auto k = static_cast<Eigen::Index>(std::lround(c(j) * n_fft / 16000.0));
    CHECK(fb(j, k) == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(fb(j - 1, k) < 1e-2);
    CHECK(fb(j + 1, k) < 1e-2);
  }
}

TEST_CASE("mel filterbank edge validation") {
  CHECK_THROWS_AS(mel_filterbank(10, 512, 16000, 4000.0, 3000.0), UsageError);
  CHECK_THROWS_AS(mel_filterbank(10, 512, 16000, 0.0, 9000.0), UsageError);
  CHECK(hz_to_mel(1000.0) == doctest::Approx(oracle::mel(1000.0)).epsilon(1e-12));
  CHECK(mel_to_hz(hz_to_mel(3210.0)) == doctest::Approx(3210.0).epsilon(1e-12));
}

TEST_CASE("1 kHz tone peaks in the band nearest 1 kHz") {
  const Waveform w = testing::tone(1000.0, 0.3);
  const Eigen::MatrixXd ours = log_mel_energies(w).values;
  const Eigen::MatrixXd ref = oracle::direct_log_mel(w.samples, 32);
  const auto centres = oracle::mel_centres(32, 0.0, 8000.0);
  int nearest = 0;
  for (int j = 0; j < 32; ++j)
    if (std::abs(centres[static_cast<std::size_t>(j)] - 1000.0) < std::abs(centres[static_cast<std::size_t>(nearest)] - 1000.0)) nearest = j;
  REQUIRE(ours.rows() == ref.rows());
  for (Eigen::Index t = 0; t < ours.rows(); ++t) {
    Eigen::Index a = 0, b = 0;
    ours.row(t).maxCoeff(&a);
    ref.row(t).maxCoeff(&b);
    CHECK(a == nearest);
    CHECK(b == nearest);
  }
  CHECK((ours - ref).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("log_mel normalization and silence") {
  const Waveform w = testing::make_wave(testing::gaussian_noise(8000, 0.1, 3));
  const LogMelSpectrogram s = log_mel(w);
  CHECK(s.bands() == 32);
  CHECK(s.frame_rate == 100.0);
  for (Eigen::Index b = 0; b < s.bands(); ++b) {
    const auto col = s.values.col(b);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().mean());
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(sd - 1.0) < 1e-6);
  }
  const LogMelSpectrogram z = log_mel_energies(testing::make_wave(Eigen::VectorXd::Zero(4000)));
  CHECK((z.values.array() - std::log(1e-10)).abs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(log_mel(testing::make_wave(Eigen::VectorXd::Ones(100))), DataError);
}

TEST_CASE("mel energy bounded by spectral energy times the largest filter gain") {
  const Waveform w = testing::make_wave(testing::gaussian_noise(4000, 0.2, 12));
  const Eigen::MatrixXd p = power_spectrogram(w);
  const Eigen::MatrixXd fb = mel_filterbank(32, 512, 16000, 0.0, 8000.0);
  const double gain = fb.colwise().sum().maxCoeff();
  const Eigen::MatrixXd mel = p * fb.transpose();
  for (Eigen::Index t = 0; t < p.rows(); ++t) CHECK(mel.row(t).sum() <= p.row(t).sum() * gain * (1 + 1e-12));
}

TEST_CASE("power spectrogram matches the direct DFT") {
  const Waveform w = testing::make_wave(testing::gaussian_noise(960, 0.3, 2));
  const Eigen::MatrixXd p = power_spectrogram(w);
  const auto win = oracle::hamming(320);
  for (Eigen::Index t = 0; t < p.rows(); ++t) {
    std::vector<double> f(320);
    for (int n = 0; n < 320; ++n) f[static_cast<std::size_t>(n)] = win[static_cast<std::size_t>(n)] * w.samples(t * 160 + n);
    const auto ref = oracle::direct_power_spectrum(f, 512);
    for (int k = 0; k < 257; ++k) CHECK(p(t, k) == doctest::Approx(ref[static_cast<std::size_t>(k)]).epsilon(1e-9));
  }
}

TEST_CASE("DCT of a constant vector has only c0") {
  const Eigen::MatrixXd d = dct_matrix(13, 40);
  const Eigen::VectorXd c = d * Eigen::VectorXd::Constant(40, -3.5);
  CHECK(c(0) != 0.0);
  CHECK(c.tail(12).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::MatrixXd full = dct_matrix(40, 40);
  CHECK((full * full.transpose()).isIdentity(1e-12));
}

TEST_CASE("deltas follow the two-frame regression") {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(9, 3);
  const Eigen::MatrixXd d = deltas(x);
  auto at = [&](Eigen::Index t, Eigen::Index c) { return x(std::clamp<Eigen::Index>(t, 0, 8), c); };
  for (Eigen::Index t = 0; t < 9; ++t)
    for (Eigen::Index c = 0; c < 3; ++c) {
      const double ref = (1 * (at(t + 1, c) - at(t - 1, c)) + 2 * (at(t + 2, c) - at(t - 2, c))) / 10.0;
      CHECK(d(t, c) == doctest::Approx(ref).epsilon(1e-14));
    }
  const Eigen::MatrixXd flat = Eigen::RowVectorXd::LinSpaced(13, 1, 13).replicate(20, 1);
  CHECK(deltas(flat).isZero(0.0));
}

TEST_CASE("MFCC cepstra match an independent DCT of the direct log-mel") {
  const Waveform w = testing::make_wave(testing::gaussian_noise(4800, 0.1, 21));
  const Eigen::MatrixXd m = mfcc_delta(w);
  REQUIRE(m.cols() == 26);
  const Eigen::MatrixXd lm = oracle::direct_log_mel(w.samples, 40);
  REQUIRE(lm.rows() == m.rows());
  double worst = 0.0, worst_c0 = 0.0;
  for (Eigen::Index t = 0; t < lm.rows(); ++t) {
    const auto c = oracle::dct2(to_std(lm.row(t).transpose()), 13);
    for (int k = 0; k < 13; ++k) worst = std::max(worst, std::abs(c[static_cast<std::size_t>(k)] - m(t, k)));
    worst_c0 = std::max(worst_c0, std::abs(c[0] - m(t, 0)));
  }
  CHECK(worst_c0 < 1e-9);
  CHECK(worst < 1e-9);
}

TEST_CASE("modulation spectrum shape and sign") {
  const Waveform w = testing::make_wave(testing::gaussian_noise(20000, 0.1, 4));
  const ModulationSpectrum m = modulation_spectrum(w);
  CHECK(m.energies.rows() == 23);
  CHECK(m.energies.cols() == 8);
  CHECK(m.flattened().size() == 184);
  CHECK((m.energies.array() >= 0.0).all());
  CHECK(m.flattened()(8 * 5 + 3) == m.energies(5, 3));
  const auto& mc = modulation_centers();
  const double expected[] = {4, 6.5, 10.7, 17.6, 28.9, 47.5, 78.1, 128.4};
  for (int j = 0; j < 8; ++j) CHECK(mc[static_cast<std::size_t>(j)] == doctest::Approx(expected[j]).epsilon(1e-3));
  const Eigen::VectorXd gc = gammatone_centers();
  CHECK(gc.size() == 23);
  CHECK(gc(0) == doctest::Approx(125.0));
  CHECK(gc(22) == doctest::Approx(7500.0));
  CHECK_THROWS_AS(modulation_spectrum(testing::make_wave(Eigen::VectorXd::Ones(2000))), DataError);
}

TEST_CASE("4 Hz amplitude modulation lands in the filter containing 4 Hz") {
  const Eigen::VectorXd centres = gammatone_centers();
  const std::vector<double> mod(modulation_centers().begin(), modulation_centers().end());
  for (int j : {6, 12, 18}) {
    const Waveform w = testing::am_tone(centres(j), 4.0, 2.0);
    const double f = oracle::dominant_frequency(rectified_envelope(w.samples), 1000.0, 200.0, 0.25);
    CHECK(f == doctest::Approx(4.0));
    const int expected = oracle::strongest_modulation_filter(f, mod);
    Eigen::Index got = 0;
    modulation_spectrum(w).energies.row(j).maxCoeff(&got);
    CHECK(got == expected);
  }
}

TEST_CASE("unmodulated tone concentrates in the lowest modulation filter") {
  const Eigen::VectorXd centres = gammatone_centers();
  const Waveform w = testing::tone(centres(10), 2.0);
  Eigen::Index got = 0;
  modulation_spectrum(w).energies.row(10).maxCoeff(&got);
  CHECK(got == 0);
}

TEST_CASE("LHMR arithmetic and ordering") {
  ModulationSpectrum m;
  m.energies = Eigen::MatrixXd::Zero(23, 8);
  m.energies(0, 0) = 3.0;
  m.energies(4, 5) = 1.0;
  CHECK(lhmr(m) == 3.0);
  m.energies.setConstant(2.0);
  CHECK(lhmr(m, 1) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  m.energies.setZero();
  m.energies(1, 0) = 1.0;
  Warnings warnings;
  CHECK(std::isinf(lhmr(m, 1, &warnings)));
  CHECK(warnings.size() == 1);
  CHECK_THROWS_AS(lhmr(m, 0), UsageError);

  const Waveform slow = testing::am_tone(1000.0, 2.0, 2.0), fast = testing::am_tone(1000.0, 20.0, 2.0);
  const double l_slow = lhmr(modulation_spectrum(slow)), l_fast = lhmr(modulation_spectrum(fast));
  MESSAGE("LHMR 2 Hz " << l_slow << ", 20 Hz " << l_fast);
  CHECK(l_slow > l_fast);

  Waveform louder = slow;
  louder.samples *= 0.25;
  CHECK(lhmr(modulation_spectrum(louder)) == doctest::Approx(l_slow).epsilon(1e-9));
}

TEST_CASE("Levinson-Durbin solves the normal equations") {
  const Eigen::VectorXd x = testing::gaussian_noise(400, 1.0, 17);
  const int p = 10;
  Eigen::VectorXd r(p + 1);
  for (int k = 0; k <= p; ++k) r(k) = x.head(400 - k).dot(x.tail(400 - k));
  const Eigen::VectorXd a = levinson_durbin(r, p);
  REQUIRE(a.size() == p + 1);
  CHECK(a(0) == 1.0);
  Eigen::MatrixXd R(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) R(i, j) = r(std::abs(i - j));
  const Eigen::VectorXd direct = -R.ldlt().solve(r.segment(1, p));
  CHECK((a.tail(p) - direct).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("LP residual kurtosis") {
  SUBCASE("Gaussian noise is near 3") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const double k = lp_residual_kurtosis(testing::make_wave(testing::gaussian_noise(16000, 0.1, 100 + seed)));
      CHECK(k == doctest::Approx(3.0).epsilon(0.2 / 3.0));
    }
  }
  SUBCASE("sparse impulses are heavy-tailed") {
    CHECK(lp_residual_kurtosis(testing::pulse_train(100.0, 1.0, 0.01, 3)) > 3.0);
  }
  SUBCASE("scale invariance is exact") {
    const Waveform w = testing::make_wave(testing::gaussian_noise(8000, 0.1, 5));
    Waveform w2 = w;
    w2.samples *= 2.0;
    CHECK(lp_residual_kurtosis(w2) == lp_residual_kurtosis(w));
  }
  SUBCASE("constant signal is degenerate") {
    CHECK_THROWS_AS(lp_residual_kurtosis(testing::make_wave(Eigen::VectorXd::Zero(8000))), DataError);
  }
  SUBCASE("pooled moments reproduce the sample kurtosis") {
    Eigen::MatrixXd mom(2, 5);
    // Samples {1, -1, 2} and {0}: mean 0.5, central moments from scratch.
    const std::vector<double> s = {1, -1, 2, 0};
    mom << 3, 2, 6, 8, 18, 1, 0, 0, 0, 0;
    double mu = 0, m2 = 0, m4 = 0;
    for (double v : s) mu += v / 4;
    for (double v : s) m2 += std::pow(v - mu, 2) / 4, m4 += std::pow(v - mu, 4) / 4;
    CHECK(pooled_kurtosis(mom, Eigen::VectorXd::Ones(2)) == doctest::Approx(m4 / (m2 * m2)).epsilon(1e-12));
  }
}

TEST_CASE("pitch tracking") {
  SUBCASE("150 Hz pulse train") {
    const PitchTrack p = pitch_track(testing::pulse_train(150.0, 1.0, 0.02, 1));
    std::vector<double> f0;
    for (Eigen::Index i = 0; i < p.frames(); ++i)
      if (p.voiced[static_cast<std::size_t>(i)]) f0.push_back(p.f0(i));
    REQUIRE(!f0.empty());
    const double m = median(f0);
    CHECK(m >= 148.0);
    CHECK(m <= 152.0);
    CHECK(p.voiced_fraction() > 0.9);
  }
  SUBCASE("white noise is mostly unvoiced") {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed)
      total += pitch_track(testing::make_wave(testing::gaussian_noise(16000, 0.1, 50 + seed))).voiced_fraction();
    CHECK(total / 10.0 < 0.2);
  }
  SUBCASE("silence is unvoiced") {
    const PitchTrack p = pitch_track(testing::make_wave(Eigen::VectorXd::Zero(8000)));
    CHECK(std::none_of(p.voiced.begin(), p.voiced.end(), [](bool b) { return b; }));
    CHECK(p.f0.isZero(0.0));
  }
}

TEST_CASE("six-feature set") {
  SUBCASE("stationary tone has no delta-c0 spread") {
    CHECK(falk_features(testing::tone(1000.0, 2.0)).std_delta_c0 < 1e-6);
  }
  SUBCASE("monotone pulse train") {
    const FalkFeatures f = falk_features(testing::pulse_train(150.0, 2.0, 0.02, 2));
    CHECK(f.f0_std < 5.0);
    CHECK(f.f0_range < 10.0);
    CHECK(f.pct_voiced > 0.9);
  }
  SUBCASE("pitch sweep 100 to 200 Hz") {
    const FalkFeatures f = falk_features(testing::pitch_sweep(100.0, 200.0, 2.0));
    MESSAGE("sweep range " << f.f0_range);
    CHECK(f.f0_range >= 90.0);
    CHECK(f.f0_range <= 110.0);
  }
  SUBCASE("too few voiced frames warn and zero the F0 statistics") {
    Warnings warnings;
    const FalkFeatures f = falk_features(testing::make_wave(testing::gaussian_noise(16000, 0.1, 7)), &warnings);
    if (f.f0_std == 0.0) CHECK(!warnings.empty());
    const FalkFeatures s = falk_features(testing::make_wave(0.001 * testing::gaussian_noise(16000, 1.0, 1)), &warnings);
    CHECK(s.as_vector().size() == 6);
  }
  SUBCASE("uniform frame weights reproduce the plain features") {
    const Waveform w = testing::am_tone(300.0, 3.0, 1.5);
    const FalkFrameStats st = falk_frame_stats(w);
    const FalkFeatures a = pool_falk(st, Eigen::VectorXd::Constant(st.delta_c0.size(), 0.25));
    const FalkFeatures b = falk_features(w);
    CHECK((a.as_vector() - b.as_vector()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("feature extractors are deterministic") {
  const Waveform w = testing::make_wave(testing::gaussian_noise(20000, 0.1, 8));
  CHECK(log_mel(w).values == log_mel(w).values);
  CHECK(mfcc_delta(w) == mfcc_delta(w));
  CHECK(modulation_spectrum(w).energies == modulation_spectrum(w).energies);
  CHECK(falk_features(w).as_vector() == falk_features(w).as_vector());
}

TEST_CASE("non-16 kHz input is rejected") {
  Waveform w = testing::tone(440.0, 1.0);
  w.sample_rate = 8000;
  CHECK_THROWS_AS(log_mel(w), DataError);
  CHECK_THROWS_AS(modulation_spectrum(w), DataError);
}
