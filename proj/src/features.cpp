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

#include "ispc/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <unsupported/Eigen/FFT>

namespace ispc {

using Eigen::Index;

namespace {

void require_canonical_rate(const Waveform& w) {
  if (w.sample_rate != kCanonicalSampleRate)
    throw DataError("feature extraction expects 16 kHz input, got " +
                    std::to_string(w.sample_rate) + " Hz");
}

}  // namespace

Eigen::MatrixXd power_spectrogram(const Waveform& w, const FrameGrid& grid, int n_fft) {
  if (n_fft < grid.frame_length) throw UsageError("FFT size shorter than the analysis frame");
  const Eigen::MatrixXd frames = frame_signal(w, grid);
  const Index bins = n_fft / 2 + 1;
  Eigen::MatrixXd out(frames.rows(), bins);

  Eigen::FFT<double> fft;
  std::vector<double> buffer(n_fft, 0.0);
  std::vector<std::complex<double>> spectrum;
  for (Index t = 0; t < frames.rows(); ++t) {
    std::fill(buffer.begin(), buffer.end(), 0.0);
    for (Index n = 0; n < frames.cols(); ++n) buffer[n] = frames(t, n);
    fft.fwd(spectrum, buffer);
    for (Index k = 0; k < bins; ++k) out(t, k) = std::norm(spectrum[k]);
  }
  return out;
}

Eigen::MatrixXd power_spectrogram(const Waveform& w, int n_fft) {
  return power_spectrogram(w, FrameGrid::standard(w.sample_rate), n_fft);
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

Eigen::VectorXd mel_edges(int n_filters, double f_lo, double f_hi) {
  const double lo = hz_to_mel(f_lo), hi = hz_to_mel(f_hi);
  Eigen::VectorXd hz(n_filters + 2);
  for (int i = 0; i < n_filters + 2; ++i)
    hz(i) = mel_to_hz(lo + (hi - lo) * i / static_cast<double>(n_filters + 1));
  return hz;
}

}  // namespace

Eigen::VectorXd mel_center_frequencies(int n_filters, double f_lo, double f_hi) {
  return mel_edges(n_filters, f_lo, f_hi).segment(1, n_filters);
}

Eigen::MatrixXd mel_filterbank(int n_filters, int n_fft, int sample_rate, double f_lo,
                               double f_hi) {
  if (n_filters < 1 || n_fft < 2 || sample_rate <= 0)
    throw UsageError("mel filterbank needs positive sizes");
  if (!(f_lo >= 0.0 && f_lo < f_hi && f_hi <= sample_rate / 2.0))
    throw UsageError("mel filterbank requires 0 <= f_lo < f_hi <= sr/2");

  const Eigen::VectorXd edges = mel_edges(n_filters, f_lo, f_hi);
  const Index bins = n_fft / 2 + 1;
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(n_filters, bins);
  for (int j = 0; j < n_filters; ++j) {
    const double left = edges(j), center = edges(j + 1), right = edges(j + 2);
    for (Index k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      const double rise = (f - left) / (center - left);
      const double fall = (right - f) / (right - center);
      fb(j, k) = std::max(0.0, std::min(rise, fall));
    }
  }
  return fb;
}

Eigen::MatrixXd dct_matrix(int n_out, int n_in) {
  Eigen::MatrixXd d(n_out, n_in);
  for (int k = 0; k < n_out; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n_in);
    for (int n = 0; n < n_in; ++n)
      d(k, n) = scale * std::cos(std::numbers::pi * k * (2 * n + 1) / (2.0 * n_in));
  }
  return d;
}

Eigen::MatrixXd deltas(const Eigen::MatrixXd& x) {
  const Index T = x.rows();
  Eigen::MatrixXd d(T, x.cols());
  auto row = [&](Index t) { return x.row(std::clamp<Index>(t, 0, T - 1)); };
  for (Index t = 0; t < T; ++t)
    d.row(t) = (1.0 * (row(t + 1) - row(t - 1)) + 2.0 * (row(t + 2) - row(t - 2))) / 10.0;
  return d;
}

LogMelSpectrogram log_mel_energies(const Waveform& w, int n_bands) {
  require_canonical_rate(w);
  const Eigen::MatrixXd power = power_spectrogram(w);
  const Eigen::MatrixXd fb = mel_filterbank(n_bands, kFftSize, w.sample_rate, 0.0, w.sample_rate / 2.0);
  LogMelSpectrogram out;
  out.values = (power * fb.transpose()).array().max(kLogFloor).log().matrix();
  out.frame_rate = static_cast<double>(w.sample_rate) / FrameGrid::standard(w.sample_rate).hop_length;
  return out;
}

void normalize_utterance(LogMelSpectrogram& spec) {
  auto& v = spec.values;
  const double T = static_cast<double>(v.rows());
  for (Index b = 0; b < v.cols(); ++b) {
    auto col = v.col(b);
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / T);
    if (sd > 1e-12) col /= sd;
  }
}

LogMelSpectrogram log_mel(const Waveform& w, int n_bands) {
  LogMelSpectrogram s = log_mel_energies(w, n_bands);
  normalize_utterance(s);
  return s;
}

Eigen::MatrixXd mfcc_delta(const Waveform& w) {
  const LogMelSpectrogram lm = log_mel_energies(w, kMfccFilters);
  const Eigen::MatrixXd cep = lm.values * dct_matrix(kNumCepstra, kMfccFilters).transpose();
  Eigen::MatrixXd out(cep.rows(), 2 * kNumCepstra);
  out << cep, deltas(cep);
  return out;
}

// ---------------------------------------------------------------------------
// Linear prediction

Eigen::VectorXd levinson_durbin(const Eigen::VectorXd& r, int order) {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(order + 1);
  a(0) = 1.0;
  double err = r(0);
  if (err <= 0.0) return a;
  Eigen::VectorXd prev(order + 1);
  for (int i = 1; i <= order; ++i) {
    double acc = r(i);
    for (int k = 1; k < i; ++k) acc += a(k) * r(i - k);
    const double reflection = -acc / err;
    prev = a;
    for (int k = 1; k < i; ++k) a(k) = prev(k) + reflection * prev(i - k);
    a(i) = reflection;
    err *= 1.0 - reflection * reflection;
    if (!(err > 0.0)) break;  // numerically singular: keep the lower-order fit
  }
  return a;
}

Eigen::MatrixXd lp_residual_moments(const Waveform& w, int order) {
  require_canonical_rate(w);
  const FrameGrid grid = FrameGrid::standard(w.sample_rate);
  const Index T = grid.num_frames(w.size());
  if (T == 0) throw DataError("waveform shorter than one analysis frame");
  if (w.samples.maxCoeff() == w.samples.minCoeff())
    throw DataError("degenerate signal: constant waveform has no LP residual");
  const Index N = grid.frame_length;

  Eigen::MatrixXd moments = Eigen::MatrixXd::Zero(T, 5);
  Eigen::VectorXd r(order + 1);
  for (Index t = 0; t < T; ++t) {
    const auto raw = w.samples.segment(t * grid.hop_length, N);
    const Eigen::VectorXd win = raw.cwiseProduct(grid.window);
    for (int k = 0; k <= order; ++k) r(k) = win.head(N - k).dot(win.tail(N - k));
    if (r(0) <= 0.0) continue;
    const Eigen::VectorXd a = levinson_durbin(r, order);
    for (Index n = order; n < N; ++n) {
      double e = 0.0;
      for (int k = 0; k <= order; ++k) e += a(k) * raw(n - k);
      const double e2 = e * e;
      moments(t, 0) += 1.0;
      moments(t, 1) += e;
      moments(t, 2) += e2;
      moments(t, 3) += e2 * e;
      moments(t, 4) += e2 * e2;
    }
  }
  return moments;
}

double pooled_kurtosis(const Eigen::MatrixXd& moments, const Eigen::VectorXd& weights) {
  if (weights.size() != moments.rows()) throw UsageError("kurtosis weight length mismatch");
  const Eigen::VectorXd s = moments.transpose() * weights;
  if (!(s(0) > 0.0)) throw DataError("degenerate signal: no LP residual");
  const double m1 = s(1) / s(0), m2 = s(2) / s(0), m3 = s(3) / s(0), m4 = s(4) / s(0);
  const double var = m2 - m1 * m1;
  if (!(var > 1e-12 * m2) || !(m2 > 0.0)) throw DataError("degenerate signal: constant LP residual");
  const double central4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1 * m1 * m1 * m1;
  return central4 / (var * var);
}

double lp_residual_kurtosis(const Waveform& w, int order) {
  const Eigen::MatrixXd m = lp_residual_moments(w, order);
  return pooled_kurtosis(m, Eigen::VectorXd::Ones(m.rows()));
}

// ---------------------------------------------------------------------------
// Pitch

double PitchTrack::voiced_fraction() const {
  if (voiced.empty()) return 0.0;
  return static_cast<double>(std::count(voiced.begin(), voiced.end(), true)) / voiced.size();
}

PitchTrack pitch_track(const Waveform& w, double threshold) {
  require_canonical_rate(w);
  const int sr = w.sample_rate;
  const Index N = sr / 25;  // 40 ms
  const Index hop = sr / 100;
  const Index min_lag = sr / 400, max_lag = sr / 60;
  const Index T = w.size() >= N ? 1 + (w.size() - N) / hop : 0;

  PitchTrack track;
  track.voiced.assign(T, false);
  track.f0 = Eigen::VectorXd::Zero(T);
  track.strength = Eigen::VectorXd::Zero(T);
  Eigen::VectorXd corr(max_lag + 1);
  Eigen::VectorXd energy(N + 1);  // prefix sums of x^2

  for (Index t = 0; t < T; ++t) {
    Eigen::VectorXd x = w.samples.segment(t * hop, N);
    x.array() -= x.mean();
    energy(0) = 0.0;
    for (Index n = 0; n < N; ++n) energy(n + 1) = energy(n) + x(n) * x(n);
    if (!(energy(N) > 0.0)) continue;

    corr.setZero();
    double best = -1.0;
    for (Index lag = min_lag; lag <= max_lag; ++lag) {
      const double num = x.head(N - lag).dot(x.tail(N - lag));
      const double den = std::sqrt(energy(N - lag) * (energy(N) - energy(lag)));
      corr(lag) = den > 0.0 ? num / den : 0.0;
      best = std::max(best, corr(lag));
    }
    track.strength(t) = best;
    if (best <= threshold) continue;

    // Smallest lag that is a local peak close to the global maximum; avoids
    // picking a multiple of the true period.
    Index lag = min_lag;
    for (Index k = min_lag; k <= max_lag; ++k) {
      const bool peak = (k == min_lag || corr(k) >= corr(k - 1)) &&
                        (k == max_lag || corr(k) >= corr(k + 1));
      if (peak && corr(k) >= 0.9 * best) {
        lag = k;
        break;
      }
    }
    double refined = static_cast<double>(lag);
    if (lag > min_lag && lag < max_lag) {
      const double a = corr(lag - 1), b = corr(lag), c = corr(lag + 1);
      const double denom = a - 2.0 * b + c;
      if (denom < 0.0) refined += 0.5 * (a - c) / denom;
    }
    track.voiced[t] = true;
    track.f0(t) = sr / refined;
  }
  return track;
}

}  // namespace ispc
