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

// Modulation spectrum: gammatone acoustic bands -> Hilbert envelopes ->
// constant-Q modulation filters -> windowed energies.
//
// Both filterbanks are applied in the frequency domain with zero-phase
// magnitude responses. The acoustic stage keeps only positive frequencies,
// which yields the analytic band signal directly.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <unsupported/Eigen/FFT>

#include "ispc/features.hpp"

namespace ispc {

using Eigen::Index;
using cplx = std::complex<double>;

namespace {

double erb_rate(double hz) { return 21.4 * std::log10(1.0 + 0.00437 * hz); }
double erb_rate_to_hz(double e) { return (std::pow(10.0, e / 21.4) - 1.0) / 0.00437; }
double erb_bandwidth(double hz) { return 24.7 * (4.37 * hz / 1000.0 + 1.0); }

Index next_pow2(Index n) {
  Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

Eigen::VectorXd gammatone_centers(const ModulationConfig& cfg) {
  const double lo = erb_rate(cfg.low_hz), hi = erb_rate(cfg.high_hz);
  Eigen::VectorXd c(kAcousticBands);
  for (int i = 0; i < kAcousticBands; ++i)
    c(i) = erb_rate_to_hz(lo + (hi - lo) * i / static_cast<double>(kAcousticBands - 1));
  return c;
}

const std::array<double, kModulationBands>& modulation_centers() {
  static const std::array<double, kModulationBands> centers = {4.0,  6.5,  10.7, 17.6,
                                                               28.9, 47.5, 78.1, 128.4};
  return centers;
}

ModulationFrames modulation_frames(const Waveform& w, const ModulationConfig& cfg) {
  if (w.sample_rate != kCanonicalSampleRate)
    throw DataError("modulation spectrum expects 16 kHz input");
  const double sr = w.sample_rate;
  const Index decim = std::max<Index>(1, static_cast<Index>(std::lround(sr / cfg.envelope_rate)));
  const double env_rate = sr / decim;
  const auto win = static_cast<Index>(std::lround(cfg.window_s * env_rate));
  const auto shift = static_cast<Index>(std::lround(cfg.shift_s * env_rate));
  const Index env_len = w.size() / decim;
  if (env_len < win)
    throw DataError("waveform too short for modulation analysis (needs at least " +
                    std::to_string(cfg.window_s) + " s)");
  const Index n_windows = 1 + (env_len - win) / shift;

  // Acoustic stage.
  const Index n_fft = next_pow2(w.size() + static_cast<Index>(0.05 * sr));
  std::vector<double> padded(n_fft, 0.0);
  std::copy(w.samples.data(), w.samples.data() + w.size(), padded.begin());
  Eigen::FFT<double> fft;
  std::vector<cplx> spectrum;
  fft.fwd(spectrum, padded);

  // Modulation stage operates on decimated envelopes.
  const Index m_fft = next_pow2(env_len + static_cast<Index>(0.5 * env_rate));
  Eigen::MatrixXd mod_gain(kModulationBands, m_fft);
  for (int j = 0; j < kModulationBands; ++j) {
    const double fc = modulation_centers()[j];
    for (Index k = 0; k < m_fft; ++k) {
      const double f = std::abs(static_cast<double>(k <= m_fft / 2 ? k : k - m_fft)) * env_rate / m_fft;
      if (f == 0.0) {
        mod_gain(j, k) = 0.0;
        continue;
      }
      const double detune = f / fc - fc / f;
      mod_gain(j, k) = 1.0 / std::sqrt(1.0 + cfg.modulation_q * cfg.modulation_q * detune * detune);
    }
  }

  ModulationFrames out;
  out.energies = Eigen::MatrixXd::Zero(n_windows, kAcousticBands * kModulationBands);
  out.window_start.resize(n_windows);
  out.window_length = win * decim;
  for (Index i = 0; i < n_windows; ++i) out.window_start(i) = static_cast<int>(i * shift * decim);

  const Eigen::VectorXd centers = gammatone_centers(cfg);
  std::vector<cplx> band(n_fft), analytic;
  std::vector<double> envelope(m_fft), filtered;
  std::vector<cplx> env_spec, mod_spec(m_fft);
  for (int b = 0; b < kAcousticBands; ++b) {
    const double fc = centers(b);
    const double bw = 1.019 * erb_bandwidth(fc);
    std::fill(band.begin(), band.end(), cplx(0.0, 0.0));
    for (Index k = 0; k <= n_fft / 2; ++k) {
      const double f = static_cast<double>(k) * sr / n_fft;
      const double x = (f - fc) / bw;
      const double gain = 1.0 / ((1.0 + x * x) * (1.0 + x * x));  // 4th-order magnitude
      band[k] = spectrum[k] * (k == 0 || k == n_fft / 2 ? gain : 2.0 * gain);
    }
    fft.inv(analytic, band);

    std::fill(envelope.begin(), envelope.end(), 0.0);
    for (Index i = 0; i < env_len; ++i) {
      double acc = 0.0;
      for (Index d = 0; d < decim; ++d) acc += std::abs(analytic[i * decim + d]);
      envelope[i] = acc / decim;
    }
    fft.fwd(env_spec, envelope);

    for (int j = 0; j < kModulationBands; ++j) {
      for (Index k = 0; k < m_fft; ++k) mod_spec[k] = env_spec[k] * mod_gain(j, k);
      fft.inv(filtered, mod_spec);
      const Index col = b * kModulationBands + j;
      for (Index i = 0; i < n_windows; ++i) {
        double e = 0.0;
        for (Index n = 0; n < win; ++n) {
          const double v = filtered[i * shift + n];
          e += v * v;
        }
        out.energies(i, col) = e / win;
      }
    }
  }
  return out;
}

Eigen::VectorXd ModulationSpectrum::flattened() const {
  Eigen::VectorXd v(energies.size());
  for (Index b = 0; b < energies.rows(); ++b)
    v.segment(b * energies.cols(), energies.cols()) = energies.row(b).transpose();
  return v;
}

ModulationSpectrum average_modulation(const ModulationFrames& frames,
                                      const Eigen::VectorXd& window_weights) {
  if (window_weights.size() != frames.energies.rows())
    throw UsageError("modulation window weight length mismatch");
  const double total = window_weights.sum();
  if (!(total > 0.0)) throw DataError("modulation windows carry no weight");
  const Eigen::VectorXd mean = frames.energies.transpose() * window_weights / total;
  ModulationSpectrum m;
  m.energies.resize(kAcousticBands, kModulationBands);
  for (int b = 0; b < kAcousticBands; ++b)
    m.energies.row(b) = mean.segment(b * kModulationBands, kModulationBands).transpose();
  m.energies = m.energies.cwiseMax(0.0);
  return m;
}

ModulationSpectrum modulation_spectrum(const Waveform& w, const ModulationConfig& cfg) {
  const ModulationFrames f = modulation_frames(w, cfg);
  return average_modulation(f, Eigen::VectorXd::Ones(f.energies.rows()));
}

double lhmr(const ModulationSpectrum& m, int split, Warnings* warnings) {
  if (split < 1 || split >= m.energies.cols()) throw UsageError("LHMR split index out of range");
  const double low = m.energies.leftCols(split).sum();
  const double high = m.energies.rightCols(m.energies.cols() - split).sum();
  if (!(high > 0.0)) {
    warn(warnings, "LHMR: zero high-modulation energy");
    return std::numeric_limits<double>::infinity();
  }
  return low / high;
}

Eigen::VectorXd window_weights_from_frames(const ModulationFrames& frames,
                                           const Eigen::VectorXd& frame_weights,
                                           const FrameGrid& grid) {
  const Index W = frames.energies.rows();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(W);
  for (Index i = 0; i < W; ++i) {
    const Index begin = frames.window_start(i), end = begin + frames.window_length;
    double acc = 0.0;
    Index count = 0;
    for (Index t = 0; t < frame_weights.size(); ++t) {
      const Index centre = t * grid.hop_length + grid.frame_length / 2;
      if (centre >= begin && centre < end) {
        acc += frame_weights(t);
        ++count;
      }
    }
    out(i) = count > 0 ? acc / count : 0.0;
  }
  return out;
}

}  // namespace ispc
