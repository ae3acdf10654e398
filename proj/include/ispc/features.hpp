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

// Acoustic front ends: log-mel spectrograms, MFCC + deltas, the modulation
// spectrum and the six-feature intelligibility set (std of delta-c0, LP
// residual kurtosis, LHMR, voicing and F0 statistics).
//
// Time-frequency matrices are stored one frame per row (T x bands). All
// extractors expect 16 kHz input.

#ifndef ISPC_FEATURES_HPP_
#define ISPC_FEATURES_HPP_

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "ispc/audio.hpp"
#include "ispc/error.hpp"

namespace ispc {

inline constexpr int kFftSize = 512;
inline constexpr double kLogFloor = 1e-10;
inline constexpr int kLogMelBands = 32;
inline constexpr int kMfccFilters = 40;
inline constexpr int kNumCepstra = 13;
inline constexpr int kAcousticBands = 23;
inline constexpr int kModulationBands = 8;
inline constexpr int kLpcOrder = 18;
inline constexpr double kVoicingThreshold = 0.45;

// ---------------------------------------------------------------------------
// Spectral primitives

/// |FFT|^2 of each Hamming-windowed 20 ms / 10 ms frame, zero-padded to
/// `n_fft`: T x (n_fft/2 + 1).
Eigen::MatrixXd power_spectrogram(const Waveform& w, int n_fft = kFftSize);
Eigen::MatrixXd power_spectrogram(const Waveform& w, const FrameGrid& grid, int n_fft);

double hz_to_mel(double hz);  // 2595 log10(1 + f/700)
double mel_to_hz(double mel);

/// Triangular filters with centers uniform on the mel scale, unit peak:
/// n_filters x (n_fft/2 + 1). Throws UsageError unless
/// 0 <= f_lo < f_hi <= sr/2.
Eigen::MatrixXd mel_filterbank(int n_filters, int n_fft, int sample_rate, double f_lo,
                               double f_hi);

/// Center frequencies (Hz) of the filters built by mel_filterbank.
Eigen::VectorXd mel_center_frequencies(int n_filters, double f_lo, double f_hi);

/// Orthonormal DCT-II matrix, n_out x n_in (rows are basis vectors).
Eigen::MatrixXd dct_matrix(int n_out, int n_in);

/// Regression deltas over +-2 frames, edges replicated.
Eigen::MatrixXd deltas(const Eigen::MatrixXd& features);

// ---------------------------------------------------------------------------
// Log-mel spectrogram (LSTM input)

struct LogMelSpectrogram {
  Eigen::MatrixXd values;  // T x n_bands
  double frame_rate = 100.0;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index bands() const { return values.cols(); }
};

/// ln(max(mel energy, 1e-10)) per frame, unnormalized.
LogMelSpectrogram log_mel_energies(const Waveform& w, int n_bands = kLogMelBands);

/// Per-band zero mean, unit variance over frames. Bands with zero variance
/// are only centered.
void normalize_utterance(LogMelSpectrogram& spec);

/// log_mel_energies followed by normalize_utterance.
LogMelSpectrogram log_mel(const Waveform& w, int n_bands = kLogMelBands);

// ---------------------------------------------------------------------------
// MFCC

/// 13 orthonormal-DCT cepstra of the 40-band log-mel spectrogram followed by
/// their 13 deltas: T x 26.
Eigen::MatrixXd mfcc_delta(const Waveform& w);

// ---------------------------------------------------------------------------
// Modulation spectrum

struct ModulationConfig {
  double low_hz = 125.0;
  double high_hz = 7500.0;
  double window_s = 0.256;
  double shift_s = 0.064;
  double envelope_rate = 1000.0;  // envelopes are decimated to this rate
  double modulation_q = 2.0;
  /// Modulation filters [0, low_band_split) count as "low" for LHMR.
  int low_band_split = 1;
};

/// Gammatone center frequencies, equally spaced on the ERB-rate scale.
Eigen::VectorXd gammatone_centers(const ModulationConfig& cfg = {});

/// Modulation filter centers: 4, 6.5, 10.7, 17.6, 28.9, 47.5, 78.1, 128.4 Hz.
const std::array<double, kModulationBands>& modulation_centers();

/// Per-window modulation energies: one row per 256 ms window (64 ms shift),
/// 184 columns laid out band-major (acoustic band * 8 + modulation band).
struct ModulationFrames {
  Eigen::MatrixXd energies;            // W x 184
  Eigen::VectorXi window_start;        // first sample of each window
  Eigen::Index window_length = 0;      // samples
};

ModulationFrames modulation_frames(const Waveform& w, const ModulationConfig& cfg = {});

struct ModulationSpectrum {
  Eigen::MatrixXd energies;  // 23 x 8, nonnegative

  Eigen::VectorXd flattened() const;  // 184, band-major
};

/// Average of the window energies. Throws DataError when the waveform is
/// shorter than one modulation window.
ModulationSpectrum modulation_spectrum(const Waveform& w, const ModulationConfig& cfg = {});

/// Weighted average of the window energies; weights need not be normalized.
ModulationSpectrum average_modulation(const ModulationFrames& frames,
                                      const Eigen::VectorXd& window_weights);

/// Low-to-high modulation energy ratio. Columns [0, split) are "low". Zero
/// high-band energy yields +infinity and a warning.
double lhmr(const ModulationSpectrum& m, int low_band_split = 1, Warnings* warnings = nullptr);

// ---------------------------------------------------------------------------
// Linear prediction

/// Levinson-Durbin on autocorrelation r[0..order]; returns a[0..order] with
/// a[0] = 1 so that e[n] = sum_k a[k] x[n-k].
Eigen::VectorXd levinson_durbin(const Eigen::VectorXd& autocorrelation, int order);

/// Per-frame sums of the LP residual: column 0 holds the sample count and
/// columns 1..4 hold sum e, e^2, e^3, e^4 (20 ms / 10 ms grid, order 18).
/// Silent frames contribute a zero row.
Eigen::MatrixXd lp_residual_moments(const Waveform& w, int order = kLpcOrder);

/// Pearson kurtosis E[(x-mu)^4] / sigma^4 of residual samples pooled over
/// frames with per-frame weights. Throws DataError for a degenerate residual.
double pooled_kurtosis(const Eigen::MatrixXd& moments, const Eigen::VectorXd& frame_weights);

double lp_residual_kurtosis(const Waveform& w, int order = kLpcOrder);

// ---------------------------------------------------------------------------
// Pitch

struct PitchTrack {
  std::vector<bool> voiced;
  Eigen::VectorXd f0;  // Hz; 0 for unvoiced frames
  Eigen::VectorXd strength;  // normalized autocorrelation peak

  Eigen::Index frames() const { return f0.size(); }
  double voiced_fraction() const;
};

/// Normalized-autocorrelation pitch over 40 ms frames with a 10 ms hop,
/// F0 in [60, 400] Hz, parabolic peak interpolation.
PitchTrack pitch_track(const Waveform& w, double voicing_threshold = kVoicingThreshold);

// ---------------------------------------------------------------------------
// Six-feature set

struct FalkFeatures {
  double std_delta_c0 = 0.0;
  double lp_residual_kurtosis = 0.0;
  double lhmr = 0.0;
  double pct_voiced = 0.0;
  double f0_std = 0.0;
  double f0_range = 0.0;

  Eigen::VectorXd as_vector() const;
};

/// Frame-level intermediates from which the utterance features are pooled,
/// so that the pooling can be reweighted per frame.
struct FalkFrameStats {
  Eigen::VectorXd delta_c0;          // T (10 ms grid)
  Eigen::MatrixXd residual_moments;  // T x 5 (10 ms grid)
  ModulationFrames modulation;
  PitchTrack pitch;                  // T - 2 frames; pitch frame i is centred on grid frame i + 1
};

FalkFrameStats falk_frame_stats(const Waveform& w, const ModulationConfig& cfg = {});

/// Pools the statistics with per-frame weights on the 10 ms grid (length T).
/// Uniform weights reproduce falk_features exactly.
FalkFeatures pool_falk(const FalkFrameStats& stats, const Eigen::VectorXd& frame_weights,
                       int low_band_split = 1, Warnings* warnings = nullptr);

FalkFeatures falk_features(const Waveform& w, Warnings* warnings = nullptr);

/// Maps weights on the 10 ms grid to modulation windows: each window gets the
/// mean weight of the grid frames whose centres fall inside it.
Eigen::VectorXd window_weights_from_frames(const ModulationFrames& frames,
                                           const Eigen::VectorXd& frame_weights,
                                           const FrameGrid& grid);

}  // namespace ispc

#endif  // ISPC_FEATURES_HPP_
