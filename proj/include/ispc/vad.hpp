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

// Statistical-model voice activity detection: Gaussian likelihood ratio per
// frequency bin with decision-directed a-priori SNR, geometric mean over
// bins, thresholding and hangover smoothing.

#ifndef ISPC_VAD_HPP_
#define ISPC_VAD_HPP_

#include <Eigen/Dense>
#include <vector>

#include "ispc/audio.hpp"

namespace ispc {

struct VadConfig {
  int noise_init_frames = 10;
  double lrt_threshold = 0.15;  // on the mean log likelihood ratio
  int hangover_frames = 8;
  double snr_smoothing = 0.98;
  double noise_floor = 1e-10;

  void validate() const;
};

struct VadDecision {
  std::vector<bool> speech;  // after hangover
  Eigen::VectorXd llr;       // mean log likelihood ratio per frame

  Eigen::Index frames() const { return llr.size(); }
  Eigen::Index speech_frames() const;
};

/// Frame decisions from a power spectrogram (T x K). The noise PSD is the
/// mean of the first `noise_init_frames` frames. Throws DataError unless
/// T > noise_init_frames.
VadDecision vad_decide(const Eigen::MatrixXd& power, const VadConfig& cfg = {});

/// Same on the standard 20 ms / 10 ms grid of a waveform.
VadDecision vad_decide(const Waveform& w, const VadConfig& cfg = {});

/// Thresholds a log likelihood ratio sequence (no hangover).
std::vector<bool> threshold_llr(const Eigen::VectorXd& llr, double threshold);

/// Bridges non-speech gaps of at most `hangover_frames` frames that follow a
/// speech run and precede another one. Extensive and idempotent.
std::vector<bool> apply_hangover(const std::vector<bool>& raw, int hangover_frames);

/// Rows of `frames` whose decision is true, order preserved. Throws
/// DataError("empty utterance after VAD") when none remain.
Eigen::MatrixXd apply_vad(const Eigen::MatrixXd& frames, const std::vector<bool>& speech);

/// Concatenates the hop-length segments of speech frames into a waveform.
Waveform speech_only(const Waveform& w, const VadDecision& d, const FrameGrid& grid);

}  // namespace ispc

#endif  // ISPC_VAD_HPP_
