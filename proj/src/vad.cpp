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

#include "ispc/vad.hpp"

#include <algorithm>
#include <cmath>

#include "ispc/features.hpp"

namespace ispc {

using Eigen::Index;

void VadConfig::validate() const {
  if (noise_init_frames < 1) throw UsageError("VAD noise_init_frames must be >= 1");
  if (hangover_frames < 0) throw UsageError("VAD hangover_frames must be >= 0");
  if (!(snr_smoothing > 0.0 && snr_smoothing < 1.0))
    throw UsageError("VAD snr_smoothing must lie in (0,1)");
  if (!(noise_floor > 0.0)) throw UsageError("VAD noise floor must be positive");
}

Index VadDecision::speech_frames() const {
  return static_cast<Index>(std::count(speech.begin(), speech.end(), true));
}

std::vector<bool> threshold_llr(const Eigen::VectorXd& llr, double threshold) {
  std::vector<bool> out(llr.size());
  for (Index t = 0; t < llr.size(); ++t) out[t] = llr(t) > threshold;
  return out;
}

std::vector<bool> apply_hangover(const std::vector<bool>& raw, int hangover) {
  std::vector<bool> out = raw;
  if (hangover <= 0) return out;
  const std::size_t T = raw.size();
  std::size_t t = 0;
  while (t < T && !raw[t]) ++t;  // leading silence is never bridged
  while (t < T) {
    while (t < T && raw[t]) ++t;
    const std::size_t gap_start = t;
    while (t < T && !raw[t]) ++t;
    if (t < T && t - gap_start <= static_cast<std::size_t>(hangover))
      std::fill(out.begin() + gap_start, out.begin() + t, true);
  }
  return out;
}

VadDecision vad_decide(const Eigen::MatrixXd& power, const VadConfig& cfg) {
  cfg.validate();
  const Index T = power.rows(), K = power.cols();
  if (T <= cfg.noise_init_frames)
    throw DataError("VAD needs more frames than the noise initialization segment");

  const Eigen::ArrayXd noise =
      power.topRows(cfg.noise_init_frames).colwise().mean().transpose().array().max(cfg.noise_floor);
  const double a = cfg.snr_smoothing;

  VadDecision d;
  d.llr.resize(T);
  Eigen::ArrayXd prev_clean = Eigen::ArrayXd::Zero(K);  // previous clean-speech power estimate
  for (Index t = 0; t < T; ++t) {
    const Eigen::ArrayXd gamma = power.row(t).transpose().array() / noise;
    const Eigen::ArrayXd ml = (gamma - 1.0).max(0.0);
    const Eigen::ArrayXd xi = t == 0 ? ml : (a * prev_clean / noise + (1.0 - a) * ml).eval();
    const Eigen::ArrayXd ratio = xi / (1.0 + xi);
    d.llr(t) = (gamma * ratio - (1.0 + xi).log()).mean();
    prev_clean = ratio.square() * power.row(t).transpose().array();
  }
  d.speech = apply_hangover(threshold_llr(d.llr, cfg.lrt_threshold), cfg.hangover_frames);
  return d;
}

VadDecision vad_decide(const Waveform& w, const VadConfig& cfg) {
  return vad_decide(power_spectrogram(w), cfg);
}

Eigen::MatrixXd apply_vad(const Eigen::MatrixXd& frames, const std::vector<bool>& speech) {
  if (static_cast<Index>(speech.size()) != frames.rows())
    throw UsageError("VAD decision length does not match frame count");
  const auto kept = static_cast<Index>(std::count(speech.begin(), speech.end(), true));
  if (kept == 0) throw DataError("empty utterance after VAD");
  Eigen::MatrixXd out(kept, frames.cols());
  Index r = 0;
  for (Index t = 0; t < frames.rows(); ++t)
    if (speech[t]) out.row(r++) = frames.row(t);
  return out;
}

Waveform speech_only(const Waveform& w, const VadDecision& d, const FrameGrid& grid) {
  const auto kept = d.speech_frames();
  if (kept == 0) throw DataError("empty utterance after VAD");
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(kept * grid.hop_length);
  Index pos = 0;
  for (Index t = 0; t < d.frames(); ++t) {
    if (!d.speech[t]) continue;
    const Index start = t * grid.hop_length;
    const Index len = std::min(grid.hop_length, w.size() - start);
    out.samples.segment(pos, len) = w.samples.segment(start, len);
    pos += len;
  }
  out.samples.conservativeResize(pos);
  return out;
}

}  // namespace ispc
