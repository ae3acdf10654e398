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

#include <algorithm>
#include <cmath>
#include <limits>

#include "ispc/features.hpp"

namespace ispc {

using Eigen::Index;

Eigen::VectorXd FalkFeatures::as_vector() const {
  Eigen::VectorXd v(6);
  v << std_delta_c0, lp_residual_kurtosis, lhmr, pct_voiced, f0_std, f0_range;
  return v;
}

FalkFrameStats falk_frame_stats(const Waveform& w, const ModulationConfig& cfg) {
  FalkFrameStats s;
  s.delta_c0 = mfcc_delta(w).col(kNumCepstra);
  s.residual_moments = lp_residual_moments(w);
  s.modulation = modulation_frames(w, cfg);
  s.pitch = pitch_track(w);
  return s;
}

FalkFeatures pool_falk(const FalkFrameStats& s, const Eigen::VectorXd& weights, int split,
                       Warnings* warnings) {
  const Index T = s.delta_c0.size();
  if (weights.size() != T) throw UsageError("frame weight length does not match the utterance");
  if ((weights.array() < 0.0).any()) throw UsageError("frame weights must be nonnegative");
  const double total = weights.sum();
  if (!(total > 0.0)) throw DataError("frame weights sum to zero");

  FalkFeatures f;
  const double mean_dc0 = weights.dot(s.delta_c0) / total;
  f.std_delta_c0 =
      std::sqrt(weights.dot((s.delta_c0.array() - mean_dc0).square().matrix()) / total);
  f.lp_residual_kurtosis = pooled_kurtosis(s.residual_moments, weights);

  const FrameGrid grid = FrameGrid::standard();
  f.lhmr = lhmr(average_modulation(s.modulation,
                                   window_weights_from_frames(s.modulation, weights, grid)),
                split, warnings);

  // Pitch frame i is centred on grid frame i + 1.
  double w_all = 0.0, w_voiced = 0.0, sum_f0 = 0.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  Index n_voiced = 0;
  for (Index i = 0; i < s.pitch.frames(); ++i) {
    const double wi = i + 1 < T ? weights(i + 1) : 0.0;
    w_all += wi;
    if (!s.pitch.voiced[i] || wi <= 0.0) continue;
    w_voiced += wi;
    sum_f0 += wi * s.pitch.f0(i);
    lo = std::min(lo, s.pitch.f0(i));
    hi = std::max(hi, s.pitch.f0(i));
    ++n_voiced;
  }
  f.pct_voiced = w_all > 0.0 ? w_voiced / w_all : 0.0;
  if (n_voiced < 2) {
    warn(warnings, "fewer than two voiced frames: F0 statistics set to 0");
    return f;
  }
  const double mean_f0 = sum_f0 / w_voiced;
  double var = 0.0;
  for (Index i = 0; i < s.pitch.frames(); ++i) {
    const double wi = i + 1 < T ? weights(i + 1) : 0.0;
    if (s.pitch.voiced[i] && wi > 0.0) var += wi * (s.pitch.f0(i) - mean_f0) * (s.pitch.f0(i) - mean_f0);
  }
  f.f0_std = std::sqrt(var / w_voiced);
  f.f0_range = hi - lo;
  return f;
}

FalkFeatures falk_features(const Waveform& w, Warnings* warnings) {
  const FalkFrameStats s = falk_frame_stats(w);
  return pool_falk(s, Eigen::VectorXd::Ones(s.delta_c0.size()), 1, warnings);
}

}  // namespace ispc
