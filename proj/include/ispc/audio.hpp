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

#ifndef ISPC_AUDIO_HPP_
#define ISPC_AUDIO_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ispc/error.hpp"
#include "ispc/manifest.hpp"
#include "ispc/random.hpp"

namespace ispc {

inline constexpr int kCanonicalSampleRate = 16000;

struct Waveform {
  Eigen::VectorXd samples;  // nominally in [-1, 1]
  int sample_rate = kCanonicalSampleRate;

  Eigen::Index size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Throws UsageError on a non-positive rate or non-finite samples.
void validate(const Waveform& w);

/// Symmetric Hamming window, 0.54 - 0.46 cos(2 pi n / (N - 1)).
Eigen::VectorXd hamming_window(Eigen::Index length);

/// Analysis grid: frame length and hop in samples plus the window.
struct FrameGrid {
  Eigen::Index frame_length = 320;
  Eigen::Index hop_length = 160;
  Eigen::VectorXd window;

  /// 20 ms Hamming window every 10 ms at the given rate.
  static FrameGrid standard(int sample_rate = kCanonicalSampleRate);
  static FrameGrid hamming(Eigen::Index frame_length, Eigen::Index hop_length);
  static FrameGrid rectangular(Eigen::Index frame_length, Eigen::Index hop_length);

  Eigen::Index num_frames(Eigen::Index num_samples) const;
};

/// Windowed frames, one frame per row: T x frame_length with
/// T = 1 + floor((len - frame_length) / hop). Throws DataError when the
/// waveform is shorter than one frame.
Eigen::MatrixXd frame_signal(const Waveform& w, const FrameGrid& grid);

/// Reads 16-bit PCM mono RIFF/WAVE. Samples are divided by 32768. A rate
/// other than 16 kHz is accepted and reported through `warnings`.
Waveform load_wav(const std::filesystem::path& path, Warnings* warnings = nullptr);

/// Writes 16-bit PCM mono, clipping to the representable range.
void save_wav(const std::filesystem::path& path, const Waveform& w);

// ---------------------------------------------------------------------------
// Synthetic corpus

/// Prosodic profile of one intelligibility class. Utterances are trains of
/// amplitude-modulated harmonic "syllables" separated by pauses.
struct ClassProfile {
  Level level = Level::High;
  double syllable_rate_min = 4.0;  // Hz, one syllable per 1/rate seconds
  double syllable_rate_max = 6.0;
  double pause_min = 0.02;  // s, silence between syllables
  double pause_max = 0.08;
  int syllables_min = 5;
  int syllables_max = 8;
  double disfluency_probability = 0.0;  // low-energy burst inside a pause
  int score_min = 67;
  int score_max = 100;
};

/// Class profiles for L, M and H (in that order).
std::vector<ClassProfile> default_class_profiles();

struct SpeakerTraits {
  double f0 = 120.0;            // Hz
  double rate_factor = 1.0;     // position inside the class rate range, [0,1]
  double pause_factor = 1.0;    // position inside the class pause range, [0,1]
  double loudness = 0.3;        // peak syllable amplitude
  double brightness = 1.0;      // harmonic roll-off exponent
};

SpeakerTraits draw_speaker(Rng& rng);

/// One utterance for the given class profile and speaker.
Waveform synth_utterance(const ClassProfile& profile, const SpeakerTraits& speaker,
                         Rng& rng, int sample_rate = kCanonicalSampleRate);

struct CorpusSpec {
  std::vector<ClassProfile> profiles = default_class_profiles();
  int speakers_per_class = 4;
  int utterances_per_speaker = 10;
  std::uint64_t seed = 0;
};

/// Writes `<out_dir>/<speaker>/<speaker>_<k>.wav` for every utterance plus
/// `<out_dir>/manifest.csv`; returns the manifest. Deterministic in `seed`.
/// Throws UsageError when fewer than 3 speakers per class or no utterances
/// are requested.
Manifest synth_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir);

}  // namespace ispc

#endif  // ISPC_AUDIO_HPP_
