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

#include "ispc/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

namespace ispc {

using Eigen::Index;

void validate(const Waveform& w) {
  if (w.sample_rate <= 0) throw UsageError("sample rate must be positive");
  if (!w.samples.allFinite()) throw UsageError("waveform contains non-finite samples");
}

Eigen::VectorXd hamming_window(Index length) {
  Eigen::VectorXd w(length);
  if (length == 1) {
    w(0) = 1.0;
    return w;
  }
  for (Index n = 0; n < length; ++n)
    w(n) = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / static_cast<double>(length - 1));
  return w;
}

FrameGrid FrameGrid::hamming(Index frame_length, Index hop_length) {
  if (frame_length <= 0 || hop_length <= 0 || hop_length > frame_length)
    throw UsageError("frame grid requires 0 < hop <= frame length");
  return FrameGrid{frame_length, hop_length, hamming_window(frame_length)};
}

FrameGrid FrameGrid::rectangular(Index frame_length, Index hop_length) {
  if (frame_length <= 0 || hop_length <= 0 || hop_length > frame_length)
    throw UsageError("frame grid requires 0 < hop <= frame length");
  return FrameGrid{frame_length, hop_length, Eigen::VectorXd::Ones(frame_length)};
}

FrameGrid FrameGrid::standard(int sample_rate) {
  return hamming(sample_rate / 50, sample_rate / 100);
}

Index FrameGrid::num_frames(Index num_samples) const {
  if (num_samples < frame_length) return 0;
  return 1 + (num_samples - frame_length) / hop_length;
}

Eigen::MatrixXd frame_signal(const Waveform& w, const FrameGrid& grid) {
  const Index frames = grid.num_frames(w.size());
  if (frames == 0) throw DataError("waveform shorter than one analysis frame");
  Eigen::MatrixXd out(frames, grid.frame_length);
  for (Index t = 0; t < frames; ++t)
    out.row(t) = (w.samples.segment(t * grid.hop_length, grid.frame_length).array() *
                  grid.window.array()).transpose();
  return out;
}

// ---------------------------------------------------------------------------
// WAV I/O

namespace {

std::uint32_t le32(const std::string& b, std::size_t pos) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 3])) << 24;
}

std::uint16_t le16(const std::string& b, std::size_t pos) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[pos]) |
                                    static_cast<unsigned char>(b[pos + 1]) << 8);
}

void put32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>(v >> 8));
}

}  // namespace

Waveform load_wav(const std::filesystem::path& path, Warnings* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string b{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const std::string where = path.string() + ": ";
  if (b.size() < 12 || b.compare(0, 4, "RIFF") != 0 || b.compare(8, 4, "WAVE") != 0)
    throw DataError(where + "not a RIFF/WAVE file");

  bool have_fmt = false;
  int channels = 0, rate = 0, bits = 0;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::string id = b.substr(pos, 4);
    const std::size_t size = le32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > b.size() && id != "data") throw DataError(where + "truncated chunk " + id);
    if (id == "fmt ") {
      if (size < 16) throw DataError(where + "short fmt chunk");
      const int format = le16(b, body);
      channels = le16(b, body + 2);
      rate = static_cast<int>(le32(b, body + 4));
      bits = le16(b, body + 14);
      if (format != 1) throw DataError(where + "unsupported encoding (only PCM)");
      if (channels != 1) throw DataError(where + "expected mono, got " + std::to_string(channels) + " channels");
      if (bits != 16) throw DataError(where + "unsupported sample width " + std::to_string(bits));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw DataError(where + "data chunk before fmt chunk");
      const std::size_t avail = std::min(size, b.size() - body);
      Waveform w;
      w.sample_rate = rate;
      w.samples.resize(static_cast<Index>(avail / 2));
      for (Index i = 0; i < w.samples.size(); ++i)
        w.samples(i) = static_cast<std::int16_t>(le16(b, body + 2 * i)) / 32768.0;
      if (rate <= 0) throw DataError(where + "invalid sample rate");
      if (rate != kCanonicalSampleRate)
        warn(warnings, where + "sample rate " + std::to_string(rate) + " Hz, expected 16000 Hz");
      return w;
    }
    pos = body + size + (size & 1);
  }
  throw DataError(where + "no data chunk");
}

void save_wav(const std::filesystem::path& path, const Waveform& w) {
  validate(w);
  const auto n = static_cast<std::uint32_t>(w.size());
  std::string b = "RIFF";
  put32(b, 36 + 2 * n);
  b += "WAVEfmt ";
  put32(b, 16);
  put16(b, 1);
  put16(b, 1);
  put32(b, static_cast<std::uint32_t>(w.sample_rate));
  put32(b, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put16(b, 2);
  put16(b, 16);
  b += "data";
  put32(b, 2 * n);
  for (Index i = 0; i < w.size(); ++i) {
    const double v = std::clamp(std::round(w.samples(i) * 32768.0), -32768.0, 32767.0);
    put16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

// ---------------------------------------------------------------------------
// Synthesis

std::vector<ClassProfile> default_class_profiles() {
  ClassProfile low{Level::Low, 0.8, 1.4, 0.30, 0.70, 2, 3, 0.6, 2, 30};
  ClassProfile medium{Level::Medium, 2.0, 3.0, 0.10, 0.30, 3, 5, 0.15, 36, 64};
  ClassProfile high{Level::High, 4.0, 6.0, 0.02, 0.08, 5, 9, 0.0, 70, 98};
  return {low, medium, high};
}

SpeakerTraits draw_speaker(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SpeakerTraits s;
  s.f0 = 90.0 + 130.0 * u(rng);
  s.rate_factor = u(rng);
  s.pause_factor = u(rng);
  s.loudness = 0.2 + 0.4 * u(rng);
  s.brightness = 0.8 + 0.8 * u(rng);
  return s;
}

namespace {

// Adds a harmonic burst with a sin^2 amplitude envelope (one modulation
// cycle per burst) starting at sample `start`.
void add_harmonic_burst(Eigen::VectorXd& out, Index start, Index length, double amplitude,
                        double f0, double brightness, double formant, int sample_rate,
                        Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double sr = sample_rate;
  const double drift = 0.06 * (u(rng) - 0.5);  // slight pitch movement per syllable
  const double start_phase = 2.0 * std::numbers::pi * u(rng);
  double phase = start_phase;
  const int harmonics = std::max(1, static_cast<int>(4000.0 / f0));
  Eigen::VectorXd weights(harmonics);
  for (int h = 1; h <= harmonics; ++h) {
    const double fh = h * f0;
    const double d = (fh - formant) / 250.0;
    weights(h - 1) = std::pow(h, -brightness) * (1.0 + 2.0 * std::exp(-d * d));
  }
  weights /= weights.sum();
  for (Index n = 0; n < length && start + n < out.size(); ++n) {
    const double x = static_cast<double>(n) / static_cast<double>(length);
    const double env = std::pow(std::sin(std::numbers::pi * x), 2);
    const double f = f0 * (1.0 + drift * (x - 0.5));
    phase += 2.0 * std::numbers::pi * f / sr;
    double v = 0.0;
    for (int h = 1; h <= harmonics; ++h) v += weights(h - 1) * std::sin(h * phase);
    out(start + n) += amplitude * env * v * 3.0;
  }
}

}  // namespace

Waveform synth_utterance(const ClassProfile& p, const SpeakerTraits& speaker, Rng& rng,
                         int sample_rate) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sr = sample_rate;
  auto lerp = [](double a, double b, double t) { return a + (b - a) * std::clamp(t, 0.0, 1.0); };

  const double rate =
      lerp(p.syllable_rate_min, p.syllable_rate_max, speaker.rate_factor) * (0.92 + 0.16 * u(rng));
  const int syllables =
      std::uniform_int_distribution<int>(p.syllables_min, p.syllables_max)(rng);
  const double lead = 0.10 + 0.20 * u(rng);
  const double trail = 0.10 + 0.50 * u(rng);

  struct Event {
    double start, length, amplitude, formant;
    bool disfluency;
  };
  std::vector<Event> events;
  double t = lead;
  for (int s = 0; s < syllables; ++s) {
    const double length = 0.8 / rate * (0.85 + 0.3 * u(rng));
    const double amplitude = speaker.loudness * (0.7 + 0.3 * u(rng));
    events.push_back({t, length, amplitude, 500.0 + 400.0 * u(rng), false});
    t += length;
    if (s + 1 < syllables) {
      const double pause =
          lerp(p.pause_min, p.pause_max, speaker.pause_factor + 0.6 * (u(rng) - 0.5));
      if (pause > 0.15 && u(rng) < p.disfluency_probability) {
        const double blen = 0.05 + 0.07 * u(rng);
        const double bstart = t + (pause - blen) * u(rng);
        events.push_back({bstart, blen, 0.12 * speaker.loudness, 400.0, true});
      }
      t += pause;
    }
  }
  t += trail;

  Waveform w;
  w.sample_rate = sample_rate;
  w.samples = Eigen::VectorXd::Zero(static_cast<Index>(t * sr));
  for (const auto& e : events) {
    const auto start = static_cast<Index>(e.start * sr);
    const auto length = std::max<Index>(1, static_cast<Index>(e.length * sr));
    const double f0 = e.disfluency ? speaker.f0 * 0.9 : speaker.f0 * (0.95 + 0.1 * u(rng));
    add_harmonic_burst(w.samples, start, length, e.amplitude, f0, speaker.brightness,
                       e.formant, sample_rate, rng);
  }

  // Background noise relative to the average power of the voiced parts.
  double active_power = 0.0;
  Index active = 0;
  for (Index i = 0; i < w.size(); ++i)
    if (std::abs(w.samples(i)) > 1e-3 * speaker.loudness) {
      active_power += w.samples(i) * w.samples(i);
      ++active;
    }
  active_power = active > 0 ? active_power / active : speaker.loudness * speaker.loudness;
  const double snr_db = 20.0 + 15.0 * u(rng);
  const double noise_std = std::sqrt(active_power / std::pow(10.0, snr_db / 10.0));
  for (Index i = 0; i < w.size(); ++i) w.samples(i) += noise_std * gauss(rng);

  const double peak = w.samples.cwiseAbs().maxCoeff();
  if (peak > 0.95) w.samples *= 0.95 / peak;
  return w;
}

Manifest synth_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir) {
  if (spec.profiles.empty()) throw UsageError("no class profiles given");
  if (spec.speakers_per_class < 3)
    throw UsageError("at least 3 speakers per class are required for speaker-disjoint splits");
  if (spec.utterances_per_speaker < 1) throw UsageError("utterances per speaker must be >= 1");

  std::filesystem::create_directories(out_dir);
  Manifest manifest;
  int speaker_index = 0;
  for (const auto& profile : spec.profiles) {
    for (int s = 0; s < spec.speakers_per_class; ++s, ++speaker_index) {
      char id[16];
      std::snprintf(id, sizeof(id), "spk%02d", speaker_index);
      auto speaker_rng = make_rng(spec.seed, std::string("speaker/") + id);
      const SpeakerTraits traits = draw_speaker(speaker_rng);
      const int score =
          std::uniform_int_distribution<int>(profile.score_min, profile.score_max)(speaker_rng);

      const auto dir = out_dir / id;
      std::filesystem::create_directories(dir);
      for (int k = 0; k < spec.utterances_per_speaker; ++k) {
        char name[32];
        std::snprintf(name, sizeof(name), "%s_%03d.wav", id, k);
        auto rng = make_rng(spec.seed, std::string("utterance/") + name);
        const Waveform w = synth_utterance(profile, traits, rng);
        save_wav(dir / name, w);
        manifest.push_back({dir / name, id, score});
      }
    }
  }
  write_manifest(out_dir / "manifest.csv", manifest);
  return manifest;
}

}  // namespace ispc
