#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "chorus/dsp.hpp"

namespace chorus {

// Synthetic "species" made of tone syllables around a centre frequency in
// white noise. Used by the test fixtures and the `synth` CLI verb.

struct ToneClipParams {
  double centre_hz = 5000.0;
  double jitter_hz = 150.0;     // per-syllable offset range
  double sweep_hz = 200.0;      // max frequency excursion within a syllable
  double snr_db = 20.0;         // over the whole clip
  double duration_s = 1.5;
  std::uint32_t sample_rate = 48000;
};

/// Portable N(0, 1) draws (Box-Muller on the raw engine output).
double standard_normal(std::mt19937_64& rng);

std::vector<double> synth_tone_clip(const ToneClipParams& params, std::mt19937_64& rng);
std::vector<double> synth_noise_clip(double duration_s, std::uint32_t sample_rate, double rms,
                                     std::mt19937_64& rng);

struct FixtureClip {
  std::string species;
  std::string recording_id;
  bool noise_only = false;
  AudioClip clip;
};

struct FixtureSpec {
  std::vector<double> centres_hz{2000.0, 5000.0, 8000.0};
  std::size_t train_per_species = 20;
  std::size_t test_per_species = 10;
  // Extra pure-noise test clips, as a fraction of the tone test clips.
  // They are labelled round-robin with the species.
  double noise_fraction = 0.0;
  double duration_s = 1.5;
  double snr_db = 20.0;
  std::uint32_t sample_rate = 48000;
  std::uint64_t seed = 20160101;
};

struct Fixture {
  std::vector<std::string> species;
  std::vector<FixtureClip> train;
  std::vector<FixtureClip> test;
};

std::string tone_species_label(double centre_hz);
Fixture make_tone_fixture(const FixtureSpec& spec);

}  // namespace chorus
