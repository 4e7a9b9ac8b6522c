#include "chorus/synth.hpp"

#include <cmath>
#include <numbers>

namespace chorus {

namespace {

double uniform01(std::mt19937_64& rng) {
  // 53 random bits -> [0, 1)
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

}  // namespace

double standard_normal(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<double> synth_tone_clip(const ToneClipParams& p, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(p.duration_s * p.sample_rate);
  const double fs = p.sample_rate;
  std::vector<double> signal(n, 0.0);

  double t = uniform(rng, 0.02, 0.08);
  while (t < p.duration_s - 0.05) {
    const double len = std::min(uniform(rng, 0.08, 0.20), p.duration_s - t);
    const double f0 = p.centre_hz + uniform(rng, -p.jitter_hz, p.jitter_hz);
    const double slope = uniform(rng, -p.sweep_hz, p.sweep_hz) / len;
    const double ramp = 0.005;
    const auto start = static_cast<std::size_t>(t * fs);
    const auto count = static_cast<std::size_t>(len * fs);
    double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < count && start + i < n; ++i) {
      const double ti = static_cast<double>(i) / fs;
      double env = 1.0;
      if (ti < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * ti / ramp);
      if (len - ti < ramp) env = std::min(env, 0.5 - 0.5 * std::cos(std::numbers::pi * (len - ti) / ramp));
      signal[start + i] = 0.5 * env * std::sin(phase);
      phase += 2.0 * std::numbers::pi * (f0 + slope * ti) / fs;
    }
    t += len + uniform(rng, 0.05, 0.15);
  }

  double power = 0.0;
  for (double s : signal) power += s * s;
  power /= static_cast<double>(std::max<std::size_t>(n, 1));
  const double noise_rms = std::sqrt(power / std::pow(10.0, p.snr_db / 10.0));
  for (double& s : signal) s += noise_rms * standard_normal(rng);
  return signal;
}

std::vector<double> synth_noise_clip(double duration_s, std::uint32_t sample_rate, double rms,
                                     std::mt19937_64& rng) {
  std::vector<double> out(static_cast<std::size_t>(duration_s * sample_rate));
  for (double& s : out) s = rms * standard_normal(rng);
  return out;
}

std::string tone_species_label(double centre_hz) {
  return "Tonus f" + std::to_string(static_cast<long>(std::lround(centre_hz)));
}

Fixture make_tone_fixture(const FixtureSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  Fixture fx;
  for (double c : spec.centres_hz) fx.species.push_back(tone_species_label(c));

  auto make = [&](std::size_t s, const std::string& role, std::size_t i) {
    ToneClipParams p;
    p.centre_hz = spec.centres_hz[s];
    p.snr_db = spec.snr_db;
    p.duration_s = spec.duration_s;
    p.sample_rate = spec.sample_rate;
    FixtureClip clip;
    clip.species = fx.species[s];
    clip.recording_id = role + "-" + std::to_string(static_cast<long>(spec.centres_hz[s])) + "-" +
                        (i < 10 ? "0" : "") + std::to_string(i);
    clip.clip.samples = synth_tone_clip(p, rng);
    clip.clip.sample_rate = spec.sample_rate;
    clip.clip.source_id = clip.recording_id;
    return clip;
  };

  for (std::size_t s = 0; s < spec.centres_hz.size(); ++s) {
    for (std::size_t i = 0; i < spec.train_per_species; ++i) fx.train.push_back(make(s, "train", i));
  }
  for (std::size_t s = 0; s < spec.centres_hz.size(); ++s) {
    for (std::size_t i = 0; i < spec.test_per_species; ++i) fx.test.push_back(make(s, "test", i));
  }

  const auto n_noise = static_cast<std::size_t>(
      std::lround(spec.noise_fraction * static_cast<double>(fx.test.size())));
  for (std::size_t i = 0; i < n_noise && !fx.species.empty(); ++i) {
    FixtureClip clip;
    clip.species = fx.species[i % fx.species.size()];
    clip.recording_id = "noise-" + std::string(i < 10 ? "0" : "") + std::to_string(i);
    clip.noise_only = true;
    clip.clip.samples = synth_noise_clip(spec.duration_s, spec.sample_rate, 0.05, rng);
    clip.clip.sample_rate = spec.sample_rate;
    clip.clip.source_id = clip.recording_id;
    fx.test.push_back(std::move(clip));
  }
  return fx;
}

}  // namespace chorus
