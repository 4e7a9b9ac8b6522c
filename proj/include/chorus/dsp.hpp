#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace chorus {

// Analysis band kept after the FFT, in Hz (both edges inclusive).
inline constexpr double kBandLowHz = 1000.0;
inline constexpr double kBandHighHz = 10000.0;
inline constexpr double kFrameSeconds = 0.020;
// Bin spacing of a 1024-point FFT at 48 kHz; every sample rate is mapped to
// an FFT size giving at most this spacing.
inline constexpr double kMaxBinSpacingHz = 48000.0 / 1024.0;

struct AudioClip {
  std::vector<double> samples;  // mono, normalized to [-1, 1]
  std::uint32_t sample_rate = 0;
  std::string source_id;

  double duration_s() const {
    return sample_rate ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

enum class WavEncoding { Pcm16, Float32 };

AudioClip decode_wav(std::span<const std::uint8_t> bytes, std::string source_id = {});
AudioClip read_wav_file(const std::string& path);

// Writes a mono WAV. Used by the fixture generator and tests.
std::vector<std::uint8_t> encode_wav(std::span<const double> samples, std::uint32_t sample_rate,
                                     WavEncoding encoding = WavEncoding::Pcm16);
void write_wav_file(const std::string& path, std::span<const double> samples,
                    std::uint32_t sample_rate, WavEncoding encoding = WavEncoding::Pcm16);

/// Smallest power of two >= 1024 * sample_rate / 48000.
std::size_t fft_size_for(std::uint32_t sample_rate);

/// round(0.020 * sample_rate)
std::size_t frame_length_for(std::uint32_t sample_rate);

/// Band-limited magnitude spectrogram, row-major (frame, bin).
struct Spectrogram {
  std::vector<double> magnitudes;
  std::vector<double> freqs;        // centre frequency of each retained bin
  std::vector<double> frame_power;  // sum of squared samples per frame
  double frame_hop_s = 0.0;
  std::size_t nfft = 0;
  std::size_t frame_length = 0;
  std::size_t hop = 0;
  std::uint32_t sample_rate = 0;

  std::size_t n_frames() const { return frame_power.size(); }
  std::size_t n_bins() const { return freqs.size(); }
  std::span<const double> frame(std::size_t i) const {
    return {magnitudes.data() + i * n_bins(), n_bins()};
  }
};

/// 20 ms rectangular frames with 50% overlap, zero-padded to fft_size_for(),
/// keeping bins in [1 kHz, 10 kHz]. The trailing partial frame is dropped.
Spectrogram compute_spectrogram(const AudioClip& clip);

}  // namespace chorus
