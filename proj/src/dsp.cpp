#include "chorus/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <memory>
#include <mutex>

#include "chorus/error.hpp"

namespace chorus {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

// The FFTW planner is not re-entrant; plans are built once per size under a
// lock and executed through the new-array interface, which is thread safe.
fftw_plan plan_for(std::size_t nfft) {
  static std::mutex mutex;
  static std::map<std::size_t, fftw_plan> plans;
  std::lock_guard lock(mutex);
  auto it = plans.find(nfft);
  if (it != plans.end()) return it->second;
  RealBuffer in(static_cast<double*>(fftw_malloc(sizeof(double) * nfft)));
  ComplexBuffer out(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (nfft / 2 + 1))));
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(nfft), in.get(), out.get(), FFTW_ESTIMATE);
  plans.emplace(nfft, plan);
  return plan;
}

}  // namespace

AudioClip decode_wav(std::span<const std::uint8_t> bytes, std::string source_id) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorKind::MalformedHeader, "not a RIFF/WAVE container");
  }

  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    std::uint32_t size = read_u32(chunk + 4);
    std::size_t body = pos + 8;
    std::size_t available = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || size > available) throw Error(ErrorKind::MalformedHeader, "short fmt chunk");
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == kFormatExtensible) {
        if (size < 40) throw Error(ErrorKind::MalformedHeader, "short extensible fmt chunk");
        // The sub-format GUID starts with the plain format tag.
        format = read_u16(chunk + 8 + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      // Some writers leave the size at 0 or 0xFFFFFFFF when streaming.
      data_size = std::min<std::size_t>(size, available);
      break;
    }
    pos = body + size + (size & 1u);
  }

  if (!have_fmt) throw Error(ErrorKind::MalformedHeader, "missing fmt chunk");
  if (data == nullptr) throw Error(ErrorKind::MalformedHeader, "missing data chunk");
  if (rate == 0) throw Error(ErrorKind::MalformedHeader, "zero sample rate");
  if (channels < 1 || channels > 2) {
    throw Error(ErrorKind::UnsupportedFormat, std::to_string(channels) + " channels");
  }
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    throw Error(ErrorKind::UnsupportedFormat,
                "format tag " + std::to_string(format) + " with " + std::to_string(bits) + " bits");
  }

  const std::size_t sample_bytes = bits / 8;
  const std::size_t frame_bytes = sample_bytes * channels;
  const std::size_t n = data_size / frame_bytes;

  AudioClip clip;
  clip.sample_rate = rate;
  clip.source_id = std::move(source_id);
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::uint8_t* p = data + i * frame_bytes + c * sample_bytes;
      if (pcm16) {
        acc += static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else {
        acc += static_cast<double>(std::bit_cast<float>(read_u32(p)));
      }
    }
    clip.samples[i] = acc / channels;
  }
  return clip;
}

AudioClip read_wav_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes, path);
}

std::vector<std::uint8_t> encode_wav(std::span<const double> samples, std::uint32_t sample_rate,
                                     WavEncoding encoding) {
  const std::uint16_t bits = encoding == WavEncoding::Pcm16 ? 16 : 32;
  const std::uint16_t tag = encoding == WavEncoding::Pcm16 ? kFormatPcm : kFormatFloat;
  const std::uint32_t data_size = static_cast<std::uint32_t>(samples.size() * (bits / 8));

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, tag);
  put_u16(out, 1);
  put_u32(out, sample_rate);
  put_u32(out, sample_rate * (bits / 8));
  put_u16(out, bits / 8);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_size);
  for (double s : samples) {
    if (encoding == WavEncoding::Pcm16) {
      double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
      auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
      put_u16(out, static_cast<std::uint16_t>(v));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    }
  }
  return out;
}

void write_wav_file(const std::string& path, std::span<const double> samples,
                    std::uint32_t sample_rate, WavEncoding encoding) {
  auto bytes = encode_wav(samples, sample_rate, encoding);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::size_t fft_size_for(std::uint32_t sample_rate) {
  // Integer form of nfft >= 1024 * rate / 48000.
  const std::uint64_t needed = 1024ull * sample_rate;
  std::size_t nfft = 1;
  while (static_cast<std::uint64_t>(nfft) * 48000ull < needed) nfft <<= 1;
  return nfft;
}

std::size_t frame_length_for(std::uint32_t sample_rate) {
  return static_cast<std::size_t>(std::llround(kFrameSeconds * sample_rate));
}

Spectrogram compute_spectrogram(const AudioClip& clip) {
  if (clip.sample_rate == 0) throw Error(ErrorKind::InvalidArgument, "sample rate must be positive");
  const std::size_t frame_len = frame_length_for(clip.sample_rate);
  if (frame_len < 2 || clip.samples.size() < frame_len) {
    throw Error(ErrorKind::ClipTooShort, std::to_string(clip.samples.size()) +
                                             " samples, need " + std::to_string(frame_len));
  }

  Spectrogram spec;
  spec.sample_rate = clip.sample_rate;
  spec.nfft = fft_size_for(clip.sample_rate);
  spec.frame_length = frame_len;
  spec.hop = frame_len / 2;
  spec.frame_hop_s = static_cast<double>(spec.hop) / clip.sample_rate;

  // Bin k has centre k * rate / nfft; compare in integers so the band edges
  // are exact.
  const std::uint64_t rate = clip.sample_rate;
  const std::uint64_t nfft = spec.nfft;
  std::size_t first_bin = 0;
  std::size_t last_bin = 0;
  bool any = false;
  for (std::size_t k = 0; k <= spec.nfft / 2; ++k) {
    const std::uint64_t scaled = k * rate;
    if (scaled >= 1000ull * nfft && scaled <= 10000ull * nfft) {
      if (!any) first_bin = k;
      last_bin = k;
      any = true;
    }
  }
  if (!any) {
    throw Error(ErrorKind::UnsupportedFormat,
                "sample rate " + std::to_string(clip.sample_rate) + " Hz does not reach the 1 kHz band");
  }
  const std::size_t n_bins = last_bin - first_bin + 1;
  spec.freqs.resize(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    spec.freqs[b] = static_cast<double>((first_bin + b) * rate) / static_cast<double>(nfft);
  }

  const std::size_t n_frames = (clip.samples.size() - frame_len) / spec.hop + 1;
  spec.frame_power.resize(n_frames);
  spec.magnitudes.resize(n_frames * n_bins);

  fftw_plan plan = plan_for(spec.nfft);
  RealBuffer in(static_cast<double*>(fftw_malloc(sizeof(double) * spec.nfft)));
  ComplexBuffer out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (spec.nfft / 2 + 1))));

  for (std::size_t f = 0; f < n_frames; ++f) {
    const double* src = clip.samples.data() + f * spec.hop;
    double power = 0.0;
    for (std::size_t i = 0; i < frame_len; ++i) {
      in[i] = src[i];
      power += src[i] * src[i];
    }
    std::fill(in.get() + frame_len, in.get() + spec.nfft, 0.0);
    spec.frame_power[f] = power;

    fftw_execute_dft_r2c(plan, in.get(), out.get());
    double* row = spec.magnitudes.data() + f * n_bins;
    for (std::size_t b = 0; b < n_bins; ++b) {
      const fftw_complex& z = out[first_bin + b];
      row[b] = std::hypot(z[0], z[1]);
    }
  }
  return spec;
}

}  // namespace chorus
