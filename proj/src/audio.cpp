// SPDX-License-Identifier: Apache-2.0
#include "disfluency/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "disfluency/errors.hpp"

namespace disfluency {

AudioClip::AudioClip(std::vector<double> samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (sample_rate_ <= 0) throw ParseError("sample rate must be positive");
  for (double& s : samples_) {
    if (!std::isfinite(s)) throw ParseError("non-finite sample");
    if (s > 1.0 || s < -1.0) {
      s = std::clamp(s, -1.0, 1.0);
      ++clamped_;
    }
  }
}

std::size_t AudioClip::index_at(double t_s) const {
  const double idx = std::round(t_s * sample_rate_);
  if (idx <= 0.0) return 0;
  return std::min(samples_.size(), static_cast<std::size_t>(idx));
}

AudioClip AudioClip::slice(std::size_t begin, std::size_t end) const {
  end = std::min(end, samples_.size());
  begin = std::min(begin, end);
  return AudioClip(std::vector<double>(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                       samples_.begin() + static_cast<std::ptrdiff_t>(end)),
                   sample_rate_);
}

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

struct Format {
  std::uint16_t tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
};

}  // namespace

AudioClip decode_wav(std::span<const unsigned char> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw ParseError("not a RIFF/WAVE container");
  }
  std::size_t pos = 12;
  bool have_fmt = false;
  Format fmt;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t len = le32(hdr + 4);
    const std::size_t body = pos + 8;
    if (len > bytes.size() - body) {
      throw ParseError("chunk '" + std::string(reinterpret_cast<const char*>(hdr), 4) +
                       "' extends past end of file");
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (len < 16) throw ParseError("fmt chunk too short");
      const unsigned char* f = bytes.data() + body;
      fmt.tag = le16(f);
      fmt.channels = le16(f + 2);
      fmt.rate = le32(f + 4);
      fmt.bits = le16(f + 14);
      if (fmt.tag == kFormatExtensible) {
        if (len < 40) throw ParseError("extensible fmt chunk too short");
        fmt.tag = le16(f + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1U);
    if (data != nullptr && have_fmt) break;
  }

  if (!have_fmt) throw ParseError("missing fmt chunk");
  if (data == nullptr) throw ParseError("missing data chunk");
  if (fmt.tag != kFormatPcm) throw UnsupportedFormat("only integer PCM is supported");
  if (fmt.bits != 16) {
    throw UnsupportedFormat("only 16-bit samples are supported, got " + std::to_string(fmt.bits));
  }
  if (fmt.channels != 1 && fmt.channels != 2) {
    throw UnsupportedFormat("only mono or stereo input is supported");
  }
  if (fmt.rate == 0) throw ParseError("zero sample rate");

  const std::size_t frame_bytes = 2U * fmt.channels;
  const std::size_t frames = data_len / frame_bytes;
  std::vector<double> samples(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const unsigned char* p = data + i * frame_bytes;
    if (fmt.channels == 1) {
      samples[i] = static_cast<std::int16_t>(le16(p)) / 32768.0;
    } else {
      const double l = static_cast<std::int16_t>(le16(p)) / 32768.0;
      const double r = static_cast<std::int16_t>(le16(p + 2)) / 32768.0;
      samples[i] = 0.5 * (l + r);
    }
  }
  return AudioClip(std::move(samples), static_cast<int>(fmt.rate));
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

std::vector<unsigned char> encode_wav(const AudioClip& clip) {
  const auto n = static_cast<std::uint32_t>(clip.size());
  const std::uint32_t data_len = n * 2U;
  std::vector<unsigned char> out;
  out.reserve(44 + data_len);
  put_tag(out, "RIFF");
  put32(out, 36 + data_len);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put32(out, 16);
  put16(out, kFormatPcm);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(clip.sample_rate()));
  put32(out, static_cast<std::uint32_t>(clip.sample_rate()) * 2U);
  put16(out, 2);
  put16(out, 16);
  put_tag(out, "data");
  put32(out, data_len);
  for (double s : clip.samples()) {
    const double scaled = std::round(s * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  const auto bytes = encode_wav(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

AudioClip resample(const AudioClip& clip, int target_hz) {
  if (target_hz <= 0) throw ParseError("target rate must be positive");
  if (target_hz == clip.sample_rate()) return clip;
  const std::size_t n_in = clip.size();
  const double ratio = static_cast<double>(clip.sample_rate()) / target_hz;
  const auto n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(n_in) * target_hz / clip.sample_rate()));
  std::vector<double> out(n_out);
  const auto in = clip.samples();
  for (std::size_t i = 0; i < n_out; ++i) {
    const double pos = static_cast<double>(i) * ratio;
    const auto k = static_cast<std::size_t>(pos);
    if (k + 1 >= n_in) {
      out[i] = n_in > 0 ? in[n_in - 1] : 0.0;
      continue;
    }
    const double frac = pos - static_cast<double>(k);
    out[i] = frac == 0.0 ? in[k] : in[k] + frac * (in[k + 1] - in[k]);
  }
  return AudioClip(std::move(out), target_hz);
}

}  // namespace disfluency
