// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace disfluency {

/// Little-endian writer over a growable byte buffer.
class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  /// rows, cols, then row-major f64 values.
  void matrix(const Eigen::Ref<const Eigen::MatrixXd>& m);

  const std::vector<unsigned char>& buffer() const { return buf_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<unsigned char> buf_;
};

/// Bounds-checked reader; throws ParseError on truncation.
class ByteReader {
 public:
  explicit ByteReader(std::vector<unsigned char> bytes) : buf_(std::move(bytes)) {}
  static ByteReader load(const std::filesystem::path& path);

  std::string bytes(std::size_t n);
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  Eigen::MatrixXd matrix();
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  const unsigned char* take(std::size_t n);
  std::vector<unsigned char> buf_;
  std::size_t pos_ = 0;
};

/// 64-bit FNV-1a digest, printed as 16 hex digits.
std::uint64_t fnv1a64(std::span<const unsigned char> data);
std::string digest_hex(std::span<const unsigned char> data);
std::string file_digest(const std::filesystem::path& path);

}  // namespace disfluency

namespace disfluency {

/// Shared header of every model checkpoint.
inline constexpr std::string_view kCheckpointMagic = "DFCKPT01";

enum class CheckpointKind : std::uint32_t { crnn = 1, silence_classifier = 2 };

void write_checkpoint_header(ByteWriter& w, CheckpointKind kind, std::uint32_t version);
/// Throws ParseError on a bad magic or kind, VersionMismatch on a version
/// other than `version`.
void read_checkpoint_header(ByteReader& r, CheckpointKind kind, std::uint32_t version);

}  // namespace disfluency
