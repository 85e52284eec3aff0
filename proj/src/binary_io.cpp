// SPDX-License-Identifier: Apache-2.0
#include "disfluency/binary_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "disfluency/errors.hpp"

namespace disfluency {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

void ByteWriter::u32(std::uint32_t v) {
  const auto* p = reinterpret_cast<const unsigned char*>(&v);
  buf_.insert(buf_.end(), p, p + sizeof v);
}

void ByteWriter::u64(std::uint64_t v) {
  const auto* p = reinterpret_cast<const unsigned char*>(&v);
  buf_.insert(buf_.end(), p, p + sizeof v);
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::matrix(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  u32(static_cast<std::uint32_t>(m.rows()));
  u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
}

void ByteWriter::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

ByteReader ByteReader::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return ByteReader(std::vector<unsigned char>((std::istreambuf_iterator<char>(in)),
                                               std::istreambuf_iterator<char>()));
}

const unsigned char* ByteReader::take(std::size_t n) {
  if (n > buf_.size() - pos_) throw ParseError("unexpected end of binary data");
  const unsigned char* p = buf_.data() + pos_;
  pos_ += n;
  return p;
}

std::string ByteReader::bytes(std::size_t n) {
  const auto* p = take(n);
  return std::string(reinterpret_cast<const char*>(p), n);
}

std::uint32_t ByteReader::u32() {
  std::uint32_t v;
  std::memcpy(&v, take(sizeof v), sizeof v);
  return v;
}

std::uint64_t ByteReader::u64() {
  std::uint64_t v;
  std::memcpy(&v, take(sizeof v), sizeof v);
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

Eigen::MatrixXd ByteReader::matrix() {
  const std::uint32_t rows = u32();
  const std::uint32_t cols = u32();
  if (static_cast<std::uint64_t>(rows) * cols * 8 > buf_.size() - pos_) {
    throw ParseError("matrix extends past end of binary data");
  }
  Eigen::MatrixXd m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = f64();
  return m;
}

std::uint64_t fnv1a64(std::span<const unsigned char> data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : data) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string digest_hex(std::span<const unsigned char> data) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(data)));
  return buf;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return digest_hex(bytes);
}

}  // namespace disfluency

namespace disfluency {

void write_checkpoint_header(ByteWriter& w, CheckpointKind kind, std::uint32_t version) {
  w.bytes(kCheckpointMagic);
  w.u32(static_cast<std::uint32_t>(kind));
  w.u32(version);
}

void read_checkpoint_header(ByteReader& r, CheckpointKind kind, std::uint32_t version) {
  if (r.bytes(kCheckpointMagic.size()) != kCheckpointMagic) throw ParseError("not a checkpoint file");
  const std::uint32_t k = r.u32();
  if (k != static_cast<std::uint32_t>(kind)) {
    throw ParseError("checkpoint holds model kind " + std::to_string(k) + ", expected " +
                     std::to_string(static_cast<std::uint32_t>(kind)));
  }
  const std::uint32_t v = r.u32();
  if (v != version) {
    throw VersionMismatch("checkpoint format version " + std::to_string(v) + " is not supported (expected " +
                          std::to_string(version) + ")");
  }
}

}  // namespace disfluency
