#include "tot/io.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "tot/common.hpp"
#include "tot/rng.hpp"

namespace tot {

namespace {
std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> t{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    t[i] = c;
  }
  return t;
}
const std::array<std::uint32_t, 256> kCrcTable = make_crc_table();
}  // namespace

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed) {
  std::uint32_t c = seed ^ 0xFFFFFFFFu;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i)
    c = kCrcTable[(c ^ p[i]) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

BinWriter::BinWriter(const std::string& path)
    : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw IoError("cannot open for writing: " + path);
}

void BinWriter::bytes(const void* p, std::size_t len) {
  out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(len));
  crc_ = crc32(p, len, crc_);
}

void BinWriter::u8(std::uint8_t v) { bytes(&v, 1); }

void BinWriter::u32(std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  bytes(b, 4);
}

void BinWriter::u64(std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  bytes(b, 8);
}

void BinWriter::i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }

void BinWriter::f64(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  u64(bits);
}

void BinWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes(s.data(), s.size());
}

void BinWriter::f64_block(const std::vector<double>& v) {
  for (double x : v) f64(x);
}

void BinWriter::finish() {
  const std::uint32_t c = crc_;
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(c >> (8 * i));
  out_.write(reinterpret_cast<const char*>(b), 4);
  out_.flush();
  if (!out_) throw IoError("write failure: " + path_);
  out_.close();
}

BinReader::BinReader(const std::string& path)
    : in_(path, std::ios::binary), path_(path) {
  if (!in_) throw IoError("cannot open for reading: " + path);
}

void BinReader::bytes(void* p, std::size_t len) {
  in_.read(static_cast<char*>(p), static_cast<std::streamsize>(len));
  if (static_cast<std::size_t>(in_.gcount()) != len)
    throw IoError("truncated file: " + path_);
  crc_ = crc32(p, len, crc_);
}

std::uint8_t BinReader::u8() {
  std::uint8_t v;
  bytes(&v, 1);
  return v;
}

std::uint32_t BinReader::u32() {
  unsigned char b[4];
  bytes(b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t BinReader::u64() {
  unsigned char b[8];
  bytes(b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::int64_t BinReader::i64() { return static_cast<std::int64_t>(u64()); }

double BinReader::f64() {
  const std::uint64_t bits = u64();
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::string BinReader::str(std::size_t max_len) {
  const std::uint32_t len = u32();
  if (len > max_len) throw IoError("string length out of range: " + path_);
  std::string s(len, '\0');
  if (len) bytes(s.data(), len);
  return s;
}

std::vector<double> BinReader::f64_block(std::size_t count) {
  std::vector<double> v(count);
  for (auto& x : v) x = f64();
  return v;
}

void BinReader::check_crc_trailer() {
  const std::uint32_t computed = crc_;
  unsigned char b[4];
  in_.read(reinterpret_cast<char*>(b), 4);
  if (in_.gcount() != 4) throw IoError("truncated file (missing checksum): " + path_);
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  if (stored != computed)
    throw IoError("checksum mismatch in " + path_);
  in_.peek();
  if (!in_.eof()) throw IoError("trailing bytes after checksum in " + path_);
}

std::uint64_t file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for fingerprint: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a64(ss.str());
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("write failure: " + path);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace tot
