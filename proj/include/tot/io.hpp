#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "tot/tensor.hpp"

namespace tot {

// CRC-32 (IEEE 802.3, reflected, poly 0xEDB88320), the trailing checksum of
// the TOTD / TOTC container formats.
std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);

// Little-endian binary writer that folds every byte into a running CRC so the
// trailer can be emitted without re-reading the file.
class BinWriter {
 public:
  explicit BinWriter(const std::string& path);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v);
  void f64(double v);
  void bytes(const void* p, std::size_t len);
  void str(const std::string& s);  // u32 length + bytes
  void f64_block(const std::vector<double>& v);
  std::uint32_t crc() const { return crc_; }
  // Writes the CRC trailer and closes; throws IoError on stream failure.
  void finish();

 private:
  std::ofstream out_;
  std::string path_;
  std::uint32_t crc_ = 0;
};

class BinReader {
 public:
  explicit BinReader(const std::string& path);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  double f64();
  void bytes(void* p, std::size_t len);
  std::string str(std::size_t max_len = 1u << 20);
  std::vector<double> f64_block(std::size_t count);
  std::uint32_t crc() const { return crc_; }
  // Reads the trailer (not folded into the CRC) and compares; throws IoError
  // on mismatch or trailing garbage.
  void check_crc_trailer();

 private:
  std::ifstream in_;
  std::string path_;
  std::uint32_t crc_ = 0;
};

// FNV-1a 64 over a file's bytes; the RunManifest content fingerprint.
std::uint64_t file_fingerprint(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Round-trip float formatting shared by all CSV/JSON emitters.
std::string fmt_double(double v);

}  // namespace tot
