#include "efr/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "efr/error.hpp"

namespace efr {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error("short write to " + path.string());
}

void BinaryWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void BinaryWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void BinaryWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

BinaryReader::BinaryReader(std::string data, std::string what)
    : data_(std::move(data)), what_(std::move(what)) {}

const char* BinaryReader::take(std::size_t n) {
  if (data_.size() - pos_ < n) throw FormatError("truncated " + what_);
  const char* p = data_.data() + pos_;
  pos_ += n;
  return p;
}

void BinaryReader::expect_magic(std::string_view four_cc) {
  if (data_.size() - pos_ < four_cc.size() ||
      std::string_view(data_.data() + pos_, four_cc.size()) != four_cc) {
    throw FormatError(what_ + ": bad magic, expected \"" + std::string(four_cc) + "\"");
  }
  pos_ += four_cc.size();
}

std::uint32_t BinaryReader::expect_version(std::uint32_t expected) {
  const auto v = u32();
  if (v != expected) {
    throw FormatError(what_ + ": unsupported format version " + std::to_string(v) +
                      " (expected " + std::to_string(expected) + ")");
  }
  return v;
}

std::uint32_t BinaryReader::u32() {
  const auto* p = reinterpret_cast<const unsigned char*>(take(4));
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t BinaryReader::u64() {
  const auto* p = reinterpret_cast<const unsigned char*>(take(8));
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

float BinaryReader::f32() { return std::bit_cast<float>(u32()); }
double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::str() {
  const auto n = u32();
  const char* p = take(n);
  return std::string(p, n);
}

}  // namespace efr
