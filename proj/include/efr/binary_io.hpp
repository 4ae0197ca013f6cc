#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace efr {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view data);

/// Little-endian serializer into an in-memory buffer.
class BinaryWriter {
 public:
  void magic(std::string_view four_cc) { buf_.append(four_cc); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  /// u32 byte length followed by the raw bytes.
  void str(std::string_view s);

  const std::string& data() const { return buf_; }
  void save(const std::filesystem::path& path) const { write_file(path, buf_); }

 private:
  std::string buf_;
};

/// Little-endian deserializer; every read past the end throws FormatError.
class BinaryReader {
 public:
  BinaryReader(std::string data, std::string what);

  /// Throws FormatError naming `what` when the magic does not match.
  void expect_magic(std::string_view four_cc);
  /// Throws FormatError if the stored version differs from `expected`.
  std::uint32_t expect_version(std::uint32_t expected);
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string str();

  bool at_end() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  const char* take(std::size_t n);

  std::string data_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace efr
