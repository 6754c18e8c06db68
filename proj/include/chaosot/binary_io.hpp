#pragma once

// Little-endian byte encoding helpers shared by the file formats.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace chaosot::io {

using Bytes = std::vector<std::uint8_t>;

void put_u8(Bytes& out, std::uint8_t v);
void put_u16(Bytes& out, std::uint16_t v);
void put_u32(Bytes& out, std::uint32_t v);
void put_u64(Bytes& out, std::uint64_t v);
void put_f64(Bytes& out, double v);

/// Sequential reader that throws FormatError on truncation.
class Reader {
 public:
  Reader(const Bytes& bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  void expect_magic(const char (&magic)[5]);
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  const std::uint8_t* take(std::size_t n);
  const Bytes& bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

Bytes read_file(const std::string& path);
/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::string& path, const Bytes& bytes);
void write_text_atomic(const std::string& path, const std::string& text);

}  // namespace chaosot::io
