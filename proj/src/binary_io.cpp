#include "chaosot/binary_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "chaosot/error.hpp"

namespace chaosot::io {

namespace {

template <typename U>
void put_le(Bytes& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void put_u8(Bytes& out, std::uint8_t v) { out.push_back(v); }
void put_u16(Bytes& out, std::uint16_t v) { put_le(out, v); }
void put_u32(Bytes& out, std::uint32_t v) { put_le(out, v); }
void put_u64(Bytes& out, std::uint64_t v) { put_le(out, v); }
void put_f64(Bytes& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

const std::uint8_t* Reader::take(std::size_t n) {
  if (remaining() < n) throw FormatError(what_ + ": truncated file");
  const auto* p = bytes_.data() + pos_;
  pos_ += n;
  return p;
}

std::uint8_t Reader::u8() { return *take(1); }
std::uint16_t Reader::u16() { return get_le<std::uint16_t>(take(2)); }
std::uint32_t Reader::u32() { return get_le<std::uint32_t>(take(4)); }
std::uint64_t Reader::u64() { return get_le<std::uint64_t>(take(8)); }
double Reader::f64() { return std::bit_cast<double>(get_le<std::uint64_t>(take(8))); }

void Reader::expect_magic(const char (&magic)[5]) {
  const auto* p = take(4);
  if (std::memcmp(p, magic, 4) != 0) throw FormatError(what_ + ": bad magic (expected " + std::string(magic) + ")");
}

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::string& path, const Bytes& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + tmp + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw FormatError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
  }
}

void write_text_atomic(const std::string& path, const std::string& text) {
  write_file_atomic(path, Bytes(text.begin(), text.end()));
}

}  // namespace chaosot::io
