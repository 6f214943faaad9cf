#include "binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "lod/error.hpp"

namespace lod::io {

namespace {

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

template <typename T>
T load_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void ByteWriter::put_magic(std::string_view magic) {
  bytes_.insert(bytes_.end(), magic.begin(), magic.end());
}
void ByteWriter::put_u16(std::uint16_t v) { append_le(bytes_, v); }
void ByteWriter::put_u32(std::uint32_t v) { append_le(bytes_, v); }
void ByteWriter::put_u64(std::uint64_t v) { append_le(bytes_, v); }
void ByteWriter::put_f32(float v) { append_le(bytes_, std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::put_f64(double v) { append_le(bytes_, std::bit_cast<std::uint64_t>(v)); }

void ByteReader::require(std::size_t n) const {
  if (remaining() < n) {
    fail(ErrorKind::Format, context_ + ": truncated payload (need " + std::to_string(n) +
                                " bytes at offset " + std::to_string(pos_) + ", have " +
                                std::to_string(remaining()) + ")");
  }
}

void ByteReader::expect_magic(std::string_view magic) {
  require(magic.size());
  if (std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) != 0) {
    fail(ErrorKind::Format, context_ + ": bad magic, expected '" + std::string(magic) + "'");
  }
  pos_ += magic.size();
}

std::uint8_t ByteReader::u8() {
  require(1);
  return bytes_[pos_++];
}

std::uint16_t ByteReader::u16() {
  require(2);
  auto v = load_le<std::uint16_t>(bytes_.data() + pos_);
  pos_ += 2;
  return v;
}

std::uint32_t ByteReader::u32() {
  require(4);
  auto v = load_le<std::uint32_t>(bytes_.data() + pos_);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  require(8);
  auto v = load_le<std::uint64_t>(bytes_.data() + pos_);
  pos_ += 8;
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail(ErrorKind::MissingInput, "cannot open " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<std::uint8_t> bytes(size);
  in.seekg(0);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    fail(ErrorKind::Format, "short read on " + path.string());
  }
  return bytes;
}

namespace {

std::filesystem::path temp_sibling(const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  return tmp;
}

void commit(const std::filesystem::path& tmp, const std::filesystem::path& path) {
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::InvalidArgument, "cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::InvalidArgument, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::InvalidArgument, "write failed on " + tmp.string());
  }
  commit(tmp, path);
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

}  // namespace lod::io
