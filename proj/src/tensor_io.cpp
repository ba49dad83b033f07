#include "aed/tensor_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "aed/util.hpp"

namespace aed {

std::uint64_t Tensor::element_count() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

bool ByteReader::take(std::size_t n) {
  if (truncated_ || bytes_.size() - pos_ < n) {
    truncated_ = true;
    return false;
  }
  return true;
}

std::uint8_t ByteReader::u8() {
  if (!take(1)) return 0;
  return bytes_[pos_++];
}

std::uint16_t ByteReader::u16() {
  if (!take(2)) return 0;
  std::uint16_t v = 0;
  for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(bytes_[pos_++]) << (8 * i);
  return v;
}

std::uint32_t ByteReader::u32() {
  if (!take(4)) return 0;
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  if (!take(8)) return 0;
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void write_tensor(const Tensor& tensor, const std::filesystem::path& path) {
  if (tensor.element_count() != tensor.data.size()) {
    throw DataError("tensor payload does not match its dimensions");
  }
  std::vector<std::uint8_t> bytes;
  bytes.reserve(4 + 8 * tensor.dims.size() + 8 * tensor.data.size());
  put_u32(bytes, static_cast<std::uint32_t>(tensor.dims.size()));
  for (auto d : tensor.dims) put_u64(bytes, d);
  for (double v : tensor.data) put_f64(bytes, v);
  write_file_bytes(bytes, path);
}

Tensor read_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader in(bytes);
  Tensor t;
  const auto rank = in.u32();
  for (std::uint32_t i = 0; i < rank && !in.truncated(); ++i) t.dims.push_back(in.u64());
  if (in.truncated()) throw DataError("truncated tensor header: " + path.string());
  const auto n = t.element_count();
  if (in.remaining() != n * 8) {
    throw DataError("tensor payload size mismatch in " + path.string());
  }
  t.data.resize(n);
  for (auto& v : t.data) v = in.f64();
  return t;
}

}  // namespace aed
