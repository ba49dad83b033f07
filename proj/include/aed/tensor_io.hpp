#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace aed {

/// Dense row-major f64 tensor as stored on disk.
struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;

  std::uint64_t element_count() const;
};

/// Layout: u32 rank, u64 dims[rank], then row-major little-endian f64 payload.
void write_tensor(const Tensor& tensor, const std::filesystem::path& path);
Tensor read_tensor(const std::filesystem::path& path);

// Little-endian primitives shared with the checkpoint writer.
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v);
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f64(std::vector<std::uint8_t>& out, double v);

/// Bounds-checked little-endian reader; `truncated()` latches on overrun.
class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return truncated_ ? 0 : bytes_.size() - pos_; }
  bool truncated() const { return truncated_; }

 private:
  bool take(std::size_t n);

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
  bool truncated_ = false;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path);

}  // namespace aed
