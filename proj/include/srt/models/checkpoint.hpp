#pragma once

#include <srt/datasets/io.hpp>
#include <srt/errors.hpp>
#include <srt/numerics.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace srt {

// Layout: "SRTW" | version (1 byte) | length (uint64 LE) | length x float64 LE.
inline constexpr std::uint8_t checkpoint_version = 1;

namespace detail {

inline void put_u64_le(Bytes& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

inline std::uint64_t get_u64_le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
  return v;
}

}  // namespace detail

inline Bytes encode_checkpoint(const DenseVector& w) {
  Bytes out{'S', 'R', 'T', 'W', checkpoint_version};
  out.reserve(13 + 8 * w.size());
  detail::put_u64_le(out, w.size());
  for (double v : w) detail::put_u64_le(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

inline DenseVector decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 13 || std::memcmp(bytes.data(), "SRTW", 4) != 0) {
    throw FormatError("checkpoint: missing SRTW magic");
  }
  if (bytes[4] != checkpoint_version) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(bytes[4]));
  }
  const std::uint64_t n = detail::get_u64_le(bytes.data() + 5);
  const std::uint64_t expected = 13 + 8 * n;
  if (n == 0 || n > (bytes.size() - 13) / 8 || bytes.size() != expected) {
    throw FormatError("checkpoint: header promises " + std::to_string(n) + " values (" + std::to_string(expected) +
                      " bytes), got " + std::to_string(bytes.size()) + " bytes");
  }
  std::vector<double> values(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    values[i] = std::bit_cast<double>(detail::get_u64_le(bytes.data() + 13 + 8 * i));
  }
  return DenseVector(std::move(values));
}

inline void save_checkpoint(const std::filesystem::path& path, const DenseVector& w) {
  write_file(path, encode_checkpoint(w));
}

inline DenseVector load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_raw_file(path)); }

}  // namespace srt
