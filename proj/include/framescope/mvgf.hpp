#pragma once

// MVGF tensor container, little-endian, no padding:
//
//   offset  size      field
//   0       4         magic "MVGF"
//   4       4         format version, u32 (= 1)
//   8       1         dtype code, u8 (1 = f32, 2 = f64)
//   9       1         rank, u8 (>= 1)
//   10      8*rank    dimension sizes, u64 each
//   ...     n*size    payload, row-major, n = product of dimensions
//
// Reads reject, with distinct error types: wrong magic (BadMagicError),
// unknown version (UnsupportedVersionError), unknown dtype (BadDtypeError),
// short header or payload (TruncatedError), zero or overflowing dimensions
// (DimensionOverflowError), and bytes after the payload (TrailingDataError).

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "framescope/tensor.hpp"

namespace framescope {

inline constexpr std::uint32_t kMvgfVersion = 1;

template <Real T>
std::vector<std::uint8_t> encode_mvgf(const Tensor<T>& t);
std::vector<std::uint8_t> encode_mvgf(const AnyTensor& t);
AnyTensor decode_mvgf(std::span<const std::uint8_t> bytes);

void write_features(const std::filesystem::path& path, const AnyTensor& t);
template <Real T>
void write_features(const std::filesystem::path& path, const Tensor<T>& t) {
  write_features(path, AnyTensor(t));
}

AnyTensor read_features(const std::filesystem::path& path);

// Reads and requires a specific dtype.
template <Real T>
Tensor<T> read_features_as(const std::filesystem::path& path);

}  // namespace framescope
