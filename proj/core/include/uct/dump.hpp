#pragma once

// Raw element dump: 16-byte header followed by little-endian float64 values.
//
//   bytes 0..3    magic "UCT0"
//   bytes 4..7    u32 rows   (little-endian)
//   bytes 8..11   u32 cols   (little-endian)
//   bytes 12..15  reserved, zero
//   bytes 16..    rows * cols float64, row-major
//
// Images are stored as (ny, nx), sinograms as (n_angles, n_detectors).

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "uct/space.hpp"

namespace uct {

struct RawArray {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<double> values;
};

void write_dump(const std::filesystem::path& path, std::uint32_t rows, std::uint32_t cols,
                std::span<const double> values);
RawArray read_dump(const std::filesystem::path& path);

void write_dump(const std::filesystem::path& path, const Image& image);
void write_dump(const std::filesystem::path& path, const Sinogram& sinogram);

/// Reads a dump and checks it against the expected grid / geometry.
Image read_image_dump(const std::filesystem::path& path, const ImageGrid& grid);
Sinogram read_sinogram_dump(const std::filesystem::path& path, const ParallelGeometry& geometry);

/// FNV-1a over the raw bytes of the values; used to assert that different
/// methods consume byte-identical fixtures.
std::uint64_t fixture_hash(std::span<const double> values);

}  // namespace uct
