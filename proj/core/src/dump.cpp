#include "uct/dump.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "uct/errors.hpp"

namespace uct {

namespace {

constexpr std::array<char, 4> kMagic = {'U', 'C', 'T', '0'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t to_le(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((bits >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
  return bits;
}

}  // namespace

void write_dump(const std::filesystem::path& path, std::uint32_t rows, std::uint32_t cols,
                std::span<const double> values) {
  if (static_cast<std::size_t>(rows) * cols != values.size())
    throw ShapeError("dump shape " + std::to_string(rows) + "x" + std::to_string(cols) + " does not match " +
                     std::to_string(values.size()) + " values");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), 4);
  put_u32(out, rows);
  put_u32(out, cols);
  put_u32(out, 0);
  std::vector<std::uint64_t> buffer(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) buffer[i] = to_le(std::bit_cast<std::uint64_t>(values[i]));
  out.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(buffer.size() * 8));
  if (!out) throw IoError("failed writing " + path.string());
}

RawArray read_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  unsigned char header[16];
  in.read(reinterpret_cast<char*>(header), 16);
  if (in.gcount() != 16 || std::memcmp(header, kMagic.data(), 4) != 0)
    throw IoError(path.string() + " is not a UCT0 dump");
  RawArray out;
  out.rows = get_u32(header + 4);
  out.cols = get_u32(header + 8);
  const std::size_t n = static_cast<std::size_t>(out.rows) * out.cols;
  std::vector<std::uint64_t> buffer(n);
  in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(n * 8));
  if (static_cast<std::size_t>(in.gcount()) != n * 8) throw IoError(path.string() + " is truncated");
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = std::bit_cast<double>(to_le(buffer[i]));
  return out;
}

void write_dump(const std::filesystem::path& path, const Image& image) {
  write_dump(path, static_cast<std::uint32_t>(image.grid.ny), static_cast<std::uint32_t>(image.grid.nx),
             image.values);
}

void write_dump(const std::filesystem::path& path, const Sinogram& sinogram) {
  write_dump(path, static_cast<std::uint32_t>(sinogram.geometry.n_angles()),
             static_cast<std::uint32_t>(sinogram.geometry.n_detectors), sinogram.values);
}

Image read_image_dump(const std::filesystem::path& path, const ImageGrid& grid) {
  RawArray raw = read_dump(path);
  if (raw.rows != static_cast<std::uint32_t>(grid.ny) || raw.cols != static_cast<std::uint32_t>(grid.nx))
    throw ShapeError(path.string() + ": dump is " + std::to_string(raw.rows) + "x" + std::to_string(raw.cols) +
                     ", grid expects " + std::to_string(grid.ny) + "x" + std::to_string(grid.nx));
  return Image(grid, std::move(raw.values));
}

Sinogram read_sinogram_dump(const std::filesystem::path& path, const ParallelGeometry& geometry) {
  RawArray raw = read_dump(path);
  if (raw.rows != static_cast<std::uint32_t>(geometry.n_angles()) ||
      raw.cols != static_cast<std::uint32_t>(geometry.n_detectors))
    throw ShapeError(path.string() + ": dump is " + std::to_string(raw.rows) + "x" + std::to_string(raw.cols) +
                     ", geometry expects " + std::to_string(geometry.n_angles()) + "x" +
                     std::to_string(geometry.n_detectors));
  return Sinogram(geometry, std::move(raw.values));
}

std::uint64_t fixture_hash(std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) {
    const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(v));
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace uct
