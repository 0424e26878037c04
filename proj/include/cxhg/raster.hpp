#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cxhg/labels.hpp"

namespace cxhg {

enum class PixelType : std::uint8_t { u8 = 0, f32 = 1 };

/// Planar multi-channel image: channel 0 row-major, then channel 1, ...
struct RasterImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t channels = 0;
  std::variant<std::vector<std::uint8_t>, std::vector<float>> data;

  static RasterImage zeros(std::uint32_t width, std::uint32_t height, std::uint32_t channels,
                           PixelType type);

  PixelType type() const { return data.index() == 0 ? PixelType::u8 : PixelType::f32; }
  std::size_t plane_size() const { return std::size_t{width} * height; }
  std::size_t size() const { return plane_size() * channels; }

  std::span<std::uint8_t> u8() { return std::get<std::vector<std::uint8_t>>(data); }
  std::span<const std::uint8_t> u8() const { return std::get<std::vector<std::uint8_t>>(data); }
  std::span<float> f32() { return std::get<std::vector<float>>(data); }
  std::span<const float> f32() const { return std::get<std::vector<float>>(data); }

  bool operator==(const RasterImage&) const = default;
};

struct LabelMap {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> data;  // row-major class ids, kIgnoreIndex for padding

  static LabelMap filled(std::uint32_t width, std::uint32_t height, std::uint8_t value);

  std::uint8_t& at(std::size_t y, std::size_t x) { return data[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return data[y * width + x]; }

  bool operator==(const LabelMap&) const = default;
};

// CXRS: "CXRS" | version u32 = 1 | width u32 | height u32 | channels u32 |
//       dtype u8 (0 = u8, 1 = f32) | 3 zero bytes | planar data (little-endian)
// CXLB: "CXLB" | version u32 = 1 | width u32 | height u32 | row-major u8 data
inline constexpr std::size_t kRasterHeaderBytes = 24;
inline constexpr std::size_t kLabelHeaderBytes = 16;

std::vector<std::uint8_t> encode_raster(const RasterImage& image);
RasterImage decode_raster(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_labels(const LabelMap& labels);
LabelMap decode_labels(std::span<const std::uint8_t> bytes);

void write_raster(const RasterImage& image, const std::string& path);
RasterImage read_raster(const std::string& path);
void write_labels(const LabelMap& labels, const std::string& path);
LabelMap read_labels(const std::string& path);

}  // namespace cxhg
