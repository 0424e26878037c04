#include "cxhg/raster.hpp"

#include "binary_io.hpp"
#include "cxhg/error.hpp"

namespace cxhg {

namespace {
constexpr std::string_view kRasterMagic = "CXRS";
constexpr std::string_view kLabelMagic = "CXLB";
constexpr std::uint32_t kVersion = 1;

void expect_header(io::ByteReader& r, std::string_view magic, const char* context) {
  if (r.remaining() < 4 || r.bytes(4) != magic) {
    throw FormatError(FormatIssue::bad_magic, std::string(context) + ": bad magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw FormatError(FormatIssue::bad_version,
                      std::string(context) + ": bad version " + std::to_string(version));
  }
}
}  // namespace

RasterImage RasterImage::zeros(std::uint32_t width, std::uint32_t height,
                               std::uint32_t channels, PixelType type) {
  RasterImage img;
  img.width = width;
  img.height = height;
  img.channels = channels;
  const std::size_t n = std::size_t{width} * height * channels;
  if (type == PixelType::u8) {
    img.data = std::vector<std::uint8_t>(n, 0);
  } else {
    img.data = std::vector<float>(n, 0.0f);
  }
  return img;
}

LabelMap LabelMap::filled(std::uint32_t width, std::uint32_t height, std::uint8_t value) {
  LabelMap m;
  m.width = width;
  m.height = height;
  m.data.assign(std::size_t{width} * height, value);
  return m;
}

std::vector<std::uint8_t> encode_raster(const RasterImage& image) {
  const std::size_t expected = image.size();
  const std::size_t actual = image.type() == PixelType::u8 ? image.u8().size() : image.f32().size();
  if (expected != actual) {
    throw Error(ErrorCode::shape, "raster: data length does not match width*height*channels");
  }
  io::ByteWriter w;
  w.bytes(kRasterMagic);
  w.u32(kVersion);
  w.u32(image.width);
  w.u32(image.height);
  w.u32(image.channels);
  w.u8(static_cast<std::uint8_t>(image.type()));
  w.u8(0);
  w.u8(0);
  w.u8(0);
  if (image.type() == PixelType::u8) {
    w.raw(image.u8());
  } else {
    for (float v : image.f32()) w.f32(v);
  }
  return std::move(w.buffer());
}

RasterImage decode_raster(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "raster");
  expect_header(r, kRasterMagic, "raster");
  RasterImage img;
  img.width = r.u32();
  img.height = r.u32();
  img.channels = r.u32();
  const std::uint8_t dtype = r.u8();
  r.raw(3);
  if (dtype > 1) {
    throw FormatError(FormatIssue::bad_value, "raster: unknown dtype " + std::to_string(dtype));
  }
  const std::size_t n = img.size();
  if (dtype == 0) {
    auto payload = r.raw(n);
    img.data = std::vector<std::uint8_t>(payload.begin(), payload.end());
  } else {
    r.need(n * 4);
    std::vector<float> v(n);
    for (auto& x : v) x = r.f32();
    img.data = std::move(v);
  }
  if (r.remaining() != 0) throw FormatError(FormatIssue::bad_value, "raster: trailing bytes");
  return img;
}

std::vector<std::uint8_t> encode_labels(const LabelMap& labels) {
  if (labels.data.size() != std::size_t{labels.width} * labels.height) {
    throw Error(ErrorCode::shape, "labels: data length does not match width*height");
  }
  io::ByteWriter w;
  w.bytes(kLabelMagic);
  w.u32(kVersion);
  w.u32(labels.width);
  w.u32(labels.height);
  w.raw(labels.data);
  return std::move(w.buffer());
}

LabelMap decode_labels(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "labels");
  expect_header(r, kLabelMagic, "labels");
  LabelMap m;
  m.width = r.u32();
  m.height = r.u32();
  auto payload = r.raw(std::size_t{m.width} * m.height);
  m.data.assign(payload.begin(), payload.end());
  if (r.remaining() != 0) throw FormatError(FormatIssue::bad_value, "labels: trailing bytes");
  return m;
}

void write_raster(const RasterImage& image, const std::string& path) {
  io::write_file(path, encode_raster(image));
}

RasterImage read_raster(const std::string& path) { return decode_raster(io::read_file(path)); }

void write_labels(const LabelMap& labels, const std::string& path) {
  io::write_file(path, encode_labels(labels));
}

LabelMap read_labels(const std::string& path) { return decode_labels(io::read_file(path)); }

}  // namespace cxhg
