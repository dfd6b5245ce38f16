#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fanet {

/// Interleaved (row, column, channel) image with values nominally in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

  bool empty() const { return pixels.empty(); }
  double& at(std::size_t y, std::size_t x, std::size_t c = 0) {
    return pixels[(y * width + x) * channels + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c = 0) const {
    return pixels[(y * width + x) * channels + c];
  }
};

/// Per-pixel class ids, row-major.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> labels;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::uint8_t fill = 0)
      : height(h), width(w), labels(h * w, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
};

// Binary netpbm codecs (P6 colour, P5 grey), maxval 255.

struct NetpbmRaster {
  char kind = '6';  // '5' or '6'
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t header_bytes = 0;
  std::vector<std::uint8_t> payload;
};

std::string encode_netpbm(char kind, std::size_t width, std::size_t height,
                          const std::vector<std::uint8_t>& payload);
/// Validates magic, dimensions, maxval and payload length; errors are
/// ParseError with the byte offset of the problem.
NetpbmRaster decode_netpbm(const std::string& bytes);

std::uint8_t quantize_unit(double v);

void ppm_write(const std::filesystem::path& path, const Image& image);
/// Reads P6 (3 channels) or P5 (1 channel) into an Image scaled by 1/255.
Image ppm_read(const std::filesystem::path& path);

void pgm_write(const std::filesystem::path& path, const LabelMap& mask);
LabelMap pgm_read(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace fanet
