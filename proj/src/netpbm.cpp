#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "fanet/error.hpp"
#include "fanet/image.hpp"

namespace fanet {

namespace {

/// Cursor over a netpbm header: whitespace and '#' comments between tokens.
class HeaderScanner {
 public:
  HeaderScanner(const std::string& bytes, std::size_t pos) : b_(bytes), pos_(pos) {}

  std::size_t pos() const { return pos_; }

  std::size_t number(const char* what) {
    while (pos_ < b_.size()) {
      const auto ch = static_cast<unsigned char>(b_[pos_]);
      if (ch == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(ch)) {
        ++pos_;
      } else {
        break;
      }
    }
    const std::size_t start = pos_;
    std::size_t v = 0;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(b_[pos_] - '0');
      if (v > (1u << 24)) throw ParseError(std::string("netpbm: ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("netpbm: expected ") + what, pos_);
    return v;
  }

  void whitespace(const char* after) {
    if (pos_ >= b_.size() || !std::isspace(static_cast<unsigned char>(b_[pos_]))) {
      throw ParseError(std::string("netpbm: expected whitespace after ") + after, pos_);
    }
    ++pos_;
  }

 private:
  const std::string& b_;
  std::size_t pos_;
};

}  // namespace

std::string encode_netpbm(char kind, std::size_t width, std::size_t height,
                          const std::vector<std::uint8_t>& payload) {
  const std::size_t per = kind == '6' ? 3 : 1;
  if (payload.size() != width * height * per) {
    throw DimensionError("netpbm payload size does not match " + std::to_string(width) + "x" +
                         std::to_string(height));
  }
  std::string out = std::string("P") + kind + "\n" + std::to_string(width) + " " +
                    std::to_string(height) + "\n255\n";
  out.append(payload.begin(), payload.end());
  return out;
}

NetpbmRaster decode_netpbm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw ParseError("netpbm: bad magic (expected P5 or P6)", 0);
  }
  NetpbmRaster r;
  r.kind = bytes[1];
  HeaderScanner scan(bytes, 2);
  if (bytes.size() <= 2 || !std::isspace(static_cast<unsigned char>(bytes[2]))) {
    throw ParseError("netpbm: expected whitespace after magic", 2);
  }
  r.width = scan.number("width");
  r.height = scan.number("height");
  const std::size_t maxval_pos = scan.pos();
  const std::size_t maxval = scan.number("maxval");
  if (r.width == 0 || r.height == 0) throw ParseError("netpbm: zero dimension", maxval_pos);
  if (maxval != 255) {
    throw ParseError("netpbm: unsupported maxval " + std::to_string(maxval), maxval_pos);
  }
  scan.whitespace("maxval");
  const std::size_t pos = scan.pos();
  r.header_bytes = pos;
  const std::size_t need = r.width * r.height * (r.kind == '6' ? 3 : 1);
  const std::size_t have = bytes.size() - pos;
  if (have < need) {
    throw ParseError("netpbm: truncated payload, expected " + std::to_string(need) +
                         " bytes but found " + std::to_string(have),
                     pos + have);
  }
  r.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return r;
}

std::uint8_t quantize_unit(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open file for reading: " + path.string());
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open file for writing: " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing file: " + path.string());
}

void ppm_write(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 3 && image.channels != 1) {
    throw DimensionError("ppm_write: image must have 1 or 3 channels");
  }
  std::vector<std::uint8_t> payload(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), payload.begin(), quantize_unit);
  write_file(path, encode_netpbm(image.channels == 3 ? '6' : '5', image.width, image.height, payload));
}

Image ppm_read(const std::filesystem::path& path) {
  const auto r = decode_netpbm(read_file(path));
  Image img(r.height, r.width, r.kind == '6' ? 3 : 1);
  for (std::size_t i = 0; i < r.payload.size(); ++i) img.pixels[i] = r.payload[i] / 255.0;
  return img;
}

void pgm_write(const std::filesystem::path& path, const LabelMap& mask) {
  write_file(path, encode_netpbm('5', mask.width, mask.height, mask.labels));
}

LabelMap pgm_read(const std::filesystem::path& path) {
  const auto r = decode_netpbm(read_file(path));
  if (r.kind != '5') throw ParseError("pgm_read: expected P5 mask", 0);
  LabelMap m(r.height, r.width);
  m.labels = r.payload;
  return m;
}

}  // namespace fanet
