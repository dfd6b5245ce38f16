#include "fanet/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <limits>

#include "fanet/error.hpp"

namespace fanet {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(std::string("checkpoint truncated while reading ") + what, bytes_.size());
    }
  }

  std::uint64_t uint(std::size_t width, const char* what) {
    need(width, what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += width;
    return v;
  }

  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const NamedTensors& tensors) {
  std::string out = "FANT";
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw ValidationError("checkpoint tensor name too long: " + name.substr(0, 64));
    }
    if (t.rank() > 255) throw ValidationError("checkpoint tensor rank too large: " + name);
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    out.push_back(static_cast<char>(t.rank()));
    for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (const float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

NamedTensors decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.take(4, "magic") != "FANT") throw ParseError("bad checkpoint magic", 0);
  const auto version = r.uint(4, "version");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 4);
  }
  const auto count = r.uint(4, "tensor count");
  NamedTensors out;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name_len = r.uint(2, "name length");
    std::string name = r.take(name_len, "name");
    const auto rank = r.uint(1, "rank");
    Shape shape;
    for (std::uint64_t d = 0; d < rank; ++d) shape.push_back(r.uint(4, "dimension"));
    const std::size_t n = shape_numel(shape);
    r.need(4 * n, "payload");
    std::vector<float> values(n);
    for (auto& v : values) v = std::bit_cast<float>(static_cast<std::uint32_t>(r.uint(4, "payload")));
    out.emplace_back(std::move(name), Tensor<float>(std::move(shape), std::move(values)));
  }
  if (r.offset() != bytes.size()) throw ParseError("trailing bytes after checkpoint", r.offset());
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors) {
  const std::string bytes = encode_checkpoint(tensors);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace fanet
