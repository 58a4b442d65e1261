#include "repshare/npy.hpp"

#include "repshare/error.hpp"
#include "repshare/io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <regex>

namespace repshare {

namespace {

constexpr std::array<char, 6> kMagic = {'\x93', 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kPrefixBytes = 10;  // magic + version + u16 header length
constexpr std::size_t kAlignment = 64;

std::string shape_literal(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  if (shape.size() == 1) out += ',';
  return out + ")";
}

void put_u32_le(char* dst, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) dst[b] = static_cast<char>((v >> (8 * b)) & 0xffu);
}

std::uint32_t get_u32_le(const char* src) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(src[b])) << (8 * b);
  return v;
}

struct Header {
  Shape shape;
  std::size_t data_offset = 0;
};

Header parse_header(std::string_view bytes, const std::string& ctx) {
  if (bytes.size() < kPrefixBytes || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw FormatError(ctx + "missing NPY magic");
  }
  if (bytes[6] != '\x01' || bytes[7] != '\x00') {
    throw FormatError(ctx + "only NPY version 1.0 is supported");
  }
  const std::size_t header_len =
      static_cast<unsigned char>(bytes[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (bytes.size() < kPrefixBytes + header_len) throw FormatError(ctx + "truncated NPY header");
  const std::string header(bytes.substr(kPrefixBytes, header_len));
  if (header.empty() || header.back() != '\n') throw FormatError(ctx + "NPY header not terminated by newline");

  static const std::regex dict_re(
      R"(^\{\s*'descr'\s*:\s*'([^']*)'\s*,\s*'fortran_order'\s*:\s*(True|False)\s*,\s*'shape'\s*:\s*\(([^)]*)\)\s*,?\s*\}\s*\n$)");
  std::smatch m;
  if (!std::regex_match(header, m, dict_re)) throw FormatError(ctx + "malformed NPY header: " + header);
  if (m[1] != "<f4") throw UnsupportedDtype(ctx + "dtype '" + m[1].str() + "' (only '<f4' is supported)");
  if (m[2] == "True") throw UnsupportedLayout(ctx + "fortran_order=True (only C order is supported)");

  Header h;
  static const std::regex dim_re(R"(\s*(\d+)\s*)");
  const std::string dims = m[3];
  std::size_t start = 0;
  while (start < dims.size()) {
    auto comma = dims.find(',', start);
    std::string item = dims.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    start = comma == std::string::npos ? dims.size() : comma + 1;
    if (item.find_first_not_of(" \t") == std::string::npos) {
      if (start < dims.size()) throw FormatError(ctx + "empty dimension in NPY shape");
      break;
    }
    std::smatch dm;
    if (!std::regex_match(item, dm, dim_re)) throw FormatError(ctx + "bad dimension '" + item + "' in NPY shape");
    h.shape.push_back(std::stoull(dm[1]));
  }
  if (h.shape.empty()) throw FormatError(ctx + "scalar NPY arrays are not supported (minimum rank 1)");
  for (auto d : h.shape) {
    if (d == 0) throw FormatError(ctx + "zero-sized dimension in NPY shape " + to_string(h.shape));
  }
  h.data_offset = kPrefixBytes + header_len;
  return h;
}

}  // namespace

std::string encode_npy(const Tensor& t) {
  if (t.rank() == 0) throw FormatError("scalars cannot be written (minimum rank 1)");
  for (auto d : t.shape()) {
    if (d == 0) throw FormatError("zero-sized dimension in shape " + to_string(t.shape()));
  }
  if (!t.all_finite()) throw FormatError("tensor contains NaN or Inf");

  std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': " + shape_literal(t.shape()) + ", }";
  const std::size_t unpadded = kPrefixBytes + dict.size() + 1;
  const std::size_t padding = (kAlignment - unpadded % kAlignment) % kAlignment;
  dict.append(padding, ' ');
  dict.push_back('\n');
  if (dict.size() > 0xffff) throw FormatError("NPY header too long for version 1.0");

  std::string out;
  out.reserve(kPrefixBytes + dict.size() + 4 * t.size());
  out.append(kMagic.data(), kMagic.size());
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(dict.size() & 0xff));
  out.push_back(static_cast<char>((dict.size() >> 8) & 0xff));
  out += dict;

  const std::size_t payload_start = out.size();
  out.resize(payload_start + 4 * t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    put_u32_le(out.data() + payload_start + 4 * i, std::bit_cast<std::uint32_t>(t[i]));
  }
  return out;
}

Tensor decode_npy(std::string_view bytes, const std::string& context) {
  const std::string ctx = context.empty() ? std::string() : context + ": ";
  const Header h = parse_header(bytes, ctx);
  const std::size_t count = element_count(h.shape);
  if (bytes.size() - h.data_offset != 4 * count) {
    throw FormatError(ctx + "payload holds " + std::to_string(bytes.size() - h.data_offset) + " bytes, shape " +
                      to_string(h.shape) + " needs " + std::to_string(4 * count));
  }
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<float>(get_u32_le(bytes.data() + h.data_offset + 4 * i));
  }
  Tensor t(h.shape, std::move(data));
  if (!t.all_finite()) throw FormatError(ctx + "tensor contains NaN or Inf");
  return t;
}

Tensor read_tensor(const std::filesystem::path& path) {
  return decode_npy(read_file(path), path.string());
}

void write_tensor(const Tensor& t, const std::filesystem::path& path) {
  write_file_atomic(path, encode_npy(t));
}

Shape read_npy_shape(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string prefix(kPrefixBytes, '\0');
  in.read(prefix.data(), static_cast<std::streamsize>(kPrefixBytes));
  if (in.gcount() != static_cast<std::streamsize>(kPrefixBytes)) throw FormatError(path.string() + ": truncated NPY file");
  const std::size_t header_len =
      static_cast<unsigned char>(prefix[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(prefix[9])) << 8);
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (in.gcount() != static_cast<std::streamsize>(header_len)) throw FormatError(path.string() + ": truncated NPY header");
  return parse_header(prefix + header, path.string() + ": ").shape;
}

}  // namespace repshare
