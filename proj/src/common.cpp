#include "sbikit/common.hpp"

#include <cstring>

namespace sbikit {

std::string doubles_to_hex(const VectorXd& v) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(static_cast<size_t>(v.size()) * 16);
  for (int i = 0; i < v.size(); ++i) {
    std::uint64_t bits;
    double d = v[i];
    std::memcpy(&bits, &d, 8);
    for (int b = 0; b < 8; ++b) {  // little-endian byte order
      unsigned byte = (bits >> (8 * b)) & 0xffu;
      out.push_back(digits[byte >> 4]);
      out.push_back(digits[byte & 0xf]);
    }
  }
  return out;
}

namespace {
int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  throw ConfigError("invalid hex digit in weight payload");
}
}  // namespace

VectorXd hex_to_doubles(const std::string& hex) {
  if (hex.size() % 16 != 0)
    throw ConfigError("weight payload length is not a multiple of 16 hex digits");
  VectorXd v(hex.size() / 16);
  for (int i = 0; i < v.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      unsigned byte = static_cast<unsigned>(hex_nibble(hex[i * 16 + 2 * b]) << 4 |
                                            hex_nibble(hex[i * 16 + 2 * b + 1]));
      bits |= static_cast<std::uint64_t>(byte) << (8 * b);
    }
    double d;
    std::memcpy(&d, &bits, 8);
    v[i] = d;
  }
  return v;
}

}  // namespace sbikit
