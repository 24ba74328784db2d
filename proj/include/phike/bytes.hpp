#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "phike/error.hpp"

namespace phike {

using Bytes = std::vector<std::uint8_t>;

inline std::string to_hex(const Bytes& b) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(b.size() * 2);
  for (auto c : b) {
    out.push_back(kDigits[c >> 4]);
    out.push_back(kDigits[c & 0x0f]);
  }
  return out;
}

inline Bytes from_hex(std::string_view s) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (s.size() % 2 != 0) throw DecodeError("odd-length hex string");
  Bytes out(s.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(s[2 * i]);
    int lo = nibble(s[2 * i + 1]);
    if (hi < 0 || lo < 0) throw DecodeError("invalid hex digit");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

// A bit string of at most 64 bits carried as an integer; the unit that fits
// on the low-bandwidth channel (authenticators, short passwords).
class ShortString {
 public:
  ShortString() = default;
  ShortString(std::uint64_t value, unsigned bits) : value_(value), bits_(bits) {
    if (bits == 0 || bits > 64) throw ParamError("short string width must be in [1,64]");
    if (bits < 64 && (value >> bits) != 0) throw ParamError("short string value exceeds its width");
  }

  std::uint64_t value() const { return value_; }
  unsigned bits() const { return bits_; }

  // Big-endian, ceil(bits/8) bytes.
  Bytes to_bytes() const {
    Bytes out((bits_ + 7) / 8);
    std::uint64_t v = value_;
    for (std::size_t i = out.size(); i-- > 0;) {
      out[i] = static_cast<std::uint8_t>(v & 0xff);
      v >>= 8;
    }
    return out;
  }

  friend bool operator==(const ShortString&, const ShortString&) = default;

 private:
  std::uint64_t value_ = 0;
  unsigned bits_ = 0;
};

// Session-key sized bit strings (h3/h4/h5 outputs). Trailing pad bits of the
// final byte are always zero.
class KeyBits {
 public:
  KeyBits() = default;
  KeyBits(Bytes bytes, unsigned bits) : bytes_(std::move(bytes)), bits_(bits) {
    if (bytes_.size() != (bits_ + 7) / 8) throw ParamError("key bit string has wrong byte length");
    if (bits_ % 8 != 0 && !bytes_.empty()) {
      bytes_.back() &= static_cast<std::uint8_t>(0xff << (8 - bits_ % 8));
    }
  }

  const Bytes& bytes() const { return bytes_; }
  unsigned bits() const { return bits_; }
  std::string hex() const { return to_hex(bytes_); }

  friend bool operator==(const KeyBits&, const KeyBits&) = default;

 private:
  Bytes bytes_;
  unsigned bits_ = 0;
};

}  // namespace phike
