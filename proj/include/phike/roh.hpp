#pragma once

#include <array>
#include <cstdint>
#include <span>

#include <openssl/evp.h>

#include "phike/bytes.hpp"
#include "phike/group.hpp"

namespace phike {

using Digest = std::array<std::uint8_t, 32>;

inline Digest sha256(std::span<const std::uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size()) {
    throw Error("SHA-256 digest failed");
  }
  return out;
}

// Channel capacity, session-key length and the group the hashes act on.
class HashConfig {
 public:
  HashConfig(Group group, unsigned cap_bits, unsigned sigma_bits)
      : group_(std::move(group)), cap_bits_(cap_bits), sigma_bits_(sigma_bits) {
    if (cap_bits < 1 || cap_bits > 64) throw ParamError("cap_bits must be in [1,64]");
    if (sigma_bits < 64) throw ParamError("sigma_bits must be at least 64");
    if (cap_bits >= sigma_bits) throw ParamError("cap_bits must be much smaller than sigma_bits");
  }

  const Group& group() const { return group_; }
  unsigned cap_bits() const { return cap_bits_; }
  unsigned sigma_bits() const { return sigma_bits_; }

 private:
  Group group_;
  unsigned cap_bits_;
  unsigned sigma_bits_;
};

// h(x || i): SHA-256 over the canonical element encoding followed by the
// one-byte index.
inline Digest base_hash(const GroupElement& x, std::uint8_t index) {
  Bytes buf = encode_element(x);
  buf.push_back(index);
  return sha256(buf);
}

// First `bits` bits of h(x || i), extended by counter-mode re-digesting
// h(x || i || ctr32) for ctr = 1, 2, ... when more than 256 bits are needed.
inline KeyBits expand_hash(const GroupElement& x, std::uint8_t index, unsigned bits) {
  const std::size_t nbytes = (bits + 7) / 8;
  Bytes out;
  out.reserve(nbytes + 32);
  Bytes prefix = encode_element(x);
  prefix.push_back(index);
  Digest d = sha256(prefix);
  out.insert(out.end(), d.begin(), d.end());
  for (std::uint32_t ctr = 1; out.size() < nbytes; ++ctr) {
    Bytes block = prefix;
    for (int shift = 24; shift >= 0; shift -= 8) block.push_back(static_cast<std::uint8_t>(ctr >> shift));
    d = sha256(block);
    out.insert(out.end(), d.begin(), d.end());
  }
  out.resize(nbytes);
  return KeyBits(std::move(out), bits);
}

// h1 : G -> G, realised as g^(h(x || 1) mod q).
inline GroupElement h1(const HashConfig& cfg, const GroupElement& x) {
  Digest d = base_hash(x, 1);
  mpz_class e = decode_integer(Bytes(d.begin(), d.end())) % cfg.group().q();
  return exp(cfg.group().generator(), e);
}

// h2 : G -> {0,1}^cap, the leading cap_bits bits of h(x || 2).
inline ShortString h2(const HashConfig& cfg, const GroupElement& x) {
  Digest d = base_hash(x, 2);
  std::uint64_t word = 0;
  for (int i = 0; i < 8; ++i) word = (word << 8) | d[i];
  const unsigned bits = cfg.cap_bits();
  return ShortString(bits == 64 ? word : (word >> (64 - bits)), bits);
}

inline KeyBits h3(const HashConfig& cfg, const GroupElement& x) { return expand_hash(x, 3, cfg.sigma_bits()); }
inline KeyBits h4(const HashConfig& cfg, const GroupElement& x) { return expand_hash(x, 4, cfg.sigma_bits()); }
inline KeyBits h5(const HashConfig& cfg, const GroupElement& x) { return expand_hash(x, 5, cfg.sigma_bits()); }

// h_i for i in {3,4,5}; used where the index is computed (4+j, 5-j).
inline KeyBits h_indexed(const HashConfig& cfg, unsigned index, const GroupElement& x) {
  if (index < 3 || index > 5) throw ParamError("h_indexed accepts indices 3..5");
  return expand_hash(x, static_cast<std::uint8_t>(index), cfg.sigma_bits());
}

}  // namespace phike
