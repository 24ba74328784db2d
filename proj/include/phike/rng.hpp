#pragma once

#include <cstdint>
#include <random>

#include <gmpxx.h>

#include "phike/bytes.hpp"

namespace phike {

// SplitMix64 finalizer. Used to derive independent child seeds so that any
// single trial can be replayed from (experiment seed, trial index).
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return mix_seed(mix_seed(parent) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

// Deterministic randomness source. mt19937_64 output is fully specified by
// the standard; all range reduction is done here (not with <random>
// distributions, whose algorithms are implementation-defined) so that streams
// are identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  Rng child(std::uint64_t index) const { return Rng(derive_seed(seed_, index)); }

  // Uniform in [0, n). n must be nonzero.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = n == 0 ? 0 : (~std::uint64_t{0} - n + 1) % n;  // 2^64 mod n
    for (;;) {
      std::uint64_t v = engine_();
      if (v >= limit) return v % n;
    }
  }

  // Uniform k-bit value, k in [0,64].
  std::uint64_t bits(unsigned k) {
    if (k == 0) return 0;
    std::uint64_t v = engine_();
    return k == 64 ? v : (v >> (64 - k));
  }

  bool coin() { return (engine_() >> 63) != 0; }

  // Uniform in [0, n) for arbitrary-precision n > 0, by rejection on the
  // bit length of n.
  mpz_class below(const mpz_class& n) {
    const std::size_t nbits = mpz_sizeinbase(n.get_mpz_t(), 2);
    for (;;) {
      mpz_class v = random_bits(nbits);
      if (v < n) return v;
    }
  }

  mpz_class random_bits(std::size_t nbits) {
    mpz_class v = 0;
    std::size_t remaining = nbits;
    while (remaining > 0) {
      unsigned take = remaining >= 64 ? 64u : static_cast<unsigned>(remaining);
      mpz_class chunk;
      std::uint64_t word = bits(take);
      mpz_import(chunk.get_mpz_t(), 1, 1, sizeof(word), 0, 0, &word);
      v <<= take;
      v += chunk;
      remaining -= take;
    }
    return v;
  }

  Bytes bytes(std::size_t n) {
    Bytes out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(bits(8));
    return out;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace phike
