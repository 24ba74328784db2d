#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include <gmpxx.h>

#include "phike/bytes.hpp"
#include "phike/error.hpp"
#include "phike/rng.hpp"

namespace phike {

inline std::size_t bit_length(const mpz_class& v) {
  return v == 0 ? 0 : mpz_sizeinbase(v.get_mpz_t(), 2);
}

inline bool is_probable_prime(const mpz_class& v) {
  return v >= 2 && mpz_probab_prime_p(v.get_mpz_t(), 40) != 0;
}

inline mpz_class powm(const mpz_class& base, const mpz_class& e, const mpz_class& mod) {
  mpz_class r;
  mpz_powm(r.get_mpz_t(), base.get_mpz_t(), e.get_mpz_t(), mod.get_mpz_t());
  return r;
}

// Safe-prime group description: p = 2q + 1, g generates the order-q subgroup
// of Z_p^*. s_bits is the large security parameter supported by the order,
// i.e. the largest s with q >= 2^(2s).
class GroupParams {
 public:
  // Validates every invariant; throws ParamError.
  static GroupParams make(mpz_class p, mpz_class q, mpz_class g) {
    if (p != 2 * q + 1) throw ParamError("p must equal 2q+1");
    if (!is_probable_prime(q)) throw ParamError("q is not prime");
    if (!is_probable_prime(p)) throw ParamError("p is not prime");
    if (g <= 1 || g >= p) throw ParamError("g must lie in [2, p-1]");
    if (powm(g, q, p) != 1) throw ParamError("g does not have order q");
    return GroupParams(std::move(p), std::move(q), std::move(g));
  }

  const mpz_class& p() const { return p_; }
  const mpz_class& q() const { return q_; }
  const mpz_class& g() const { return g_; }
  unsigned s_bits() const { return s_bits_; }

  // Canonical element encoding length, ceil(bits(p)/8).
  std::size_t encoding_length() const { return (bit_length(p_) + 7) / 8; }

  // Config record {p, q, g, s_bits} as decimal strings.
  std::map<std::string, std::string> to_record() const {
    return {{"p", p_.get_str()}, {"q", q_.get_str()}, {"g", g_.get_str()},
            {"s_bits", std::to_string(s_bits_)}};
  }

  static GroupParams from_record(const std::map<std::string, std::string>& rec) {
    auto field = [&](const char* k) -> mpz_class {
      auto it = rec.find(k);
      if (it == rec.end()) throw ParamError(std::string("group record missing field ") + k);
      mpz_class v;
      if (v.set_str(it->second, 10) != 0) throw ParamError(std::string("group field not decimal: ") + k);
      return v;
    };
    GroupParams gp = make(field("p"), field("q"), field("g"));
    if (auto it = rec.find("s_bits"); it != rec.end() && it->second != std::to_string(gp.s_bits_)) {
      throw ParamError("s_bits does not match the subgroup order");
    }
    return gp;
  }

  friend bool operator==(const GroupParams& a, const GroupParams& b) {
    return a.p_ == b.p_ && a.q_ == b.q_ && a.g_ == b.g_;
  }

 private:
  GroupParams(mpz_class p, mpz_class q, mpz_class g)
      : p_(std::move(p)), q_(std::move(q)), g_(std::move(g)),
        s_bits_(static_cast<unsigned>((bit_length(q_) - 1) / 2)) {}

  mpz_class p_, q_, g_;
  unsigned s_bits_;
};

struct SearchBudget {
  std::uint64_t max_candidates = 10'000'000;
};

// Draws random q_bits-bit candidates q (top bit set) until both q and 2q+1
// are prime; g is the smallest h >= 2 with h^q = 1 mod p. Deterministic per
// rng seed.
inline GroupParams generate_params(unsigned q_bits, Rng& rng, SearchBudget budget = {}) {
  if (q_bits < 3) throw ParamError("q_bits must be at least 3");
  for (std::uint64_t attempt = 0; attempt < budget.max_candidates; ++attempt) {
    mpz_class q = rng.random_bits(q_bits - 1);
    mpz_setbit(q.get_mpz_t(), q_bits - 1);
    if (!is_probable_prime(q)) continue;
    mpz_class p = 2 * q + 1;
    if (!is_probable_prime(p)) continue;
    for (mpz_class h = 2; h < p - 1; ++h) {
      if (powm(h, q, p) == 1) return GroupParams::make(p, q, h);
    }
  }
  throw SearchExhausted("no safe prime found within the attempt budget");
}

class GroupElement;
class Scalar;

// Shared, immutable handle on a parameter set. Elements carry one so that an
// element always knows the group it belongs to.
class Group {
 public:
  explicit Group(GroupParams params) : params_(std::make_shared<const GroupParams>(std::move(params))) {}

  // Desk profile: small generated group for exhaustive/brute-force testing.
  static Group desk(unsigned q_bits, std::uint64_t seed = 0) {
    if (q_bits > 512) throw ParamError("desk profile q_bits must be at most 512");
    Rng rng(seed);
    return Group(generate_params(q_bits, rng));
  }

  // The 2048-bit MODP safe prime with generator 2 (2 is a quadratic residue
  // because p = 7 mod 8, so it generates the order-q subgroup).
  static const Group& standard() {
    static const Group g = [] {
      mpz_class p(
          "ffffffffffffffffc90fdaa22168c234c4c6628b80dc1cd129024e088a67cc74020bbea63b139b22514a0879"
          "8e3404ddef9519b3cd3a431b302b0a6df25f14374fe1356d6d51c245e485b576625e7ec6f44c42e9a637ed6b"
          "0bff5cb6f406b7edee386bfb5a899fa5ae9f24117c4b1fe649286651ece45b3dc2007cb8a163bf0598da4836"
          "1c55d39a69163fa8fd24cf5f83655d23dca3ad961c62f356208552bb9ed529077096966d670c354e4abc9804"
          "f1746c08ca18217c32905e462e36ce3be39e772c180e86039b2783a2ec07a28fb5c55df06f4c52c9de2bcbf6"
          "955817183995497cea956ae515d2261898fa051015728e5a8aacaa68ffffffffffffffff",
          16);
      mpz_class q = (p - 1) / 2;
      return Group(GroupParams::make(p, q, mpz_class(2)));
    }();
    return g;
  }

  const GroupParams& params() const { return *params_; }
  const mpz_class& p() const { return params_->p(); }
  const mpz_class& q() const { return params_->q(); }
  std::size_t encoding_length() const { return params_->encoding_length(); }

  inline GroupElement generator() const;
  inline GroupElement identity() const;

  friend bool operator==(const Group& a, const Group& b) {
    return a.params_ == b.params_ || *a.params_ == *b.params_;
  }

 private:
  std::shared_ptr<const GroupParams> params_;
};

// Exponent in [1, q-1].
class Scalar {
 public:
  Scalar(const Group& group, mpz_class value) : value_(std::move(value)) {
    if (value_ < 1 || value_ >= group.q()) throw ParamError("scalar out of range [1, q-1]");
  }
  const mpz_class& value() const { return value_; }
  friend bool operator==(const Scalar&, const Scalar&) = default;

 private:
  mpz_class value_;
};

// Member of the order-q subgroup.
class GroupElement {
 public:
  // Validating constructor for values from untrusted sources.
  static GroupElement from_integer(const Group& group, mpz_class value) {
    if (value < 1 || value >= group.p()) throw DecodeError("element out of range [1, p-1]");
    if (powm(value, group.q(), group.p()) != 1) throw DecodeError("element is not in the order-q subgroup");
    return GroupElement(group, std::move(value));
  }

  // No membership check. For results of group operations and for deliberate
  // fault injection in tests.
  static GroupElement trusted(const Group& group, mpz_class value) { return GroupElement(group, std::move(value)); }

  const Group& group() const { return group_; }
  const mpz_class& value() const { return value_; }

  friend bool operator==(const GroupElement& a, const GroupElement& b) {
    return a.value_ == b.value_ && a.group_ == b.group_;
  }

 private:
  GroupElement(const Group& group, mpz_class value) : group_(group), value_(std::move(value)) {}

  Group group_;
  mpz_class value_;
};

inline GroupElement Group::generator() const { return GroupElement::trusted(*this, params_->g()); }
inline GroupElement Group::identity() const { return GroupElement::trusted(*this, mpz_class(1)); }

// base^e mod p for any non-negative exponent.
inline GroupElement exp(const GroupElement& base, const mpz_class& e) {
  if (e < 0) throw ParamError("negative exponent");
  return GroupElement::trusted(base.group(), powm(base.value(), e, base.group().p()));
}

inline GroupElement exp(const GroupElement& base, const Scalar& e) { return exp(base, e.value()); }

inline GroupElement mul(const GroupElement& a, const GroupElement& b) {
  return GroupElement::trusted(a.group(), (a.value() * b.value()) % a.group().p());
}

// Uniform over [1, q-1].
inline Scalar random_scalar(const Group& group, Rng& rng) {
  if (group.q() == 2) return Scalar(group, mpz_class(1));
  mpz_class v = rng.below(mpz_class(group.q() - 1)) + 1;
  return Scalar(group, std::move(v));
}

// Fixed-length big-endian, zero padded to encoding_length() bytes.
inline Bytes encode_integer(const mpz_class& v, std::size_t len) {
  Bytes out(len, 0);
  std::size_t count = 0;
  Bytes tmp(bit_length(v) / 8 + 1);
  mpz_export(tmp.data(), &count, 1, 1, 1, 0, v.get_mpz_t());
  if (count > len) throw ParamError("integer too large for encoding length");
  std::copy(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(count), out.end() - static_cast<std::ptrdiff_t>(count));
  return out;
}

inline mpz_class decode_integer(const Bytes& b) {
  mpz_class v = 0;
  if (!b.empty()) mpz_import(v.get_mpz_t(), b.size(), 1, 1, 1, 0, b.data());
  return v;
}

inline Bytes encode_element(const GroupElement& e) { return encode_integer(e.value(), e.group().encoding_length()); }

inline GroupElement decode_element(const Group& group, const Bytes& bytes) {
  if (bytes.size() != group.encoding_length()) throw DecodeError("element encoding has wrong length");
  return GroupElement::from_integer(group, decode_integer(bytes));
}

}  // namespace phike
