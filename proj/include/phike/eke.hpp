#pragma once

#include <cstdint>
#include <optional>

#include "phike/channels.hpp"
#include "phike/group.hpp"
#include "phike/outcome.hpp"
#include "phike/roh.hpp"

namespace phike {

// Fresh short password; never persisted beyond one run.
class Password {
 public:
  Password(std::uint64_t value, unsigned t_bits) : value_(value), t_bits_(t_bits) {
    if (t_bits < 1 || t_bits > 64) throw ParamError("password length t must be in [1,64]");
    if (t_bits < 64 && (value >> t_bits) != 0) throw ParamError("password exceeds 2^t - 1");
  }

  static Password random(unsigned t_bits, Rng& rng) { return Password(rng.bits(t_bits), t_bits); }

  std::uint64_t value() const { return value_; }
  unsigned t_bits() const { return t_bits_; }

  friend bool operator==(const Password&, const Password&) = default;

 private:
  std::uint64_t value_;
  unsigned t_bits_;
};

namespace eke_msg {
inline constexpr std::uint8_t kMaskedShare = 0x10;
inline constexpr std::uint8_t kConfirmClient = 0x11;
inline constexpr std::uint8_t kConfirmServer = 0x12;
}  // namespace eke_msg

// Password mask of encoding_length() bytes: SHA-256 in counter mode over a
// domain tag, t and the password. Bits above bits(p) are cleared so that a
// masked encoding stays below 2^bits(p).
inline Bytes derive_pw_key(const Password& pw, const Group& group) {
  static constexpr std::string_view kTag = "phike/eke/pw-mask";
  const std::size_t len = group.encoding_length();
  Bytes out;
  for (std::uint32_t ctr = 0; out.size() < len; ++ctr) {
    Bytes block(kTag.begin(), kTag.end());
    block.push_back(static_cast<std::uint8_t>(pw.t_bits()));
    for (int shift = 56; shift >= 0; shift -= 8) block.push_back(static_cast<std::uint8_t>(pw.value() >> shift));
    for (int shift = 24; shift >= 0; shift -= 8) block.push_back(static_cast<std::uint8_t>(ctr >> shift));
    Digest d = sha256(block);
    out.insert(out.end(), d.begin(), d.end());
  }
  out.resize(len);
  const unsigned spare = static_cast<unsigned>(len * 8 - bit_length(group.p()));
  if (spare > 0) out[0] &= static_cast<std::uint8_t>(0xff >> spare);
  return out;
}

inline Bytes xor_bytes(const Bytes& a, const Bytes& b) {
  Bytes out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] ^ b[i];
  return out;
}

// Diffie-Hellman EKE over the broadcast network:
//   1. both send g^x XOR mask(pw)            (0x10)
//   2. both send h4 (client) / h5 (server) of the DH secret (0x11 / 0x12)
//   3. on a matching peer confirmation, key = h3(DH secret)
// A share that does not unmask to a subgroup member is replaced by a random
// element; the run then fails at confirmation like any other wrong password.
class EkeMachine {
 public:
  enum class Phase { Idle, AwaitShare, AwaitConfirm, Accepted, Aborted };

  EkeMachine(Role role, Password pw, HashConfig cfg)
      : role_(role), pw_(pw), cfg_(std::move(cfg)), mask_(derive_pw_key(pw_, cfg_.group())) {}

  Actions start(Rng& rng) {
    if (phase_ != Phase::Idle) return {};
    const Group& g = cfg_.group();
    Bytes masked;
    for (;;) {
      x_ = random_scalar(g, rng);
      masked = xor_bytes(encode_element(exp(g.generator(), *x_)), mask_);
      mpz_class v = decode_integer(masked);
      if (v >= 1 && v < g.p()) break;
    }
    phase_ = Phase::AwaitShare;
    Bytes msg{eke_msg::kMaskedShare};
    msg.insert(msg.end(), masked.begin(), masked.end());
    return {Outgoing::broadcast(std::move(msg))};
  }

  Actions receive(const Incoming& in, Rng& rng) {
    if (phase_ == Phase::Accepted || phase_ == Phase::Aborted || phase_ == Phase::Idle) return {};
    if (in.medium != Medium::Broadcast || in.payload.empty()) return abort(AbortReason::UnexpectedMessage);
    const std::uint8_t type = in.payload[0];
    Bytes body(in.payload.begin() + 1, in.payload.end());
    const Group& g = cfg_.group();

    if (phase_ == Phase::AwaitShare) {
      if (type != eke_msg::kMaskedShare) return abort(AbortReason::UnexpectedMessage);
      if (body.size() != g.encoding_length()) return abort(AbortReason::Malformed);
      GroupElement peer = g.identity();
      try {
        peer = decode_element(g, xor_bytes(body, mask_));
      } catch (const DecodeError&) {
        peer = exp(g.generator(), random_scalar(g, rng));
      }
      secret_ = exp(peer, *x_);
      phase_ = Phase::AwaitConfirm;
      Bytes msg{role_.is_client() ? eke_msg::kConfirmClient : eke_msg::kConfirmServer};
      KeyBits c = h_indexed(cfg_, 4 + role_.j(), *secret_);
      msg.insert(msg.end(), c.bytes().begin(), c.bytes().end());
      return {Outgoing::broadcast(std::move(msg))};
    }

    const std::uint8_t expected = role_.is_client() ? eke_msg::kConfirmServer : eke_msg::kConfirmClient;
    if (type != expected) return abort(AbortReason::UnexpectedMessage);
    if (body != h_indexed(cfg_, 5 - role_.j(), *secret_).bytes()) return abort(AbortReason::ConfirmationFailed);
    key_ = h3(cfg_, *secret_);
    phase_ = Phase::Accepted;
    return {};
  }

  std::optional<Medium> awaiting() const {
    if (phase_ == Phase::AwaitShare || phase_ == Phase::AwaitConfirm) return Medium::Broadcast;
    return std::nullopt;
  }

  PartyStatus status() const {
    if (phase_ == Phase::Accepted) return PartyStatus::Accepted;
    if (phase_ == Phase::Aborted) return PartyStatus::Aborted;
    return PartyStatus::Running;
  }
  std::optional<SessionKey> key() const { return key_; }
  AbortReason abort_reason() const { return reason_; }

  Phase phase() const { return phase_; }
  Role role() const { return role_; }
  const Password& password() const { return pw_; }
  // DH secret, available once the peer share has been processed.
  const std::optional<GroupElement>& secret() const { return secret_; }

 private:
  Actions abort(AbortReason r) {
    phase_ = Phase::Aborted;
    reason_ = r;
    return {};
  }

  Role role_;
  Password pw_;
  HashConfig cfg_;
  Bytes mask_;
  Phase phase_ = Phase::Idle;
  std::optional<Scalar> x_;
  std::optional<GroupElement> secret_;
  std::optional<SessionKey> key_;
  AbortReason reason_ = AbortReason::None;
};

static_assert(ProtocolMachine<EkeMachine>);

struct EkePairResult {
  PartyStatus client_status;
  PartyStatus server_status;
  std::optional<SessionKey> client_key;
  std::optional<SessionKey> server_key;
  AbortReason client_reason;
  AbortReason server_reason;
  ScheduleResult schedule;
};

// Both ends of one EKE run on a fresh world, optionally with an adversary.
inline EkePairResult run_eke_pair(const Password& client_pw, const Password& server_pw, const HashConfig& cfg,
                                  std::uint64_t seed, AdversaryHooks hooks = {}) {
  World world;
  world.set_adversary(std::move(hooks));
  NodeId a = world.add_node();
  NodeId b = world.add_node();
  MachineParty<EkeMachine> client(EkeMachine(Role::client(), client_pw, cfg), {a, b, std::nullopt},
                                  derive_seed(seed, 0));
  MachineParty<EkeMachine> server(EkeMachine(Role::server(), server_pw, cfg), {b, a, std::nullopt},
                                  derive_seed(seed, 1));
  Party* parties[] = {&client, &server};
  ScheduleResult sched = run_schedule(world, parties, 16);
  return {client.status(), server.status(), client.key(), server.key(),
          client.abort_reason(), server.abort_reason(), sched};
}

}  // namespace phike
