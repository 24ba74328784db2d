#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "phike/channels.hpp"
#include "phike/eke.hpp"
#include "phike/group.hpp"
#include "phike/outcome.hpp"
#include "phike/roh.hpp"

namespace phike {

// Eke is the bare building block with an out-of-band shared password; it is
// an attack target in the harness, not a pairing protocol.
enum class Protocol { P1, P2, P3, Eke };

inline const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::P1: return "p1";
    case Protocol::P2: return "p2";
    case Protocol::P3: return "p3";
    case Protocol::Eke: return "eke";
  }
  return "?";
}

inline std::optional<Protocol> parse_protocol(std::string_view s) {
  if (s == "p1") return Protocol::P1;
  if (s == "p2") return Protocol::P2;
  if (s == "p3") return Protocol::P3;
  if (s == "eke") return Protocol::Eke;
  return std::nullopt;
}

// --- Protocol 1: one-way private and authentic channel ----------------------
//
// The party at the sending end of the channel draws a t-bit password and
// sends it; both then run EKE with it.
class Prot1Machine {
 public:
  Prot1Machine(Role role, bool sends_password, HashConfig cfg)
      : role_(role), sender_(sends_password), cfg_(std::move(cfg)) {}

  Actions start(Rng& rng) {
    if (!sender_) return {};
    Password pw = Password::random(cfg_.cap_bits(), rng);
    Actions out{Outgoing::channel(ShortString(pw.value(), pw.t_bits()))};
    eke_.emplace(role_, pw, cfg_);
    for (auto& a : eke_->start(rng)) out.push_back(std::move(a));
    return out;
  }

  Actions receive(const Incoming& in, Rng& rng) {
    if (eke_) return eke_->receive(in, rng);
    if (aborted_) return {};
    if (in.medium != Medium::Channel) return abort(AbortReason::UnexpectedMessage);
    if (in.short_payload.bits() != cfg_.cap_bits()) return abort(AbortReason::Malformed);
    eke_.emplace(role_, Password(in.short_payload.value(), cfg_.cap_bits()), cfg_);
    return eke_->start(rng);
  }

  std::optional<Medium> awaiting() const {
    if (eke_) return eke_->awaiting();
    if (aborted_) return std::nullopt;
    return Medium::Channel;
  }

  PartyStatus status() const {
    if (aborted_) return PartyStatus::Aborted;
    return eke_ ? eke_->status() : PartyStatus::Running;
  }
  std::optional<SessionKey> key() const { return eke_ ? eke_->key() : std::nullopt; }
  AbortReason abort_reason() const { return aborted_ ? reason_ : (eke_ ? eke_->abort_reason() : AbortReason::None); }

  const std::optional<EkeMachine>& eke() const { return eke_; }

 private:
  Actions abort(AbortReason r) {
    aborted_ = true;
    reason_ = r;
    return {};
  }

  Role role_;
  bool sender_;
  HashConfig cfg_;
  std::optional<EkeMachine> eke_;
  bool aborted_ = false;
  AbortReason reason_ = AbortReason::None;
};

// --- Protocol 2: two-way private channel -----------------------------------
//
// Each side sends its own t-bit password and runs EKE with p XOR q.
class Prot2Machine {
 public:
  Prot2Machine(Role role, HashConfig cfg) : role_(role), cfg_(std::move(cfg)) {}

  Actions start(Rng& rng) {
    own_ = Password::random(cfg_.cap_bits(), rng);
    return {Outgoing::channel(ShortString(own_->value(), own_->t_bits()))};
  }

  Actions receive(const Incoming& in, Rng& rng) {
    if (eke_) return eke_->receive(in, rng);
    if (aborted_) return {};
    if (in.medium != Medium::Channel) return abort(AbortReason::UnexpectedMessage);
    if (in.short_payload.bits() != cfg_.cap_bits()) return abort(AbortReason::Malformed);
    eke_.emplace(role_, Password(own_->value() ^ in.short_payload.value(), cfg_.cap_bits()), cfg_);
    return eke_->start(rng);
  }

  std::optional<Medium> awaiting() const {
    if (eke_) return eke_->awaiting();
    if (aborted_ || !own_) return std::nullopt;
    return Medium::Channel;
  }

  PartyStatus status() const {
    if (aborted_) return PartyStatus::Aborted;
    return eke_ ? eke_->status() : PartyStatus::Running;
  }
  std::optional<SessionKey> key() const { return eke_ ? eke_->key() : std::nullopt; }
  AbortReason abort_reason() const { return aborted_ ? reason_ : (eke_ ? eke_->abort_reason() : AbortReason::None); }

  const std::optional<Password>& own_password() const { return own_; }
  const std::optional<EkeMachine>& eke() const { return eke_; }

 private:
  Actions abort(AbortReason r) {
    aborted_ = true;
    reason_ = r;
    return {};
  }

  Role role_;
  HashConfig cfg_;
  std::optional<Password> own_;
  std::optional<EkeMachine> eke_;
  bool aborted_ = false;
  AbortReason reason_ = AbortReason::None;
};

// --- Protocol 3: two-way authentic channel ---------------------------------

namespace p3_msg {
inline constexpr std::uint8_t kCommit = 0x01;
inline constexpr std::uint8_t kShare = 0x02;
inline constexpr std::uint8_t kValidator = 0x03;
}  // namespace p3_msg

enum class Prot3Phase { Commit, Authenticate, KeyExchange, KeyValidation, Accepted, Aborted };

inline const char* prot3_phase_name(Prot3Phase p) {
  switch (p) {
    case Prot3Phase::Commit: return "commit";
    case Prot3Phase::Authenticate: return "authenticate";
    case Prot3Phase::KeyExchange: return "key-exchange";
    case Prot3Phase::KeyValidation: return "key-validation";
    case Prot3Phase::Accepted: return "accepted";
    case Prot3Phase::Aborted: return "aborted";
  }
  return "?";
}

// Per-party state. alpha is the peer's commitment, beta the peer's
// authenticator, u the accepted peer share, k the session key.
struct Prot3State {
  Role role;
  Prot3Phase phase = Prot3Phase::Commit;
  bool started = false;
  std::optional<Scalar> x;
  std::optional<GroupElement> own_share;
  std::optional<GroupElement> alpha;
  std::optional<ShortString> beta;
  std::optional<GroupElement> u;
  std::optional<SessionKey> k;
  AbortReason abort_reason = AbortReason::None;
  // Phase in which the abort happened.
  Prot3Phase aborted_in = Prot3Phase::Commit;

  static Prot3State initial(Role role, std::optional<Scalar> preset_x = std::nullopt) {
    Prot3State s;
    s.role = role;
    s.x = std::move(preset_x);
    return s;
  }

  // u^x, the DH group secret; requires u.
  GroupElement group_secret() const { return exp(*u, *x); }
};

struct Prot3Step {
  Prot3State state;
  Actions actions;
};

// Called right after a share is accepted, before it is used. Tests use it to
// inject faults into u.
using Prot3FaultHook = std::function<void(Prot3State&)>;

namespace detail {

inline Prot3Step prot3_abort(Prot3State s, AbortReason r) {
  s.aborted_in = s.phase;
  s.phase = Prot3Phase::Aborted;
  s.abort_reason = r;
  return {std::move(s), {}};
}

inline Bytes framed(std::uint8_t type, const Bytes& body) {
  Bytes out;
  out.reserve(body.size() + 1);
  out.push_back(type);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

}  // namespace detail

// One transition of the Prot3 state machine. `in` empty means "start"
// (Commit: pick x, broadcast h1(g^x)); it is a no-op afterwards.
inline Prot3Step prot3_step(Prot3State s, const std::optional<Incoming>& in, const HashConfig& cfg, Rng& rng,
                            const Prot3FaultHook& fault = {}) {
  const Group& g = cfg.group();
  if (s.phase == Prot3Phase::Accepted || s.phase == Prot3Phase::Aborted) return {std::move(s), {}};

  if (!in) {
    if (s.started) return {std::move(s), {}};
    s.started = true;
    if (!s.x) s.x = random_scalar(g, rng);
    s.own_share = exp(g.generator(), *s.x);
    Actions out{Outgoing::broadcast(detail::framed(p3_msg::kCommit, encode_element(h1(cfg, *s.own_share))))};
    return {std::move(s), std::move(out)};
  }
  if (!s.started) return detail::prot3_abort(std::move(s), AbortReason::UnexpectedMessage);

  if (s.phase == Prot3Phase::Authenticate) {
    if (in->medium != Medium::Channel) return detail::prot3_abort(std::move(s), AbortReason::UnexpectedMessage);
    if (in->short_payload.bits() != cfg.cap_bits()) return detail::prot3_abort(std::move(s), AbortReason::Malformed);
    s.beta = in->short_payload;
    s.phase = Prot3Phase::KeyExchange;
    Actions out{Outgoing::broadcast(detail::framed(p3_msg::kShare, encode_element(*s.own_share)))};
    return {std::move(s), std::move(out)};
  }

  // Remaining phases read from the broadcast network.
  if (in->medium != Medium::Broadcast || in->payload.empty()) {
    return detail::prot3_abort(std::move(s), AbortReason::UnexpectedMessage);
  }
  const std::uint8_t type = in->payload[0];
  const Bytes body(in->payload.begin() + 1, in->payload.end());

  switch (s.phase) {
    case Prot3Phase::Commit: {
      if (type != p3_msg::kCommit) return detail::prot3_abort(std::move(s), AbortReason::UnexpectedMessage);
      try {
        s.alpha = decode_element(g, body);
      } catch (const DecodeError&) {
        return detail::prot3_abort(std::move(s), AbortReason::Malformed);
      }
      s.phase = Prot3Phase::Authenticate;
      Actions out{Outgoing::channel(h2(cfg, *s.own_share))};
      return {std::move(s), std::move(out)};
    }
    case Prot3Phase::KeyExchange: {
      if (type != p3_msg::kShare) return detail::prot3_abort(std::move(s), AbortReason::UnexpectedMessage);
      std::optional<GroupElement> m;
      try {
        m = decode_element(g, body);
      } catch (const DecodeError&) {
        return detail::prot3_abort(std::move(s), AbortReason::Malformed);
      }
      if (!(h1(cfg, *m) == *s.alpha)) return detail::prot3_abort(std::move(s), AbortReason::CommitMismatch);
      if (!(h2(cfg, *m) == *s.beta)) return detail::prot3_abort(std::move(s), AbortReason::AuthenticatorMismatch);
      s.u = std::move(m);
      if (fault) fault(s);
      s.phase = Prot3Phase::KeyValidation;
      Actions out{Outgoing::broadcast(detail::framed(p3_msg::kValidator,
                                                    h_indexed(cfg, 4 + s.role.j(), s.group_secret()).bytes()))};
      return {std::move(s), std::move(out)};
    }
    case Prot3Phase::KeyValidation: {
      if (type != p3_msg::kValidator) return detail::prot3_abort(std::move(s), AbortReason::UnexpectedMessage);
      const GroupElement z = s.group_secret();
      if (body != h_indexed(cfg, 5 - s.role.j(), z).bytes()) {
        return detail::prot3_abort(std::move(s), AbortReason::ValidationFailed);
      }
      s.k = h3(cfg, z);
      s.phase = Prot3Phase::Accepted;
      return {std::move(s), {}};
    }
    default:
      return detail::prot3_abort(std::move(s), AbortReason::UnexpectedMessage);
  }
}

class Prot3Machine {
 public:
  Prot3Machine(Role role, HashConfig cfg, std::optional<Scalar> preset_x = std::nullopt, Prot3FaultHook fault = {})
      : state_(Prot3State::initial(role, std::move(preset_x))), cfg_(std::move(cfg)), fault_(std::move(fault)) {}

  Actions start(Rng& rng) { return advance(std::nullopt, rng); }
  Actions receive(const Incoming& in, Rng& rng) { return advance(in, rng); }

  std::optional<Medium> awaiting() const {
    switch (state_.phase) {
      case Prot3Phase::Commit:
      case Prot3Phase::KeyExchange:
      case Prot3Phase::KeyValidation: return Medium::Broadcast;
      case Prot3Phase::Authenticate: return Medium::Channel;
      default: return std::nullopt;
    }
  }

  PartyStatus status() const {
    if (state_.phase == Prot3Phase::Accepted) return PartyStatus::Accepted;
    if (state_.phase == Prot3Phase::Aborted) return PartyStatus::Aborted;
    return PartyStatus::Running;
  }
  std::optional<SessionKey> key() const { return state_.k; }
  AbortReason abort_reason() const { return state_.abort_reason; }

  const Prot3State& state() const { return state_; }

 private:
  Actions advance(const std::optional<Incoming>& in, Rng& rng) {
    Prot3Step st = prot3_step(std::move(state_), in, cfg_, rng, fault_);
    state_ = std::move(st.state);
    return std::move(st.actions);
  }

  Prot3State state_;
  HashConfig cfg_;
  Prot3FaultHook fault_;
};

static_assert(ProtocolMachine<Prot1Machine>);
static_assert(ProtocolMachine<Prot2Machine>);
static_assert(ProtocolMachine<Prot3Machine>);

// --- traces and pairing ----------------------------------------------------

// Canonical form of a trace: every sent message in order, then every received
// message in order, each as (medium, length, payload).
inline Bytes canonical_trace(const Transcript& t, bool mirrored = false) {
  Bytes out;
  auto append = [&](bool want_sent) {
    for (const auto& e : t.entries()) {
      if (e.sent != want_sent) continue;
      out.push_back(static_cast<std::uint8_t>(e.medium));
      const auto n = static_cast<std::uint32_t>(e.payload.size());
      for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(n >> shift));
      out.insert(out.end(), e.payload.begin(), e.payload.end());
    }
    out.push_back(0xff);
  };
  append(!mirrored);
  append(mirrored);
  return out;
}

// Two instances are paired when their traces agree, with the second one's
// send/receive directions swapped.
inline bool pairing_check(const Transcript& a, const Transcript& b) {
  return canonical_trace(a) == canonical_trace(b, true);
}

struct PairingOutcome {
  bool accepted = false;
  std::optional<SessionKey> key;
  AbortReason abort_reason = AbortReason::None;
  Transcript trace;
};

struct PairingOptions {
  Protocol protocol = Protocol::P3;
  // Prot1 only: the server draws the password and the channel runs
  // server -> client (one-sided pairing, slave to master).
  bool prot1_server_sends = false;
  int max_rounds = 32;
  // Prot3 only.
  std::optional<Scalar> client_secret{};
  std::optional<Scalar> server_secret{};
  Prot3FaultHook client_fault{};
  Prot3FaultHook server_fault{};
};

inline ChannelSpec channel_spec_for(Protocol p, unsigned cap_bits) {
  switch (p) {
    case Protocol::P1: return ChannelSpec::private_authentic(cap_bits, ChannelDirection::OneWay);
    case Protocol::P2: return ChannelSpec::private_only(cap_bits, ChannelDirection::TwoWay);
    case Protocol::P3: return ChannelSpec::authentic(cap_bits, ChannelDirection::TwoWay);
    case Protocol::Eke: break;
  }
  throw ParamError("protocol has no low-bandwidth channel");
}

inline std::unique_ptr<Party> make_party(Protocol protocol, Role role, const HashConfig& cfg, Wiring wiring,
                                         std::uint64_t seed, const PairingOptions& opts = {}) {
  switch (protocol) {
    case Protocol::P1: {
      bool sends = role.is_client() != opts.prot1_server_sends;
      return std::make_unique<MachineParty<Prot1Machine>>(Prot1Machine(role, sends, cfg), wiring, seed);
    }
    case Protocol::P2:
      return std::make_unique<MachineParty<Prot2Machine>>(Prot2Machine(role, cfg), wiring, seed);
    case Protocol::P3: {
      const auto& x = role.is_client() ? opts.client_secret : opts.server_secret;
      const auto& f = role.is_client() ? opts.client_fault : opts.server_fault;
      return std::make_unique<MachineParty<Prot3Machine>>(Prot3Machine(role, cfg, x, f), wiring, seed);
    }
    case Protocol::Eke: break;
  }
  throw ParamError("EKE parties need a shared password; use EkeMachine directly");
}

// A client and a server joined by the protocol's channel on one world.
class PairingSession {
 public:
  PairingSession(HashConfig cfg, PairingOptions opts, std::uint64_t seed)
      : cfg_(std::move(cfg)), opts_(std::move(opts)) {
    client_id_ = world_.add_node();
    server_id_ = world_.add_node();
    ChannelSpec spec = channel_spec_for(opts_.protocol, cfg_.cap_bits());
    bool reversed = opts_.protocol == Protocol::P1 && opts_.prot1_server_sends;
    channel_ = reversed ? world_.add_channel(spec, server_id_, client_id_)
                        : world_.add_channel(spec, client_id_, server_id_);
    client_ = make_party(opts_.protocol, Role::client(), cfg_, {client_id_, server_id_, channel_},
                         derive_seed(seed, 0), opts_);
    server_ = make_party(opts_.protocol, Role::server(), cfg_, {server_id_, client_id_, channel_},
                         derive_seed(seed, 1), opts_);
  }

  World& world() { return world_; }
  const World& world() const { return world_; }
  Party& client() { return *client_; }
  Party& server() { return *server_; }
  Party& party(Role r) { return r.is_client() ? *client_ : *server_; }
  NodeId client_id() const { return client_id_; }
  NodeId server_id() const { return server_id_; }
  ChannelId channel() const { return channel_; }
  const HashConfig& config() const { return cfg_; }
  Protocol protocol() const { return opts_.protocol; }

  ScheduleResult run() {
    Party* parties[] = {client_.get(), server_.get()};
    schedule_ = run_schedule(world_, parties, opts_.max_rounds);
    return schedule_;
  }
  const ScheduleResult& schedule() const { return schedule_; }

  PairingOutcome outcome(Role r) const {
    const Party& p = r.is_client() ? *client_ : *server_;
    return {p.accepted(), p.key(), p.abort_reason(), p.trace()};
  }

  // Prot3 state of one side, or nullptr for other protocols.
  const Prot3State* prot3_state(Role r) const {
    const Party& p = r.is_client() ? *client_ : *server_;
    auto* mp = dynamic_cast<const MachineParty<Prot3Machine>*>(&p);
    return mp ? &mp->machine().state() : nullptr;
  }

  // {protocol, role, accepted, abort_reason, key_hex?, rounds}
  nlohmann::json outcome_json(Role r) const {
    PairingOutcome o = outcome(r);
    nlohmann::json j;
    j["protocol"] = protocol_name(opts_.protocol);
    j["role"] = r.name();
    j["accepted"] = o.accepted;
    j["abort_reason"] = o.accepted ? nullptr : nlohmann::json(abort_reason_name(o.abort_reason));
    if (o.key) j["key_hex"] = o.key->hex();
    j["rounds"] = schedule_.rounds;
    return j;
  }

  bool mutual_accept_equal_keys() const {
    return client_->accepted() && server_->accepted() && client_->key() == server_->key();
  }

 private:
  HashConfig cfg_;
  PairingOptions opts_;
  World world_;
  NodeId client_id_, server_id_;
  ChannelId channel_ = 0;
  std::unique_ptr<Party> client_, server_;
  ScheduleResult schedule_;
};

// Prot3 delivery log check: for each party, its commitment is delivered in an
// earlier round than the peer's authenticator, and every authenticator in an
// earlier round than any share.
inline bool commit_before_reveal(const DeliveryLog& log, NodeId a, NodeId b) {
  auto first_round = [&](auto pred) {
    std::optional<int> r;
    for (const auto& rec : log.records()) {
      if (pred(rec)) {
        r = rec.round;
        break;
      }
    }
    return r;
  };
  auto last_round = [&](auto pred) {
    std::optional<int> r;
    for (const auto& rec : log.records()) {
      if (pred(rec)) r = rec.round;
    }
    return r;
  };
  auto is_bc = [](const DeliveryRecord& r, std::uint8_t type) {
    return r.medium == Medium::Broadcast && !r.payload.empty() && r.payload[0] == type;
  };
  auto first_share = first_round([&](const DeliveryRecord& r) { return is_bc(r, p3_msg::kShare); });
  for (NodeId self : {a, b}) {
    NodeId peer = self == a ? b : a;
    auto commit = last_round([&](const DeliveryRecord& r) { return is_bc(r, p3_msg::kCommit) && r.header.sender == self; });
    auto peer_auth = first_round(
        [&](const DeliveryRecord& r) { return r.medium == Medium::Channel && r.header.sender == peer; });
    auto last_auth = last_round(
        [&](const DeliveryRecord& r) { return r.medium == Medium::Channel && r.header.sender == peer; });
    if (!commit || !peer_auth) return false;
    if (!(*commit < *peer_auth)) return false;
    if (first_share && !(*last_auth < *first_share)) return false;
  }
  return true;
}

}  // namespace phike
