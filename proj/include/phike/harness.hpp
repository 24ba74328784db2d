#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"
#include "phike/channels.hpp"
#include "phike/eke.hpp"
#include "phike/phike.hpp"

namespace phike {

// --- statistics ------------------------------------------------------------

inline double binomial_sigma(double p, std::uint64_t n) {
  return n == 0 ? 0.0 : std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

// Wilson score interval for a binomial proportion.
inline Interval wilson_interval(std::uint64_t successes, std::uint64_t n, double z = 3.0) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (phat + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

// |rate - p| <= k * sigma(p); degenerate p in {0,1} demands an exact match.
inline bool within_sigma(double rate, double p, std::uint64_t n, double k = 3.0) {
  const double sigma = binomial_sigma(p, n);
  if (sigma == 0.0) return rate == p;
  return std::abs(rate - p) <= k * sigma;
}

// 1 - (1 - 2^-t)^q: chance that at least one of q independent guesses at a
// t-bit value succeeds.
inline double guess_bound(unsigned t_bits, std::uint64_t q_send) {
  if (q_send == 0) return 0.0;
  const double miss = 1.0 - std::ldexp(1.0, -static_cast<int>(t_bits));
  return 1.0 - std::pow(miss, static_cast<double>(q_send));
}

// --- oracle model ----------------------------------------------------------

struct InstanceRef {
  NodeId principal;
  std::uint32_t index = 0;
  friend bool operator==(const InstanceRef&, const InstanceRef&) = default;
};

struct SendResult {
  std::vector<BroadcastMsg> broadcasts;  // everything the linked devices put on the network
  std::vector<ChannelMsg> observed;      // channel traffic, if the channel is not private
  PartyStatus status = PartyStatus::Running;
};

struct ExecuteResult {
  std::vector<DeliveryRecord> messages;  // private-channel traffic withheld
  bool client_accepted = false;
  bool server_accepted = false;
};

struct InstanceOracle;

// Two linked devices (or one, for unlinked EKE targets) sharing a world in
// which the adversary owns the broadcast network.
struct OracleSession {
  World world;
  std::vector<BroadcastMsg> outbox;
  std::vector<ChannelMsg> observed;
  bool executing = false;
  std::vector<InstanceOracle*> members;
  std::optional<ChannelId> channel;
};

struct InstanceOracle {
  NodeId principal;
  std::uint32_t index = 0;
  Role role;
  std::unique_ptr<Party> party;
  std::shared_ptr<OracleSession> session;
  std::optional<InstanceRef> partner;
  bool started = false;
  bool revealed = false;
  bool tested = false;

  InstanceRef ref() const { return {principal, index}; }
};

// Instances, the Send/Execute/Reveal/Test oracles and the hidden Test bit.
class OracleExperiment {
 public:
  OracleExperiment(Protocol protocol, HashConfig cfg, std::uint64_t seed)
      : protocol_(protocol), cfg_(std::move(cfg)), rng_(seed) {
    test_bit_ = rng_.coin();
  }

  Protocol protocol() const { return protocol_; }
  const HashConfig& config() const { return cfg_; }

  NodeId new_principal() { return NodeId{next_principal_++}; }

  InstanceRef new_instance(NodeId principal, Role role) {
    std::uint32_t idx = 0;
    for (const auto& i : instances_) {
      if (i.principal == principal) idx = std::max(idx, i.index + 1);
    }
    InstanceOracle inst;
    inst.principal = principal;
    inst.index = idx;
    inst.role = role;
    instances_.push_back(std::move(inst));
    return instances_.back().ref();
  }

  // Joins the devices of a client and a server instance with the protocol's
  // low-bandwidth channel (for Eke: hands both a fresh shared password).
  void link(InstanceRef client, InstanceRef server) {
    InstanceOracle& c = get(client);
    InstanceOracle& s = get(server);
    if (c.session || s.session) throw ConstraintViolation("instance already linked");
    if (!c.role.is_client() || s.role.is_client()) throw ConstraintViolation("link expects (client, server)");
    auto sess = std::make_shared<OracleSession>();
    OracleSession* sp = sess.get();
    AdversaryHooks hooks;
    hooks.on_broadcast = [sp](const BroadcastMsg& m) -> std::vector<BroadcastMsg> {
      if (sp->executing) return {m};
      sp->outbox.push_back(m);
      return {};
    };
    hooks.on_channel = [sp](const ChannelMsg& m) { sp->observed.push_back(m); };
    sess->world.set_adversary(std::move(hooks));

    const std::uint64_t seed_c = rng_.next_u64();
    const std::uint64_t seed_s = rng_.next_u64();
    if (protocol_ == Protocol::Eke) {
      Password pw = Password::random(cfg_.cap_bits(), rng_);
      c.party = std::make_unique<MachineParty<EkeMachine>>(EkeMachine(Role::client(), pw, cfg_),
                                                           Wiring{c.principal, s.principal, std::nullopt}, seed_c);
      s.party = std::make_unique<MachineParty<EkeMachine>>(EkeMachine(Role::server(), pw, cfg_),
                                                           Wiring{s.principal, c.principal, std::nullopt}, seed_s);
    } else {
      ChannelSpec spec = channel_spec_for(protocol_, cfg_.cap_bits());
      sess->channel = sess->world.add_channel(spec, c.principal, s.principal);
      c.party = make_party(protocol_, Role::client(), cfg_, {c.principal, s.principal, sess->channel}, seed_c);
      s.party = make_party(protocol_, Role::server(), cfg_, {s.principal, c.principal, sess->channel}, seed_s);
    }
    c.session = sess;
    s.session = sess;
    c.partner = server;
    s.partner = client;
    sess->members = {&c, &s};
  }

  // Send(p, i, m): deliver m (or start the instance when m is empty) and
  // return every output the linked devices produce until they go quiet.
  SendResult send(InstanceRef r, std::optional<BroadcastMsg> m = std::nullopt) {
    ++send_queries_;
    InstanceOracle& inst = linked(r);
    OracleSession& sess = *inst.session;
    if (sess.executing) throw ConstraintViolation("session is being executed");
    const std::size_t out_before = sess.outbox.size();
    const std::size_t obs_before = sess.observed.size();
    if (m) {
      m->header.receiver = inst.principal;
      sess.world.net().inject(std::move(*m));
    }
    inst.started = true;
    drive(sess);
    SendResult res;
    res.broadcasts.assign(sess.outbox.begin() + static_cast<std::ptrdiff_t>(out_before), sess.outbox.end());
    res.observed.assign(sess.observed.begin() + static_cast<std::ptrdiff_t>(obs_before), sess.observed.end());
    res.status = inst.party->status();
    return res;
  }

  // Adversary insertion on the instance's low-bandwidth channel. Throws
  // InjectionForbidden on authentic channels.
  void inject_channel(InstanceRef to, const ShortString& payload) {
    InstanceOracle& inst = linked(to);
    if (!inst.session->channel) throw ChannelError("instance has no low-bandwidth channel");
    inst.session->world.channel(*inst.session->channel).inject(inst.principal, payload);
  }

  // Execute(p, i, q, j): honest run between two fresh linked instances.
  ExecuteResult execute(InstanceRef client, InstanceRef server) {
    InstanceOracle& c = get(client);
    InstanceOracle& s = get(server);
    if (!c.session) link(client, server);
    if (c.session != s.session) throw ConstraintViolation("instances are not linked to each other");
    if (c.started || s.started) throw ConstraintViolation("execute needs fresh instances");
    OracleSession& sess = *c.session;
    const std::size_t log_before = sess.world.log().records().size();
    sess.executing = true;
    c.started = s.started = true;
    Party* parties[] = {c.party.get(), s.party.get()};
    run_schedule(sess.world, parties, 32);
    sess.executing = false;

    ExecuteResult res;
    const bool hide_channel =
        sess.channel && sess.world.channel(*sess.channel).spec().is_private;
    const auto& recs = sess.world.log().records();
    for (std::size_t i = log_before; i < recs.size(); ++i) {
      if (recs[i].medium == Medium::Channel && hide_channel) continue;
      res.messages.push_back(recs[i]);
    }
    res.client_accepted = c.party->accepted();
    res.server_accepted = s.party->accepted();
    return res;
  }

  SessionKey reveal(InstanceRef r) {
    InstanceOracle& inst = get(r);
    if (!inst.party || !inst.party->accepted()) throw ConstraintViolation("instance holds no session key");
    if (inst.tested) throw ConstraintViolation("cannot reveal the tested instance");
    for (const auto* p : paired_with(inst)) {
      if (p->tested) throw ConstraintViolation("cannot reveal the partner of the tested instance");
    }
    inst.revealed = true;
    return *inst.party->key();
  }

  // Test(p, i): the real key when the hidden bit is 1, otherwise a uniform
  // sigma-bit string. Once per experiment.
  SessionKey test(InstanceRef r) {
    if (test_used_) throw ConstraintViolation("Test may be called only once");
    InstanceOracle& inst = get(r);
    if (!inst.party || !inst.party->accepted()) throw ConstraintViolation("instance holds no session key");
    if (inst.revealed) throw ConstraintViolation("Test on a revealed instance");
    for (const auto* p : paired_with(inst)) {
      if (p->revealed) throw ConstraintViolation("Test on an instance whose partner was revealed");
    }
    test_used_ = true;
    inst.tested = true;
    if (test_bit_) return *inst.party->key();
    const unsigned sigma = cfg_.sigma_bits();
    return SessionKey(rng_.bytes((sigma + 7) / 8), sigma);
  }

  bool test_called() const { return test_used_; }
  std::uint64_t send_queries() const { return send_queries_; }

  // Referee view, not for strategies.
  bool hidden_bit() const { return test_bit_; }
  const Party& party(InstanceRef r) { return *linked(r).party; }
  bool paired(InstanceRef a, InstanceRef b) {
    const InstanceOracle& x = get(a);
    const InstanceOracle& y = get(b);
    return x.party && y.party && pairing_check(x.party->trace(), y.party->trace());
  }

 private:
  InstanceOracle& get(InstanceRef r) {
    for (auto& i : instances_) {
      if (i.ref() == r) return i;
    }
    throw UnknownInstance("no instance " + std::to_string(r.principal.value) + ":" + std::to_string(r.index));
  }

  InstanceOracle& linked(InstanceRef r) {
    InstanceOracle& inst = get(r);
    if (!inst.session) throw ConstraintViolation("instance is not linked");
    return inst;
  }

  std::vector<const InstanceOracle*> paired_with(const InstanceOracle& inst) const {
    std::vector<const InstanceOracle*> out;
    if (!inst.party || inst.party->trace().empty()) return out;
    for (const auto& other : instances_) {
      if (&other == &inst || !other.party || other.party->trace().empty()) continue;
      if (pairing_check(inst.party->trace(), other.party->trace())) out.push_back(&other);
    }
    return out;
  }

  static std::size_t progress_marker(const OracleSession& s) {
    std::size_t n = s.world.log().records().size();
    for (const auto* m : s.members) n += m->party->trace().entries().size();
    return n;
  }

  static void drive(OracleSession& s) {
    for (int i = 0; i < 32; ++i) {
      const std::size_t before = progress_marker(s);
      for (auto* m : s.members) {
        if (m->started && !m->party->finished()) m->party->step(s.world);
      }
      s.world.flush();
      if (progress_marker(s) == before && s.world.idle()) break;
    }
  }

  Protocol protocol_;
  HashConfig cfg_;
  Rng rng_;
  bool test_bit_ = false;
  bool test_used_ = false;
  std::uint64_t send_queries_ = 0;
  std::uint32_t next_principal_ = 0;
  std::deque<InstanceOracle> instances_;
};

// --- adversary strategies --------------------------------------------------

enum class StrategyKind {
  Distinguishing,  // success = correct guess of the Test bit; bound 1/2
  Active,          // success = an honest instance accepted a key the adversary knows
};

struct AttackParams {
  std::uint64_t q_send = 1;  // guessing sessions (Send-driven impersonation attempts)
};

struct StrategyOutcome {
  bool guess = false;
  bool compromised = false;
  // 1-based index of the first successful session, 0 if none.
  std::uint64_t first_success = 0;
  std::vector<bool> session_success;
};

class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual std::string name() const = 0;
  virtual StrategyKind kind() const = 0;
  virtual bool supports(Protocol p) const = 0;
  // Analytic success probability used as the reference value.
  virtual double bound(unsigned /*t_bits*/, std::uint64_t /*q_send*/) const { return 0.5; }
  virtual StrategyOutcome play(OracleExperiment& exp, Rng& rng, const AttackParams& params) = 0;
};

namespace detail {

inline std::optional<BroadcastMsg> find_msg(const std::vector<BroadcastMsg>& msgs, NodeId sender, std::uint8_t type) {
  for (const auto& m : msgs) {
    if (m.header.sender == sender && !m.payload.empty() && m.payload[0] == type) return m;
  }
  return std::nullopt;
}

inline BroadcastMsg forged(NodeId claimed_sender, NodeId receiver, std::uint8_t type, const Bytes& body) {
  return {{claimed_sender, receiver}, phike::detail::framed(type, body)};
}

inline std::vector<GroupElement> elements_in(const Group& g, const std::vector<DeliveryRecord>& msgs) {
  std::vector<GroupElement> out;
  for (const auto& m : msgs) {
    if (m.medium != Medium::Broadcast || m.payload.size() != g.encoding_length() + 1) continue;
    try {
      out.push_back(decode_element(g, Bytes(m.payload.begin() + 1, m.payload.end())));
    } catch (const DecodeError&) {
    }
  }
  return out;
}

// Execute a fresh client/server pair, returning the two instances.
inline std::pair<InstanceRef, InstanceRef> executed_pair(OracleExperiment& exp, ExecuteResult& out) {
  InstanceRef a = exp.new_instance(exp.new_principal(), Role::client());
  InstanceRef b = exp.new_instance(exp.new_principal(), Role::server());
  exp.link(a, b);
  out = exp.execute(a, b);
  return {a, b};
}

// Runs an EKE client with `guess` against server instance `victim` whose
// masked share is `victim_share`. Returns the adversary's key if the victim
// accepted.
inline std::optional<SessionKey> eke_impersonate(OracleExperiment& exp, InstanceRef victim, NodeId claimed,
                                                 const BroadcastMsg& victim_share, const Password& guess, Rng& rng) {
  EkeMachine adv(Role::client(), guess, exp.config());
  Actions first = adv.start(rng);
  SendResult r = exp.send(victim, BroadcastMsg{{claimed, victim.principal}, first.at(0).payload});
  auto server_confirm = find_msg(r.broadcasts, victim.principal, eke_msg::kConfirmServer);
  Actions confirm = adv.receive(Incoming::broadcast(victim_share.payload), rng);
  if (r.status == PartyStatus::Aborted || confirm.empty()) return std::nullopt;
  r = exp.send(victim, BroadcastMsg{{claimed, victim.principal}, confirm.at(0).payload});
  if (r.status != PartyStatus::Accepted) return std::nullopt;
  if (!server_confirm) return std::nullopt;
  adv.receive(Incoming::broadcast(server_confirm->payload), rng);
  return adv.key();
}

// Test the compromised instance (exact answer) or, failing that, guess.
inline bool finish_with_test(OracleExperiment& exp, const std::optional<std::pair<InstanceRef, SessionKey>>& known,
                             Rng& rng) {
  if (!known) return rng.coin();
  SessionKey v = exp.test(known->first);
  return v == known->second;
}

}  // namespace detail

// Guesses the Test bit by a coin flip after an Execute.
class RandomGuessStrategy : public Strategy {
 public:
  std::string name() const override { return "random"; }
  StrategyKind kind() const override { return StrategyKind::Distinguishing; }
  bool supports(Protocol) const override { return true; }
  StrategyOutcome play(OracleExperiment& exp, Rng& rng, const AttackParams&) override {
    ExecuteResult ex;
    auto [a, b] = detail::executed_pair(exp, ex);
    if (ex.client_accepted) exp.test(a);
    return {rng.coin(), false, 0, {}};
  }
};

// Passive eavesdropper: after an Execute, compares the Test value with h3 of
// every group element seen on the wire and of every pairwise product.
class PassiveEavesdropStrategy : public Strategy {
 public:
  std::string name() const override { return "passive"; }
  StrategyKind kind() const override { return StrategyKind::Distinguishing; }
  bool supports(Protocol) const override { return true; }
  StrategyOutcome play(OracleExperiment& exp, Rng& rng, const AttackParams&) override {
    ExecuteResult ex;
    auto [a, b] = detail::executed_pair(exp, ex);
    if (!ex.client_accepted) return {rng.coin(), false, 0, {}};
    SessionKey v = exp.test(a);
    const auto elems = detail::elements_in(exp.config().group(), ex.messages);
    for (std::size_t i = 0; i < elems.size(); ++i) {
      if (h3(exp.config(), elems[i]) == v) return {true, false, 0, {}};
      for (std::size_t j = i + 1; j < elems.size(); ++j) {
        if (h3(exp.config(), mul(elems[i], elems[j])) == v) return {true, false, 0, {}};
      }
    }
    return {false, false, 0, {}};
  }
};

// Correlates the first bit of the Test value with the parity of a digest of
// the whole transcript.
class TranscriptHashStrategy : public Strategy {
 public:
  std::string name() const override { return "transcript-hash"; }
  StrategyKind kind() const override { return StrategyKind::Distinguishing; }
  bool supports(Protocol) const override { return true; }
  StrategyOutcome play(OracleExperiment& exp, Rng& rng, const AttackParams&) override {
    ExecuteResult ex;
    auto [a, b] = detail::executed_pair(exp, ex);
    if (!ex.client_accepted) return {rng.coin(), false, 0, {}};
    SessionKey v = exp.test(a);
    Bytes all;
    for (const auto& m : ex.messages) all.insert(all.end(), m.payload.begin(), m.payload.end());
    Digest d = sha256(all);
    const bool parity = (d[0] & 1) != 0;
    const bool first_bit = (v.bytes().at(0) & 0x80) != 0;
    return {parity == first_bit, false, 0, {}};
  }
};

// Man in the middle that forwards every message unchanged via Send. Both
// sides accept with paired traces; the adversary learns nothing an Execute
// would not give it.
class RelayStrategy : public Strategy {
 public:
  std::string name() const override { return "relay"; }
  StrategyKind kind() const override { return StrategyKind::Distinguishing; }
  bool supports(Protocol) const override { return true; }

  // Returns (client, server).
  static std::pair<InstanceRef, InstanceRef> relay_session(OracleExperiment& exp) {
    InstanceRef a = exp.new_instance(exp.new_principal(), Role::client());
    InstanceRef b = exp.new_instance(exp.new_principal(), Role::server());
    exp.link(a, b);
    std::deque<BroadcastMsg> queue;
    auto push = [&](const SendResult& r) {
      for (const auto& m : r.broadcasts) queue.push_back(m);
    };
    push(exp.send(a));
    push(exp.send(b));
    for (int guard = 0; guard < 64 && !queue.empty(); ++guard) {
      BroadcastMsg m = std::move(queue.front());
      queue.pop_front();
      InstanceRef to = m.header.receiver == a.principal ? a : b;
      push(exp.send(to, m));
    }
    return {a, b};
  }

  StrategyOutcome play(OracleExperiment& exp, Rng& rng, const AttackParams&) override {
    auto [a, b] = relay_session(exp);
    if (exp.party(a).accepted()) exp.test(a);
    return {rng.coin(), false, 0, {}};
  }
};

// Reveals the partner of the instance it then tests. The oracle must refuse.
class RevealPairedStrategy : public Strategy {
 public:
  std::string name() const override { return "reveal-paired"; }
  StrategyKind kind() const override { return StrategyKind::Distinguishing; }
  bool supports(Protocol) const override { return true; }
  StrategyOutcome play(OracleExperiment& exp, Rng&, const AttackParams&) override {
    ExecuteResult ex;
    auto [a, b] = detail::executed_pair(exp, ex);
    SessionKey kb = exp.reveal(b);
    SessionKey v = exp.test(a);
    return {v == kb, false, 0, {}};
  }
};

// Prot3 impersonation of the client toward a fresh server instance per
// session: commit h1(g^a) in the client's name, then reveal g^a and hope
// h2(g^a) equals the real client's authenticator.
class SubstituteStrategy : public Strategy {
 public:
  std::string name() const override { return "substitute"; }
  StrategyKind kind() const override { return StrategyKind::Active; }
  bool supports(Protocol p) const override { return p == Protocol::P3; }
  double bound(unsigned t_bits, std::uint64_t q_send) const override { return guess_bound(t_bits, q_send); }

  StrategyOutcome play(OracleExperiment& exp, Rng& rng, const AttackParams& params) override {
    StrategyOutcome out;
    std::optional<std::pair<InstanceRef, SessionKey>> known;
    const NodeId alice = exp.new_principal();
    const NodeId bob = exp.new_principal();
    for (std::uint64_t s = 1; s <= params.q_send; ++s) {
      auto key = attempt(exp, alice, bob, rng);
      out.session_success.push_back(key.has_value());
      if (key && !known) {
        known = key;
        out.first_success = s;
        if (stop_on_success_) break;
      }
    }
    out.compromised = known.has_value();
    out.guess = detail::finish_with_test(exp, known, rng);
    return out;
  }

  // Keep running every session after a success (for independence checks).
  void set_stop_on_success(bool v) { stop_on_success_ = v; }

  // One impersonation session. Returns the victim instance and the key it
  // accepted, if the guess hit.
  static std::optional<std::pair<InstanceRef, SessionKey>> attempt(OracleExperiment& exp, NodeId alice, NodeId bob,
                                                                    Rng& rng) {
    const HashConfig& cfg = exp.config();
    const Group& g = cfg.group();
    InstanceRef a = exp.new_instance(alice, Role::client());
    InstanceRef b = exp.new_instance(bob, Role::server());
    exp.link(a, b);
    exp.send(a);
    SendResult rb = exp.send(b);
    auto commit_b = detail::find_msg(rb.broadcasts, bob, p3_msg::kCommit);
    if (!commit_b) return std::nullopt;

    const Scalar own = random_scalar(g, rng);
    const GroupElement ga = phike::exp(g.generator(), own);
    exp.send(b, detail::forged(alice, bob, p3_msg::kCommit, encode_element(h1(cfg, ga))));
    SendResult ra = exp.send(a, *commit_b);
    auto share_b = detail::find_msg(ra.broadcasts, bob, p3_msg::kShare);
    if (!share_b) return std::nullopt;

    SendResult r = exp.send(b, detail::forged(alice, bob, p3_msg::kShare, encode_element(ga)));
    if (r.status == PartyStatus::Aborted) return std::nullopt;

    const GroupElement gy = decode_element(g, Bytes(share_b->payload.begin() + 1, share_b->payload.end()));
    const GroupElement z = phike::exp(gy, own);
    r = exp.send(b, detail::forged(alice, bob, p3_msg::kValidator, h4(cfg, z).bytes()));
    if (r.status != PartyStatus::Accepted) return std::nullopt;
    return std::make_pair(b, h3(cfg, z));
  }

 private:
  bool stop_on_success_ = true;
};

// Prot3 two-sided man in the middle: substitutes its own shares toward both
// devices. Succeeds only if both authenticator guesses hit; both then accept
// different keys and their traces are not paired.
class MitmStrategy : public Strategy {
 public:
  std::string name() const override { return "mitm"; }
  StrategyKind kind() const override { return StrategyKind::Active; }
  bool supports(Protocol p) const override { return p == Protocol::P3; }
  double bound(unsigned t_bits, std::uint64_t q_send) const override { return guess_bound(2 * t_bits, q_send); }

  struct Session {
    InstanceRef client, server;
    bool both_accepted = false;
    std::optional<SessionKey> client_key, server_key;  // adversary's copies
  };

  static Session attempt(OracleExperiment& exp, Rng& rng) {
    const HashConfig& cfg = exp.config();
    const Group& g = cfg.group();
    const NodeId alice = exp.new_principal();
    const NodeId bob = exp.new_principal();
    Session s;
    s.client = exp.new_instance(alice, Role::client());
    s.server = exp.new_instance(bob, Role::server());
    exp.link(s.client, s.server);
    SendResult ra = exp.send(s.client);
    SendResult rb = exp.send(s.server);

    const Scalar to_bob = random_scalar(g, rng);    // share shown to Bob as Alice's
    const Scalar to_alice = random_scalar(g, rng);  // share shown to Alice as Bob's
    const GroupElement gb_side = phike::exp(g.generator(), to_bob);
    const GroupElement ga_side = phike::exp(g.generator(), to_alice);

    exp.send(s.server, detail::forged(alice, bob, p3_msg::kCommit, encode_element(h1(cfg, gb_side))));
    SendResult r = exp.send(s.client, detail::forged(bob, alice, p3_msg::kCommit, encode_element(h1(cfg, ga_side))));
    std::vector<BroadcastMsg> seen = r.broadcasts;
    auto share_a = detail::find_msg(seen, alice, p3_msg::kShare);
    auto share_b = detail::find_msg(seen, bob, p3_msg::kShare);
    if (!share_a || !share_b) return s;

    SendResult rs = exp.send(s.server, detail::forged(alice, bob, p3_msg::kShare, encode_element(gb_side)));
    SendResult rc = exp.send(s.client, detail::forged(bob, alice, p3_msg::kShare, encode_element(ga_side)));
    if (rs.status == PartyStatus::Aborted || rc.status == PartyStatus::Aborted) return s;

    const GroupElement gx = decode_element(g, Bytes(share_a->payload.begin() + 1, share_a->payload.end()));
    const GroupElement gy = decode_element(g, Bytes(share_b->payload.begin() + 1, share_b->payload.end()));
    const GroupElement z_bob = phike::exp(gy, to_bob);
    const GroupElement z_alice = phike::exp(gx, to_alice);
    rs = exp.send(s.server, detail::forged(alice, bob, p3_msg::kValidator, h4(cfg, z_bob).bytes()));
    rc = exp.send(s.client, detail::forged(bob, alice, p3_msg::kValidator, h5(cfg, z_alice).bytes()));
    s.both_accepted = rs.status == PartyStatus::Accepted && rc.status == PartyStatus::Accepted;
    if (s.both_accepted) {
      s.server_key = h3(cfg, z_bob);
      s.client_key = h3(cfg, z_alice);
    }
    return s;
  }

  StrategyOutcome play(OracleExperiment& exp, Rng& rng, const AttackParams& params) override {
    StrategyOutcome out;
    std::optional<std::pair<InstanceRef, SessionKey>> known;
    for (std::uint64_t i = 1; i <= params.q_send; ++i) {
      Session s = attempt(exp, rng);
      out.session_success.push_back(s.both_accepted);
      if (s.both_accepted) {
        known = std::make_pair(s.server, *s.server_key);
        out.first_success = i;
        break;
      }
    }
    out.compromised = known.has_value();
    out.guess = detail::finish_with_test(exp, known, rng);
    return out;
  }
};

// Header-forging injector against Prot3: commits to one share in the
// client's name but reveals a different one. Only an h1 collision would get
// it accepted.
class ForgeStrategy : public Strategy {
 public:
  std::string name() const override { return "forge"; }
  StrategyKind kind() const override { return StrategyKind::Active; }
  bool supports(Protocol p) const override { return p == Protocol::P3; }
  double bound(unsigned, std::uint64_t) const override { return 0.0; }

  StrategyOutcome play(OracleExperiment& exp, Rng& rng, const AttackParams& params) override {
    StrategyOutcome out;
    const HashConfig& cfg = exp.config();
    const Group& g = cfg.group();
    const NodeId alice = exp.new_principal();
    const NodeId bob = exp.new_principal();
    for (std::uint64_t i = 1; i <= params.q_send; ++i) {
      InstanceRef a = exp.new_instance(alice, Role::client());
      InstanceRef b = exp.new_instance(bob, Role::server());
      exp.link(a, b);
      exp.send(a);
      SendResult rb = exp.send(b);
      const GroupElement committed = phike::exp(g.generator(), random_scalar(g, rng));
      exp.send(b, detail::forged(alice, bob, p3_msg::kCommit, encode_element(h1(cfg, committed))));
      if (auto commit_b = detail::find_msg(rb.broadcasts, bob, p3_msg::kCommit)) exp.send(a, *commit_b);
      const GroupElement revealed = phike::exp(g.generator(), random_scalar(g, rng));
      SendResult r = exp.send(b, detail::forged(alice, bob, p3_msg::kShare, encode_element(revealed)));
      const bool ok = r.status != PartyStatus::Aborted;
      out.session_success.push_back(ok);
      if (ok && out.first_success == 0) out.first_success = i;
    }
    out.compromised = out.first_success != 0;
    out.guess = rng.coin();
    return out;
  }
};

// Online password guessing, one guess per session:
//   p1 / eke - run EKE in the client's name with a uniformly guessed password;
//   p2       - inject an own password on the (non-authentic) private channel
//              and guess the server's password, which it never sees.
class GuessStrategy : public Strategy {
 public:
  std::string name() const override { return "guess"; }
  StrategyKind kind() const override { return StrategyKind::Active; }
  bool supports(Protocol p) const override { return p == Protocol::P1 || p == Protocol::P2 || p == Protocol::Eke; }
  double bound(unsigned t_bits, std::uint64_t q_send) const override { return guess_bound(t_bits, q_send); }

  static std::optional<std::pair<InstanceRef, SessionKey>> attempt(OracleExperiment& exp, Rng& rng) {
    const unsigned t = exp.config().cap_bits();
    const NodeId alice = exp.new_principal();
    const NodeId bob = exp.new_principal();
    InstanceRef a = exp.new_instance(alice, Role::client());
    InstanceRef b = exp.new_instance(bob, Role::server());
    exp.link(a, b);

    std::optional<Password> guess;
    SendResult rb;
    switch (exp.protocol()) {
      case Protocol::P1:
        exp.send(a);  // the real client hands its password to the server device
        rb = exp.send(b);
        guess = Password::random(t, rng);
        break;
      case Protocol::P2: {
        const std::uint64_t mine = rng.bits(t);
        exp.inject_channel(b, ShortString(mine, t));
        rb = exp.send(b);
        guess = Password(mine ^ rng.bits(t), t);
        break;
      }
      case Protocol::Eke:
        rb = exp.send(b);
        guess = Password::random(t, rng);
        break;
      default:
        throw ParamError("guess strategy does not support this protocol");
    }
    auto share = detail::find_msg(rb.broadcasts, bob, eke_msg::kMaskedShare);
    if (!share) return std::nullopt;
    auto key = detail::eke_impersonate(exp, b, alice, *share, *guess, rng);
    if (!key) return std::nullopt;
    return std::make_pair(b, *key);
  }

  StrategyOutcome play(OracleExperiment& exp, Rng& rng, const AttackParams& params) override {
    StrategyOutcome out;
    std::optional<std::pair<InstanceRef, SessionKey>> known;
    for (std::uint64_t i = 1; i <= params.q_send; ++i) {
      auto k = attempt(exp, rng);
      out.session_success.push_back(k.has_value());
      if (k) {
        known = k;
        out.first_success = i;
        break;
      }
    }
    out.compromised = known.has_value();
    out.guess = detail::finish_with_test(exp, known, rng);
    return out;
  }
};

inline std::unique_ptr<Strategy> make_strategy(std::string_view name) {
  if (name == "random") return std::make_unique<RandomGuessStrategy>();
  if (name == "passive") return std::make_unique<PassiveEavesdropStrategy>();
  if (name == "transcript-hash") return std::make_unique<TranscriptHashStrategy>();
  if (name == "relay") return std::make_unique<RelayStrategy>();
  if (name == "reveal-paired") return std::make_unique<RevealPairedStrategy>();
  if (name == "substitute") return std::make_unique<SubstituteStrategy>();
  if (name == "mitm") return std::make_unique<MitmStrategy>();
  if (name == "forge") return std::make_unique<ForgeStrategy>();
  if (name == "guess") return std::make_unique<GuessStrategy>();
  throw ParamError("unknown strategy: " + std::string(name));
}

inline std::vector<std::string> strategy_names() {
  return {"random", "passive", "transcript-hash", "relay", "reveal-paired", "substitute", "mitm", "forge", "guess"};
}

// Transcript-only strategies: they see an Execute transcript and nothing else.
inline std::vector<std::string> transcript_only_strategy_names() { return {"random", "passive", "transcript-hash"}; }

// --- experiments -----------------------------------------------------------

struct ExperimentReport {
  std::string protocol;
  std::string strategy;
  unsigned t_bits = 0;
  unsigned s_bits = 0;  // session key length sigma
  std::uint64_t q_send = 0;
  std::uint64_t trials = 0;
  std::uint64_t successes = 0;
  std::uint64_t correct_guesses = 0;
  double empirical_rate = 0.0;
  double analytic_bound = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  double advantage = 0.0;  // 2 Pr[correct Test guess] - 1
  double advantage_sigma = 0.0;
  std::uint64_t seed = 0;

  bool within_tolerance(double k = 3.0) const { return within_sigma(empirical_rate, analytic_bound, trials, k); }

  nlohmann::json to_json() const {
    return {{"protocol", protocol},   {"strategy", strategy},   {"t", t_bits},
            {"s", s_bits},            {"q_send", q_send},       {"trials", trials},
            {"successes", successes}, {"rate", empirical_rate}, {"bound", analytic_bound},
            {"ci_low", ci_low},       {"ci_high", ci_high},     {"advantage", advantage},
            {"seed", seed}};
  }
};

struct TrialRecord {
  StrategyOutcome outcome;
  bool correct = false;
};

// Runs `trials` independent experiments; trial i uses seed derive_seed(seed, i)
// so it can be replayed alone. Work is split over `parallel` threads and
// merged by trial index.
inline std::vector<TrialRecord> run_trials(const Strategy& proto_strategy, Protocol protocol, const HashConfig& cfg,
                                           std::uint64_t trials, std::uint64_t seed, const AttackParams& params,
                                           unsigned parallel, const std::function<std::unique_ptr<Strategy>()>& clone) {
  if (!proto_strategy.supports(protocol)) {
    throw ParamError("strategy " + proto_strategy.name() + " does not apply to " + protocol_name(protocol));
  }
  std::vector<TrialRecord> records(trials);
  const unsigned workers = std::max(1u, std::min<unsigned>(parallel, static_cast<unsigned>(std::max<std::uint64_t>(trials, 1))));
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](unsigned w) {
    try {
      auto strategy = clone();
      for (std::uint64_t i = w; i < trials; i += workers) {
        const std::uint64_t trial_seed = derive_seed(seed, i);
        OracleExperiment exp(protocol, cfg, derive_seed(trial_seed, 0));
        Rng rng(derive_seed(trial_seed, 1));
        StrategyOutcome o = strategy->play(exp, rng, params);
        const bool correct = o.guess == exp.hidden_bit();
        records[i] = {std::move(o), correct};
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return records;
}

inline ExperimentReport summarize(const Strategy& strategy, Protocol protocol, const HashConfig& cfg,
                                  const std::vector<TrialRecord>& records, std::uint64_t seed, std::uint64_t q_limit) {
  ExperimentReport rep;
  rep.protocol = protocol_name(protocol);
  rep.strategy = strategy.name();
  rep.t_bits = cfg.cap_bits();
  rep.s_bits = cfg.sigma_bits();
  rep.q_send = q_limit;
  rep.trials = records.size();
  rep.seed = seed;
  for (const auto& r : records) {
    rep.correct_guesses += r.correct ? 1 : 0;
    if (strategy.kind() == StrategyKind::Distinguishing) {
      rep.successes += r.correct ? 1 : 0;
    } else if (r.outcome.first_success != 0 && r.outcome.first_success <= q_limit) {
      rep.successes += 1;
    }
  }
  const double n = static_cast<double>(std::max<std::uint64_t>(rep.trials, 1));
  rep.empirical_rate = static_cast<double>(rep.successes) / n;
  rep.analytic_bound = strategy.kind() == StrategyKind::Distinguishing ? 0.5 : strategy.bound(cfg.cap_bits(), q_limit);
  Interval ci = wilson_interval(rep.successes, rep.trials, 3.0);
  rep.ci_low = ci.low;
  rep.ci_high = ci.high;
  rep.advantage = 2.0 * static_cast<double>(rep.correct_guesses) / n - 1.0;
  rep.advantage_sigma = 2.0 * binomial_sigma(0.5, rep.trials);
  return rep;
}

inline ExperimentReport estimate_advantage(std::string_view strategy_name, Protocol protocol, const HashConfig& cfg,
                                           std::uint64_t trials, std::uint64_t seed, AttackParams params = {},
                                           unsigned parallel = 1) {
  if (trials < 1) throw ParamError("trials must be at least 1");
  auto strategy = make_strategy(strategy_name);
  auto clone = [&] { return make_strategy(strategy_name); };
  auto records = run_trials(*strategy, protocol, cfg, trials, seed, params, parallel, clone);
  return summarize(*strategy, protocol, cfg, records, seed, params.q_send);
}

// Multi-guess success against Prot3 for each q in q_send_values. One pass
// with the largest q; the point for q counts trials whose first success came
// within q sessions, so the curve is monotone by construction.
inline std::vector<ExperimentReport> guess_success_curve(const HashConfig& cfg,
                                                         const std::vector<std::uint64_t>& q_send_values,
                                                         std::uint64_t trials_per_point, std::uint64_t seed,
                                                         unsigned parallel = 1, std::string_view strategy_name = "substitute",
                                                         Protocol protocol = Protocol::P3) {
  if (cfg.cap_bits() > 8) throw ParamError("guess_success_curve is meant for t <= 8");
  std::uint64_t qmax = 0;
  for (auto q : q_send_values) qmax = std::max(qmax, q);
  auto strategy = make_strategy(strategy_name);
  if (strategy->kind() != StrategyKind::Active) throw ParamError("curve needs an active strategy");
  std::vector<TrialRecord> records;
  if (qmax > 0) {
    auto clone = [&] { return make_strategy(strategy_name); };
    records = run_trials(*strategy, protocol, cfg, trials_per_point, seed, {qmax}, parallel, clone);
  }
  std::vector<ExperimentReport> out;
  for (auto q : q_send_values) {
    if (q == 0) {
      ExperimentReport rep = summarize(*strategy, protocol, cfg, {}, seed, 0);
      rep.trials = trials_per_point;
      rep.ci_low = 0.0;
      rep.ci_high = wilson_interval(0, trials_per_point).high;
      out.push_back(rep);
      continue;
    }
    out.push_back(summarize(*strategy, protocol, cfg, records, seed, q));
  }
  return out;
}

}  // namespace phike
