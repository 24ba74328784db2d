#pragma once

#include <compare>
#include <concepts>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "phike/bytes.hpp"
#include "phike/error.hpp"
#include "phike/outcome.hpp"
#include "phike/rng.hpp"

namespace phike {

struct NodeId {
  std::uint32_t value = 0;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

enum class Medium : std::uint8_t { Broadcast, Channel };

inline const char* medium_name(Medium m) { return m == Medium::Broadcast ? "bc" : "ch"; }

enum class ChannelDirection { OneWay, TwoWay };

// Low-bandwidth link between two devices. For OneWay the link runs from the
// first endpoint to the second.
struct ChannelSpec {
  unsigned cap_bits = 1;
  ChannelDirection direction = ChannelDirection::TwoWay;
  bool is_authentic = true;
  bool is_private = false;

  void validate() const {
    if (cap_bits < 1 || cap_bits > 64) throw ParamError("channel capacity must be in [1,64] bits");
    if (!is_authentic && !is_private) throw ParamError("channel must be authentic, private, or both");
  }

  static ChannelSpec authentic(unsigned cap, ChannelDirection d = ChannelDirection::TwoWay) {
    return {cap, d, true, false};
  }
  static ChannelSpec private_only(unsigned cap, ChannelDirection d = ChannelDirection::TwoWay) {
    return {cap, d, false, true};
  }
  static ChannelSpec private_authentic(unsigned cap, ChannelDirection d = ChannelDirection::OneWay) {
    return {cap, d, true, true};
  }
};

struct MsgHeader {
  NodeId sender;
  NodeId receiver;
  friend bool operator==(const MsgHeader&, const MsgHeader&) = default;
};

// Header fields are not authenticated; anyone on the network can write them.
struct BroadcastMsg {
  MsgHeader header;
  Bytes payload;
  friend bool operator==(const BroadcastMsg&, const BroadcastMsg&) = default;
};

struct ChannelMsg {
  NodeId from;
  NodeId to;
  ShortString payload;
};

struct DeliveryRecord {
  int round = 0;
  Medium medium = Medium::Broadcast;
  MsgHeader header;
  Bytes payload;
  unsigned payload_bits = 0;  // channel messages only
  bool tampered = false;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["round"] = round;
    j["medium"] = medium_name(medium);
    j["header"] = {{"from", header.sender.value}, {"to", header.receiver.value}};
    j["payload-hex"] = to_hex(payload);
    if (medium == Medium::Channel) j["bits"] = payload_bits;
    j["tampered"] = tampered;
    return j;
  }
};

class DeliveryLog {
 public:
  int round() const { return round_; }
  void advance() { ++round_; }
  void add(DeliveryRecord r) {
    r.round = round_;
    records_.push_back(std::move(r));
  }
  const std::vector<DeliveryRecord>& records() const { return records_; }

  // One JSON object per line, in delivery order.
  std::string jsonl() const {
    std::string out;
    for (const auto& r : records_) {
      out += r.to_json().dump();
      out += '\n';
    }
    return out;
  }

 private:
  int round_ = 1;
  std::vector<DeliveryRecord> records_;
};

class World;

struct AdversaryHooks {
  // Decides the delivered version(s) of each broadcast; empty result drops
  // it. Unset means faithful FIFO delivery.
  std::function<std::vector<BroadcastMsg>(const BroadcastMsg&)> on_broadcast;
  // Eavesdropper on the low-bandwidth channel. Never invoked for private
  // channels.
  std::function<void(const ChannelMsg&)> on_channel;
  // Runs after every round's deliveries; the place to inject messages.
  std::function<void(World&)> on_round;
};

class BroadcastNet {
 public:
  explicit BroadcastNet(DeliveryLog& log) : log_(&log) {}

  // Queued until the end of the round, when the adversary decides delivery.
  void send(BroadcastMsg msg) { pending_.push_back(std::move(msg)); }

  // Adversary insertion, delivered immediately.
  void inject(BroadcastMsg msg) { deliver(std::move(msg), true); }

  // Non-blocking: first queued message addressed to `me` (and claiming to be
  // from `from_filter`, if given).
  std::optional<BroadcastMsg> recv(NodeId me, std::optional<NodeId> from_filter = std::nullopt) {
    for (auto it = inbox_.begin(); it != inbox_.end(); ++it) {
      if (it->header.receiver != me) continue;
      if (from_filter && it->header.sender != *from_filter) continue;
      BroadcastMsg m = std::move(*it);
      inbox_.erase(it);
      return m;
    }
    return std::nullopt;
  }

  void flush(const AdversaryHooks& hooks) {
    std::vector<BroadcastMsg> batch;
    batch.swap(pending_);
    for (auto& msg : batch) {
      if (!hooks.on_broadcast) {
        deliver(std::move(msg), false);
        continue;
      }
      for (auto& out : hooks.on_broadcast(msg)) {
        bool tampered = !(out == msg);
        deliver(std::move(out), tampered);
      }
    }
  }

  bool idle() const { return pending_.empty(); }

 private:
  void deliver(BroadcastMsg msg, bool tampered) {
    log_->add({0, Medium::Broadcast, msg.header, msg.payload, 0, tampered});
    inbox_.push_back(std::move(msg));
  }

  DeliveryLog* log_;
  std::vector<BroadcastMsg> pending_;
  std::deque<BroadcastMsg> inbox_;
};

// Reliable, ordered, capacity-limited link between two endpoints.
class LowBandwidthChannel {
 public:
  LowBandwidthChannel(ChannelSpec spec, NodeId a, NodeId b, DeliveryLog& log)
      : spec_(spec), a_(a), b_(b), log_(&log) {
    spec_.validate();
  }

  const ChannelSpec& spec() const { return spec_; }
  NodeId first() const { return a_; }
  NodeId second() const { return b_; }

  bool has_endpoint(NodeId n) const { return n == a_ || n == b_; }
  NodeId peer_of(NodeId n) const { return n == a_ ? b_ : a_; }

  void send(NodeId from, const ShortString& payload, const AdversaryHooks& hooks) {
    if (payload.bits() > spec_.cap_bits) throw CapacityExceeded("payload exceeds channel capacity");
    if (!has_endpoint(from)) throw DirectionViolation("sender is not a channel endpoint");
    if (spec_.direction == ChannelDirection::OneWay && from != a_) {
      throw DirectionViolation("one-way channel does not run from this endpoint");
    }
    ChannelMsg msg{from, peer_of(from), payload};
    if (!spec_.is_private && hooks.on_channel) hooks.on_channel(msg);
    pending_.push_back(msg);
  }

  // Adversary insertion toward `to`; impossible on an authentic channel.
  void inject(NodeId to, const ShortString& payload) {
    if (spec_.is_authentic) throw InjectionForbidden("cannot inject on an authentic channel");
    if (payload.bits() > spec_.cap_bits) throw CapacityExceeded("payload exceeds channel capacity");
    if (!has_endpoint(to)) throw DirectionViolation("target is not a channel endpoint");
    if (spec_.direction == ChannelDirection::OneWay && to != b_) {
      throw DirectionViolation("one-way channel does not deliver to this endpoint");
    }
    deliver({peer_of(to), to, payload}, true);
  }

  std::optional<ShortString> recv(NodeId me) {
    for (auto it = inbox_.begin(); it != inbox_.end(); ++it) {
      if (it->to != me) continue;
      ShortString p = it->payload;
      inbox_.erase(it);
      return p;
    }
    return std::nullopt;
  }

  void flush() {
    std::vector<ChannelMsg> batch;
    batch.swap(pending_);
    for (auto& m : batch) deliver(m, false);
  }

  bool idle() const { return pending_.empty(); }

 private:
  void deliver(ChannelMsg m, bool injected) {
    log_->add({0, Medium::Channel, {m.from, m.to}, m.payload.to_bytes(), m.payload.bits(), injected});
    inbox_.push_back(std::move(m));
  }

  ChannelSpec spec_;
  NodeId a_, b_;
  DeliveryLog* log_;
  std::vector<ChannelMsg> pending_;
  std::deque<ChannelMsg> inbox_;
};

using ChannelId = std::size_t;

// One simulated environment: nodes, the broadcast network, any number of
// low-bandwidth channels and an optional adversary. Single-threaded.
class World {
 public:
  World() : log_(std::make_unique<DeliveryLog>()), net_(std::make_unique<BroadcastNet>(*log_)) {}

  NodeId add_node() { return NodeId{next_node_++}; }

  ChannelId add_channel(ChannelSpec spec, NodeId a, NodeId b) {
    channels_.push_back(std::make_unique<LowBandwidthChannel>(spec, a, b, *log_));
    return channels_.size() - 1;
  }

  LowBandwidthChannel& channel(ChannelId id) {
    if (id >= channels_.size()) throw UnknownInstance("no such channel");
    return *channels_[id];
  }

  BroadcastNet& net() { return *net_; }
  const AdversaryHooks& adversary() const { return hooks_; }
  void set_adversary(AdversaryHooks hooks) { hooks_ = std::move(hooks); }

  int round() const { return log_->round(); }
  const DeliveryLog& log() const { return *log_; }

  void channel_send(ChannelId id, NodeId from, const ShortString& payload) {
    channel(id).send(from, payload, hooks_);
  }

  // End of round: pending broadcasts go through the adversary, channel
  // messages are delivered, then the adversary may inject.
  void flush() {
    net_->flush(hooks_);
    for (auto& c : channels_) c->flush();
    if (hooks_.on_round) hooks_.on_round(*this);
    log_->advance();
  }

  bool idle() const {
    if (!net_->idle()) return false;
    for (const auto& c : channels_) {
      if (!c->idle()) return false;
    }
    return true;
  }

 private:
  std::unique_ptr<DeliveryLog> log_;
  std::unique_ptr<BroadcastNet> net_;
  std::vector<std::unique_ptr<LowBandwidthChannel>> channels_;
  AdversaryHooks hooks_;
  std::uint32_t next_node_ = 0;
};

// --- protocol plumbing -----------------------------------------------------

struct Outgoing {
  Medium medium = Medium::Broadcast;
  Bytes payload;
  ShortString short_payload;

  static Outgoing broadcast(Bytes p) { return {Medium::Broadcast, std::move(p), {}}; }
  static Outgoing channel(ShortString s) { return {Medium::Channel, {}, s}; }
};

struct Incoming {
  Medium medium = Medium::Broadcast;
  Bytes payload;
  ShortString short_payload;

  static Incoming broadcast(Bytes p) { return {Medium::Broadcast, std::move(p), {}}; }
  static Incoming channel(ShortString s) { return {Medium::Channel, {}, s}; }
};

using Actions = std::vector<Outgoing>;

struct TraceEntry {
  bool sent = false;
  Medium medium = Medium::Broadcast;
  Bytes payload;  // channel entries: width byte followed by the value bytes

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

inline Bytes trace_payload(const Outgoing& o) {
  if (o.medium == Medium::Broadcast) return o.payload;
  Bytes b{static_cast<std::uint8_t>(o.short_payload.bits())};
  Bytes v = o.short_payload.to_bytes();
  b.insert(b.end(), v.begin(), v.end());
  return b;
}

inline Bytes trace_payload(const Incoming& i) {
  if (i.medium == Medium::Broadcast) return i.payload;
  return trace_payload(Outgoing::channel(i.short_payload));
}

// Append-only record of everything an instance sent and received.
class Transcript {
 public:
  void record_sent(const Outgoing& o) { entries_.push_back({true, o.medium, trace_payload(o)}); }
  void record_received(const Incoming& i) { entries_.push_back({false, i.medium, trace_payload(i)}); }
  const std::vector<TraceEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<TraceEntry> entries_;
};

// A protocol state machine: emits actions at start, then consumes one
// message at a time from the medium it is currently waiting on.
template <class M>
concept ProtocolMachine = requires(M m, const M cm, const Incoming& in, Rng& rng) {
  { m.start(rng) } -> std::same_as<Actions>;
  { m.receive(in, rng) } -> std::same_as<Actions>;
  { cm.awaiting() } -> std::same_as<std::optional<Medium>>;
  { cm.status() } -> std::same_as<PartyStatus>;
  { cm.key() } -> std::same_as<std::optional<SessionKey>>;
  { cm.abort_reason() } -> std::same_as<AbortReason>;
};

class Party {
 public:
  virtual ~Party() = default;
  virtual void step(World& world) = 0;
  virtual PartyStatus status() const = 0;
  virtual std::optional<SessionKey> key() const = 0;
  virtual AbortReason abort_reason() const = 0;
  virtual const Transcript& trace() const = 0;

  bool finished() const { return status() != PartyStatus::Running; }
  bool accepted() const { return status() == PartyStatus::Accepted; }
};

struct Wiring {
  NodeId self;
  NodeId peer;
  std::optional<ChannelId> channel;
};

// Binds a machine to a node: routes its actions onto the network (headers
// (self, peer)) and feeds it messages addressed to self, claimed from peer.
template <ProtocolMachine M>
class MachineParty : public Party {
 public:
  MachineParty(M machine, Wiring wiring, std::uint64_t seed)
      : machine_(std::move(machine)), wiring_(wiring), rng_(seed) {}

  void step(World& world) override {
    if (!started_) {
      started_ = true;
      emit(world, machine_.start(rng_));
    }
    while (machine_.status() == PartyStatus::Running) {
      auto medium = machine_.awaiting();
      if (!medium) break;
      auto in = fetch(world, *medium);
      if (!in) break;
      trace_.record_received(*in);
      emit(world, machine_.receive(*in, rng_));
    }
  }

  PartyStatus status() const override { return machine_.status(); }
  std::optional<SessionKey> key() const override { return machine_.key(); }
  AbortReason abort_reason() const override { return machine_.abort_reason(); }
  const Transcript& trace() const override { return trace_; }
  bool started() const { return started_; }

  M& machine() { return machine_; }
  const M& machine() const { return machine_; }
  const Wiring& wiring() const { return wiring_; }

 private:
  std::optional<Incoming> fetch(World& world, Medium medium) {
    if (medium == Medium::Broadcast) {
      auto m = world.net().recv(wiring_.self, wiring_.peer);
      if (!m) return std::nullopt;
      return Incoming::broadcast(std::move(m->payload));
    }
    if (!wiring_.channel) return std::nullopt;
    auto s = world.channel(*wiring_.channel).recv(wiring_.self);
    if (!s) return std::nullopt;
    return Incoming::channel(*s);
  }

  void emit(World& world, const Actions& actions) {
    for (const auto& a : actions) {
      if (a.medium == Medium::Broadcast) {
        world.net().send({{wiring_.self, wiring_.peer}, a.payload});
      } else {
        if (!wiring_.channel) throw ChannelError("party has no low-bandwidth channel");
        world.channel_send(*wiring_.channel, wiring_.self, a.short_payload);
      }
      trace_.record_sent(a);
    }
  }

  M machine_;
  Wiring wiring_;
  Rng rng_;
  bool started_ = false;
  Transcript trace_;
};

struct ScheduleResult {
  int rounds = 0;
  bool completed = false;  // false: round budget exceeded (livelock)
};

// Round-robin: every unfinished party steps in registration order, then the
// world flushes. Stops when all parties are finished or the budget runs out.
inline ScheduleResult run_schedule(World& world, std::span<Party* const> parties, int max_rounds = 64) {
  ScheduleResult res;
  for (int r = 0; r < max_rounds; ++r) {
    for (Party* p : parties) {
      if (!p->finished()) p->step(world);
    }
    world.flush();
    ++res.rounds;
    bool all_done = true;
    for (Party* p : parties) all_done = all_done && p->finished();
    if (all_done) {
      res.completed = true;
      return res;
    }
  }
  return res;
}

}  // namespace phike
