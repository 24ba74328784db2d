#include <gtest/gtest.h>

#include "phike/harness.hpp"

using namespace phike;

namespace {

const Group& desk32() {
  static const Group g = Group::desk(32, 1);
  return g;
}

}  // namespace

TEST(Password, Range) {
  EXPECT_THROW(Password(16, 4), ParamError);
  EXPECT_THROW(Password(0, 0), ParamError);
  EXPECT_NO_THROW(Password(15, 4));
  Rng rng(1);
  for (int i = 0; i < 200; ++i) EXPECT_LT(Password::random(5, rng).value(), 32u);
}

TEST(DerivePwKey, DeterministicDistinctAndSized) {
  for (const Group* g : {&desk32(), &Group::standard()}) {
    Bytes m0 = derive_pw_key(Password(0, 4), *g);
    EXPECT_EQ(m0, derive_pw_key(Password(0, 4), *g));
    EXPECT_NE(m0, derive_pw_key(Password(1, 4), *g));
    EXPECT_NE(m0, derive_pw_key(Password(0, 5), *g));
    EXPECT_EQ(m0.size(), g->encoding_length());
  }
  for (std::uint64_t a = 0; a < 16; ++a) {
    for (std::uint64_t b = a + 1; b < 16; ++b) {
      EXPECT_NE(derive_pw_key(Password(a, 4), desk32()), derive_pw_key(Password(b, 4), desk32()));
    }
  }
}

TEST(DerivePwKey, MaskStaysBelowModulusWidth) {
  const std::size_t width = bit_length(desk32().p());
  for (std::uint64_t v = 0; v < 64; ++v) {
    Bytes m = derive_pw_key(Password(v, 6), desk32());
    EXPECT_LE(bit_length(decode_integer(m)), width);
  }
}

TEST(Eke, EqualPasswordsAgree) {
  HashConfig cfg(desk32(), 4, 128);
  EkePairResult r = run_eke_pair(Password(5, 4), Password(5, 4), cfg, 1);
  EXPECT_EQ(r.client_status, PartyStatus::Accepted);
  EXPECT_EQ(r.server_status, PartyStatus::Accepted);
  ASSERT_TRUE(r.client_key);
  EXPECT_EQ(r.client_key, r.server_key);
  EXPECT_EQ(r.client_key->bits(), 128u);
}

TEST(Eke, DifferentPasswordsBothAbort) {
  HashConfig cfg(desk32(), 4, 128);
  EkePairResult r = run_eke_pair(Password(5, 4), Password(6, 4), cfg, 1);
  EXPECT_EQ(r.client_status, PartyStatus::Aborted);
  EXPECT_EQ(r.server_status, PartyStatus::Aborted);
  EXPECT_EQ(r.client_reason, AbortReason::ConfirmationFailed);
  EXPECT_EQ(r.server_reason, AbortReason::ConfirmationFailed);
}

TEST(Eke, CompletenessOverSeeds) {
  HashConfig cfg(desk32(), 8, 128);
  Rng rng(3);
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    Password pw = Password::random(8, rng);
    EkePairResult r = run_eke_pair(pw, pw, cfg, seed);
    ASSERT_EQ(r.client_status, PartyStatus::Accepted) << seed;
    ASSERT_EQ(r.server_status, PartyStatus::Accepted) << seed;
    ASSERT_EQ(r.client_key, r.server_key) << seed;
  }
}

TEST(Eke, SoundnessExhaustiveAtT4) {
  HashConfig cfg(desk32(), 4, 128);
  for (std::uint64_t a = 0; a < 16; ++a) {
    for (std::uint64_t b = 0; b < 16; ++b) {
      EkePairResult r = run_eke_pair(Password(a, 4), Password(b, 4), cfg, a * 16 + b);
      if (a == b) {
        EXPECT_EQ(r.client_status, PartyStatus::Accepted);
        EXPECT_EQ(r.client_key, r.server_key);
      } else {
        EXPECT_EQ(r.client_status, PartyStatus::Aborted) << a << " " << b;
        EXPECT_EQ(r.server_status, PartyStatus::Aborted) << a << " " << b;
      }
    }
  }
}

TEST(Eke, MessageTags) {
  HashConfig cfg(desk32(), 4, 128);
  World world;
  NodeId a = world.add_node(), b = world.add_node();
  MachineParty<EkeMachine> c(EkeMachine(Role::client(), Password(3, 4), cfg), {a, b, std::nullopt}, 1);
  MachineParty<EkeMachine> s(EkeMachine(Role::server(), Password(3, 4), cfg), {b, a, std::nullopt}, 2);
  Party* parties[] = {&c, &s};
  run_schedule(world, parties, 8);
  std::vector<std::uint8_t> tags;
  for (const auto& r : world.log().records()) {
    tags.push_back(r.payload.at(0));
    const std::size_t body = r.payload[0] == eke_msg::kMaskedShare ? desk32().encoding_length() : 16u;
    EXPECT_EQ(r.payload.size(), 1 + body);
  }
  EXPECT_EQ(tags, (std::vector<std::uint8_t>{0x10, 0x10, 0x11, 0x12}));
}

TEST(Eke, MalformedAndUnexpected) {
  HashConfig cfg(desk32(), 4, 128);
  Rng rng(1);
  EkeMachine m(Role::server(), Password(1, 4), cfg);
  m.start(rng);
  m.receive(Incoming::broadcast({eke_msg::kMaskedShare, 1, 2}), rng);
  EXPECT_EQ(m.abort_reason(), AbortReason::Malformed);

  EkeMachine n(Role::server(), Password(1, 4), cfg);
  n.start(rng);
  n.receive(Incoming::broadcast({eke_msg::kConfirmClient, 1, 2}), rng);
  EXPECT_EQ(n.abort_reason(), AbortReason::UnexpectedMessage);
}

TEST(Eke, OnlineGuessRateMatchesTwoToMinusT) {
  HashConfig cfg(desk32(), 4, 128);
  ExperimentReport r = estimate_advantage("guess", Protocol::Eke, cfg, 4000, 2024, {1}, 4);
  EXPECT_DOUBLE_EQ(r.analytic_bound, 1.0 / 16);
  EXPECT_TRUE(r.within_tolerance()) << r.to_json().dump();
}
