// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <thread>

#include "phike/harness.hpp"

using namespace phike;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, const std::string& title, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s -- %s\n", ok ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << std::fixed << v;
  return s.str();
}

const Group& desk32() {
  static const Group g = Group::desk(32, 1);
  return g;
}

// Honest corpus: 1000 runs per protocol, t cycling through 4..16.
struct CorpusRun {
  Protocol protocol;
  unsigned t;
  bool ok;
  bool paired;
  std::string transcript;
  DeliveryLog log;
  NodeId client, server;
};

std::vector<CorpusRun> honest_corpus(std::uint64_t seed) {
  std::vector<CorpusRun> out;
  out.reserve(3000);
  for (Protocol p : {Protocol::P1, Protocol::P2, Protocol::P3}) {
    for (std::uint64_t i = 0; i < 1000; ++i) {
      const unsigned t = 4 + static_cast<unsigned>(i % 13);
      HashConfig cfg(desk32(), t, 128);
      PairingSession s(cfg, {.protocol = p}, derive_seed(seed, i));
      s.run();
      out.push_back({p, t, s.mutual_accept_equal_keys(), pairing_check(s.client().trace(), s.server().trace()),
                     s.world().log().jsonl(), s.world().log(), s.client_id(), s.server_id()});
    }
  }
  return out;
}

void criterion1(const std::vector<CorpusRun>& corpus, double elapsed) {
  int ok = 0, paired = 0;
  for (const auto& r : corpus) {
    ok += r.ok;
    paired += r.paired;
  }
  const bool pass = ok == 3000 && paired == 3000 && elapsed < 30.0;
  report(1, "honest correctness, Prot1/2/3 x 1000, t=4..16, sigma=128, q_bits=32", pass,
         "accept " + std::to_string(ok) + "/3000, paired " + std::to_string(paired) + "/3000, " + fmt(elapsed, 2) +
             " s (limit 30 s)");
}

void criterion2() {
  const auto t0 = Clock::now();
  HashConfig cfg(desk32(), 4, 128);
  ExperimentReport single = estimate_advantage("substitute", Protocol::P3, cfg, 4000, 0xC2, {1}, workers());
  bool pass = single.within_tolerance() && single.analytic_bound == 0.0625;
  std::string detail = "q=1 rate " + fmt(single.empirical_rate) + " vs 0.0625 (sigma " +
                       fmt(binomial_sigma(0.0625, 4000)) + ")";

  const double expected[] = {0.0625, 0.2275, 0.6439, 0.9839};
  auto curve = guess_success_curve(cfg, {1, 4, 16, 64}, 4000, 0xC2C, workers());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const auto& r = curve[i];
    const bool ok = r.within_tolerance() && std::abs(r.analytic_bound - expected[i]) < 5e-5;
    pass = pass && ok;
    detail += "; q=" + std::to_string(r.q_send) + " rate " + fmt(r.empirical_rate) + " vs " + fmt(r.analytic_bound);
  }
  const double elapsed = seconds_since(t0);
  pass = pass && elapsed < 120.0;
  report(2, "share substitution vs 1-(1-2^-t)^q, t=4, 4000 trials", pass,
         detail + "; " + fmt(elapsed, 2) + " s (limit 120 s)");
}

void criterion3() {
  HashConfig cfg(desk32(), 4, 128);
  ExperimentReport r = estimate_advantage("guess", Protocol::P2, cfg, 4000, 0xC3, {1}, workers());
  report(3, "Prot2 adversary without Bob's password, t=4, 4000 trials", r.within_tolerance(),
         "rate " + fmt(r.empirical_rate) + " vs 0.0625 (3 sigma = " + fmt(3 * binomial_sigma(0.0625, 4000)) + ")");
}

void criterion4(const std::vector<CorpusRun>& corpus) {
  int checked = 0, good = 0;
  for (const auto& r : corpus) {
    if (r.protocol != Protocol::P3) continue;
    ++checked;
    good += commit_before_reveal(r.log, r.client, r.server);
  }
  report(4, "commit before authenticator before share, Prot3 corpus", checked == 1000 && good == checked,
         std::to_string(good) + "/" + std::to_string(checked) + " transcripts ordered");
}

void criterion5(const std::vector<CorpusRun>& corpus) {
  int refused = 0, attempts = 0;
  for (unsigned t = 4; t <= 16; ++t) {
    HashConfig cfg(desk32(), t, 128);
    PairingSession s(cfg, {.protocol = Protocol::P3}, t);
    for (NodeId target : {s.client_id(), s.server_id()}) {
      ++attempts;
      try {
        s.world().channel(s.channel()).inject(target, ShortString(0, t));
      } catch (const InjectionForbidden&) {
        ++refused;
      }
    }
    OracleExperiment exp(Protocol::P3, cfg, t);
    InstanceRef a = exp.new_instance(exp.new_principal(), Role::client());
    InstanceRef b = exp.new_instance(exp.new_principal(), Role::server());
    exp.link(a, b);
    ++attempts;
    try {
      exp.inject_channel(b, ShortString(1, t));
    } catch (const InjectionForbidden&) {
      ++refused;
    }
  }
  int payloads = 0, exact = 0;
  for (const auto& r : corpus) {
    if (r.protocol != Protocol::P3) continue;
    for (const auto& rec : r.log.records()) {
      if (rec.medium != Medium::Channel) continue;
      ++payloads;
      exact += rec.payload_bits == r.t;
    }
  }
  report(5, "authentic channel refuses injection; Prot3 channel payloads are t bits",
         refused == attempts && payloads == 2000 && exact == payloads,
         "injections refused " + std::to_string(refused) + "/" + std::to_string(attempts) + ", exact-width payloads " +
             std::to_string(exact) + "/" + std::to_string(payloads));
}

void criterion6() {
  HashConfig cfg(desk32(), 8, 128);
  Rng pick(0xC6);
  int aborted = 0;
  const std::size_t width = bit_length(desk32().p());
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto bit = static_cast<unsigned>(pick.below(width));
    const bool client = pick.coin();
    PairingOptions opts{.protocol = Protocol::P3};
    Prot3FaultHook flip = [bit](Prot3State& s) {
      mpz_class v = s.u->value();
      mpz_combit(v.get_mpz_t(), bit);
      s.u = GroupElement::trusted(s.u->group(), v);
    };
    (client ? opts.client_fault : opts.server_fault) = flip;
    PairingSession s(cfg, opts, derive_seed(0xC6, i));
    s.run();
    const Prot3State* st = s.prot3_state(client ? Role::client() : Role::server());
    aborted += st->phase == Prot3Phase::Aborted && st->aborted_in == Prot3Phase::KeyValidation;
  }
  report(6, "flipped bit in accepted share aborts in KeyValidation, 1000 runs", aborted == 1000,
         std::to_string(aborted) + "/1000 faulted parties aborted in KeyValidation");
}

void criterion7() {
  const Group g = Group::desk(4);
  HashConfig cfg(g, 4, 128);
  // Brute-force oracle: repeated multiplication of 2 mod 23.
  auto brute = [](int e) {
    int v = 1;
    for (int i = 0; i < e; ++i) v = v * 2 % 23;
    return v;
  };
  int match = 0;
  for (int x = 1; x <= 10; ++x) {
    for (int y = 1; y <= 10; ++y) {
      PairingOptions opts{.protocol = Protocol::P3};
      opts.client_secret = Scalar(g, x);
      opts.server_secret = Scalar(g, y);
      PairingSession s(cfg, opts, static_cast<std::uint64_t>(x * 16 + y));
      s.run();
      const int expected = brute((x * y) % 11);
      const Prot3State* a = s.prot3_state(Role::client());
      const Prot3State* b = s.prot3_state(Role::server());
      const bool ok = s.mutual_accept_equal_keys() && a->group_secret().value() == expected &&
                      b->group_secret().value() == expected &&
                      *s.client().key() == h3(cfg, GroupElement::from_integer(g, expected));
      match += ok;
    }
  }
  report(7, "protocol DH secret equals brute force at p=23, (x,y) in [1,10]^2", match == 100,
         std::to_string(match) + "/100 cases match");
}

void criterion8() {
  Rng grng(0xC8);
  const Group g(generate_params(130, grng));
  HashConfig cfg(g, 4, 64);
  bool pass = g.params().s_bits() >= 64;
  std::string detail = "q " + std::to_string(bit_length(g.q())) + " bits, s=" + std::to_string(g.params().s_bits()) +
                       ", sigma=64";
  for (Protocol p : {Protocol::P1, Protocol::P2, Protocol::P3}) {
    for (const auto& name : transcript_only_strategy_names()) {
      ExperimentReport r = estimate_advantage(name, p, cfg, 2000, derive_seed(0xC8, static_cast<int>(p)), {},
                                              workers());
      const bool ok = std::abs(r.advantage) <= 3 * r.advantage_sigma;
      pass = pass && ok;
      detail += "; " + std::string(protocol_name(p)) + "/" + name + " adv " + fmt(r.advantage);
    }
  }
  report(8, "transcript-only strategies have no advantage beyond 3 sigma, 2000 experiments", pass,
         detail + " (3 sigma = " + fmt(6 * binomial_sigma(0.5, 2000)) + ")");
}

void criterion9(const std::vector<CorpusRun>& first) {
  std::vector<CorpusRun> second = honest_corpus(0xC1);
  bool same = first.size() == second.size();
  for (std::size_t i = 0; same && i < first.size(); ++i) same = first[i].transcript == second[i].transcript;
  HashConfig cfg(desk32(), 4, 128);
  std::string reports_a, reports_b;
  for (const char* s : {"substitute", "passive", "relay"}) {
    reports_a += estimate_advantage(s, Protocol::P3, cfg, 300, 0xC9, {4}, 1).to_json().dump();
    reports_b += estimate_advantage(s, Protocol::P3, cfg, 300, 0xC9, {4}, workers()).to_json().dump();
  }
  reports_a += estimate_advantage("guess", Protocol::P2, cfg, 300, 0xC9, {1}, 1).to_json().dump();
  reports_b += estimate_advantage("guess", Protocol::P2, cfg, 300, 0xC9, {1}, workers()).to_json().dump();
  report(9, "identical seeds give byte-identical transcripts and reports", same && reports_a == reports_b,
         std::string("3000 transcripts ") + (same ? "identical" : "DIFFER") + ", reports " +
             (reports_a == reports_b ? "identical" : "DIFFER"));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  std::vector<CorpusRun> corpus = honest_corpus(0xC1);
  criterion1(corpus, seconds_since(t0));
  criterion2();
  criterion3();
  criterion4(corpus);
  criterion5(corpus);
  criterion6();
  criterion7();
  criterion8();
  criterion9(corpus);
  std::printf("%d criteria failed\n", failures);
  return failures;
}
