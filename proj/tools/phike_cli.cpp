// phike: honest pairings, attack campaigns and regression vectors.
//
//   phike pair p1|p2|p3 [--t N] [--s N] [--group desk:N|standard] [--seed N] ...
//   phike attack <protocol> <strategy> [--t N] [--qsend N] [--trials N] ...
//   phike vectors
//
// stdout carries JSON lines (vectors: one text line per vector); diagnostics
// go to stderr. Exit codes: 0 ok, 1 pairing aborted, 2 configuration error,
// 3 statistical bound violated.

#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "phike/harness.hpp"

using namespace phike;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAbort = 1;
constexpr int kExitConfig = 2;
constexpr int kExitBound = 3;

struct GroupOptions {
  std::string spec = "desk:32";
  std::uint64_t seed = 1;
  std::string file;
};

std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParamError("cannot open group file " + path);
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const char* ws = " \t\r";
      s.erase(0, s.find_first_not_of(ws));
      s.erase(s.find_last_not_of(ws) + 1);
      return s;
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

Group make_group(const GroupOptions& o) {
  if (!o.file.empty()) return Group(GroupParams::from_record(read_key_values(o.file)));
  if (o.spec == "standard") return Group::standard();
  if (o.spec.rfind("desk:", 0) == 0) {
    unsigned bits = 0;
    try {
      bits = static_cast<unsigned>(std::stoul(o.spec.substr(5)));
    } catch (const std::exception&) {
      throw ParamError("bad desk size in --group " + o.spec);
    }
    return Group::desk(bits, o.seed);
  }
  throw ParamError("--group must be desk:N or standard");
}

void add_group_options(CLI::App* cmd, GroupOptions& g) {
  cmd->add_option("--group", g.spec, "desk:N (generated, q of N bits) or standard (2048-bit)")->capture_default_str();
  cmd->add_option("--group-seed", g.seed, "seed for desk group generation")->capture_default_str();
  cmd->add_option("--group-file", g.file, "key=value file with p, q, g in decimal");
}

Protocol protocol_arg(const std::string& s, bool allow_eke) {
  auto p = parse_protocol(s);
  if (!p || (!allow_eke && *p == Protocol::Eke)) throw ParamError("unknown protocol " + s);
  return *p;
}

struct PairArgs {
  std::string protocol;
  unsigned t = 4;
  unsigned s = 128;
  GroupOptions group;
  std::uint64_t seed = 0;
  std::string direction = "master-to-slave";
  std::string transcript;
};

int run_pair(const PairArgs& a) {
  PairingOptions opts;
  opts.protocol = protocol_arg(a.protocol, false);
  if (a.direction == "slave-to-master") {
    opts.prot1_server_sends = true;
  } else if (a.direction != "master-to-slave") {
    throw ParamError("--direction must be master-to-slave or slave-to-master");
  }
  if (opts.prot1_server_sends && opts.protocol != Protocol::P1) {
    throw ParamError("--direction applies to p1 only");
  }
  HashConfig cfg(make_group(a.group), a.t, a.s);
  PairingSession session(cfg, opts, a.seed);
  session.run();
  std::cout << session.outcome_json(Role::client()).dump() << '\n'
            << session.outcome_json(Role::server()).dump() << '\n';
  if (!a.transcript.empty()) {
    std::ofstream out(a.transcript);
    if (!out) throw ParamError("cannot write transcript " + a.transcript);
    out << session.world().log().jsonl();
  }
  if (session.mutual_accept_equal_keys()) return kExitOk;
  std::cerr << "pairing did not complete: client " << abort_reason_name(session.client().abort_reason())
            << ", server " << abort_reason_name(session.server().abort_reason()) << '\n';
  return kExitAbort;
}

struct AttackArgs {
  std::string protocol;
  std::string strategy;
  unsigned t = 4;
  unsigned s = 128;
  std::uint64_t q_send = 1;
  std::uint64_t trials = 1000;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> curve;
  unsigned parallel = 1;
  GroupOptions group;
};

int run_attack(const AttackArgs& a) {
  const Protocol protocol = protocol_arg(a.protocol, true);
  HashConfig cfg(make_group(a.group), a.t, a.s);
  std::vector<ExperimentReport> reports;
  if (!a.curve.empty()) {
    reports = guess_success_curve(cfg, a.curve, a.trials, a.seed, a.parallel, a.strategy, protocol);
  } else {
    reports.push_back(estimate_advantage(a.strategy, protocol, cfg, a.trials, a.seed, {a.q_send}, a.parallel));
  }
  bool ok = true;
  for (const auto& r : reports) {
    std::cout << r.to_json().dump() << '\n';
    if (!r.within_tolerance()) {
      ok = false;
      std::cerr << "rate " << r.empirical_rate << " is outside 3 sigma of " << r.analytic_bound << " (q_send "
                << r.q_send << ")\n";
    }
  }
  return ok ? kExitOk : kExitBound;
}

// index, element-decimal, SHA-256(encode(element) || index) for every member
// of the order-11 subgroup mod 23 and indices 1..5.
int run_vectors() {
  const Group g = Group::desk(4);
  std::vector<GroupElement> members;
  for (long v = 1; v < 23; ++v) {
    try {
      members.push_back(GroupElement::from_integer(g, v));
    } catch (const DecodeError&) {
    }
  }
  for (std::uint8_t i = 1; i <= 5; ++i) {
    for (const auto& m : members) {
      Digest d = base_hash(m, i);
      std::cout << int(i) << ", " << m.value().get_str() << ", " << to_hex(Bytes(d.begin(), d.end())) << '\n';
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ephemeral key exchange simulator"};
  app.require_subcommand(1);

  PairArgs pair;
  auto* pair_cmd = app.add_subcommand("pair", "run one honest pairing");
  pair_cmd->add_option("protocol", pair.protocol, "p1, p2 or p3")->required();
  pair_cmd->add_option("--t", pair.t, "channel capacity / password length in bits")->capture_default_str();
  pair_cmd->add_option("--s", pair.s, "session key length in bits")->capture_default_str();
  pair_cmd->add_option("--seed", pair.seed)->capture_default_str();
  pair_cmd->add_option("--direction", pair.direction, "p1 channel direction")->capture_default_str();
  pair_cmd->add_option("--transcript", pair.transcript, "write delivery log as JSON lines");
  add_group_options(pair_cmd, pair.group);

  AttackArgs attack;
  auto* attack_cmd = app.add_subcommand("attack", "estimate an adversary's success or advantage");
  attack_cmd->add_option("protocol", attack.protocol, "p1, p2, p3 or eke")->required();
  attack_cmd->add_option("strategy", attack.strategy, "strategy name")->required();
  attack_cmd->add_option("--t", attack.t)->capture_default_str();
  attack_cmd->add_option("--s", attack.s)->capture_default_str();
  attack_cmd->add_option("--qsend", attack.q_send, "guessing sessions per experiment")->capture_default_str();
  attack_cmd->add_option("--trials", attack.trials)->capture_default_str();
  attack_cmd->add_option("--seed", attack.seed)->capture_default_str();
  attack_cmd->add_option("--curve", attack.curve, "q_send values for a success curve")->delimiter(',');
  attack_cmd->add_option("--parallel", attack.parallel, "worker threads")->capture_default_str();
  add_group_options(attack_cmd, attack.group);

  auto* vectors_cmd = app.add_subcommand("vectors", "print hash regression vectors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*pair_cmd) return run_pair(pair);
    if (*attack_cmd) return run_attack(attack);
    if (*vectors_cmd) return run_vectors();
  } catch (const ParamError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ConstraintViolation& e) {
    std::cerr << "oracle constraint violated: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
