#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun cli(const std::string& args) {
  const std::string cmd = std::string(PHIKE_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  CliRun r;
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::vector<nlohmann::json> lines(const std::string& s) {
  std::vector<nlohmann::json> out;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

}  // namespace

TEST(Cli, PairP3OnP23) {
  CliRun r = cli("pair p3 --t 4 --s 128 --group desk:4 --seed 7");
  ASSERT_EQ(r.code, 0);
  auto j = lines(r.out);
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0]["role"], "client");
  EXPECT_EQ(j[1]["role"], "server");
  EXPECT_EQ(j[0]["accepted"], true);
  EXPECT_EQ(j[0]["key_hex"], j[1]["key_hex"]);
  EXPECT_EQ(j[0]["key_hex"].get<std::string>().size(), 32u);
}

TEST(Cli, PairAllProtocols) {
  for (const char* p : {"p1", "p2", "p3"}) {
    CliRun r = cli(std::string("pair ") + p + " --t 8 --seed 3");
    EXPECT_EQ(r.code, 0) << p;
    auto j = lines(r.out);
    ASSERT_EQ(j.size(), 2u);
    EXPECT_EQ(j[0]["protocol"], p);
  }
}

TEST(Cli, PairSlaveToMaster) {
  CliRun r = cli("pair p1 --t 4 --direction slave-to-master");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(cli("pair p3 --t 4 --direction slave-to-master").code, 2);
}

TEST(Cli, ConfigErrors) {
  EXPECT_EQ(cli("pair p2 --t 0").code, 2);
  EXPECT_EQ(cli("pair p2 --t 65").code, 2);
  EXPECT_EQ(cli("pair p2 --s 32").code, 2);
  EXPECT_EQ(cli("pair p4").code, 2);
  EXPECT_EQ(cli("pair p3 --group nonsense").code, 2);
  EXPECT_EQ(cli("pair p3 --bogus").code, 2);
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("attack p1 substitute --trials 10").code, 2);
}

TEST(Cli, GroupFile) {
  const std::string path = ::testing::TempDir() + "/g23.conf";
  {
    std::ofstream f(path);
    f << "# desk group\np = 23\nq = 11\ng = 2\ns_bits = 1\n";
  }
  EXPECT_EQ(cli("pair p3 --t 4 --group-file " + path).code, 0);
  {
    std::ofstream f(path);
    f << "p = 23\nq = 11\ng = 5\n";
  }
  EXPECT_EQ(cli("pair p3 --t 4 --group-file " + path).code, 2);
}

TEST(Cli, TranscriptFile) {
  const std::string path = ::testing::TempDir() + "/t.jsonl";
  ASSERT_EQ(cli("pair p3 --t 4 --seed 2 --transcript " + path).code, 0);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  auto recs = lines(ss.str());
  ASSERT_GE(recs.size(), 8u);
  for (const auto& r : recs) {
    EXPECT_TRUE(r["medium"] == "bc" || r["medium"] == "ch");
    EXPECT_TRUE(r.contains("round"));
    EXPECT_TRUE(r.contains("header"));
    EXPECT_TRUE(r.contains("payload-hex"));
    EXPECT_EQ(r["tampered"], false);
  }
}

TEST(Cli, AttackSubstitute) {
  CliRun r = cli("attack p3 substitute --t 4 --qsend 1 --trials 4000 --parallel 4");
  EXPECT_EQ(r.code, 0);
  auto j = lines(r.out);
  ASSERT_EQ(j.size(), 1u);
  EXPECT_DOUBLE_EQ(j[0]["bound"].get<double>(), 0.0625);
  EXPECT_EQ(j[0]["trials"], 4000);

  r = cli("attack p3 substitute --t 4 --qsend 16 --trials 4000 --parallel 4");
  EXPECT_EQ(r.code, 0);
  EXPECT_NEAR(lines(r.out)[0]["bound"].get<double>(), 0.6439, 1e-4);
}

TEST(Cli, AttackPassive) {
  CliRun r = cli("attack p3 passive --trials 1000");
  EXPECT_EQ(r.code, 0);
  auto j = lines(r.out);
  ASSERT_EQ(j.size(), 1u);
  EXPECT_DOUBLE_EQ(j[0]["bound"].get<double>(), 0.5);
}

TEST(Cli, AttackCurve) {
  CliRun r = cli("attack p3 substitute --t 4 --curve 0,1,4 --trials 500 --parallel 2");
  EXPECT_EQ(r.code, 0);
  auto j = lines(r.out);
  ASSERT_EQ(j.size(), 3u);
  EXPECT_EQ(j[0]["rate"], 0.0);
}

TEST(Cli, AttackBoundViolationExits3) {
  // In the 11-element group mod 23 a random share hits the victim's exactly
  // with probability 1/10, well above the 2^-4 the bound assumes.
  EXPECT_EQ(cli("attack p3 substitute --t 4 --group desk:4 --trials 4000 --parallel 4").code, 3);
  EXPECT_EQ(cli("attack p3 mitm --t 1 --trials 2000 --parallel 2").code, 0);
}

TEST(Cli, DeterministicOutput) {
  EXPECT_EQ(cli("pair p2 --t 6 --seed 11").out, cli("pair p2 --t 6 --seed 11").out);
  EXPECT_EQ(cli("attack p2 guess --trials 300 --seed 5").out, cli("attack p2 guess --trials 300 --seed 5 --parallel 3").out);
}

TEST(Cli, Vectors) {
  CliRun a = cli("vectors");
  CliRun b = cli("vectors");
  ASSERT_EQ(a.code, 0);
  EXPECT_FALSE(a.out.empty());
  EXPECT_EQ(a.out, b.out);
  std::ifstream in(std::string(PHIKE_TEST_DATA_DIR) + "/roh_vectors.txt");
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(a.out, ss.str());
}
