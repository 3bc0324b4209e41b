#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

namespace kc {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("kcc_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  fs::path write(const std::string& name, const std::string& content) const {
    std::ofstream(path(name), std::ios::binary) << content;
    return path(name);
  }

  Result run(const std::string& args) const {
    const std::string cmd = std::string("\"") + KCC_PATH + "\" " + args + " >\"" + path("stdout").string() +
                            "\" 2>\"" + path("stderr").string() + "\"";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = text::read_file(path("stdout"));
    r.err = text::read_file(path("stderr"));
    return r;
  }

  static std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

  fs::path dir_;
};

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

const std::string kSnort3 =
    "08/15-14:31:00.104211  [**] [1:1000001:1] SCAN nmap [**] [Priority: 2] {TCP} 192.168.56.101:41234 -> "
    "192.168.56.102:445\n"
    "08/15-14:32:00.015530  [**] [1:41978:3] SMB [**] [Priority: 1] {TCP} 192.168.56.101:44920 -> "
    "192.168.56.102:445\n"
    "08/15-14:40:00.000112  [**] [1:384:5] PING [**] [Priority: 3] {ICMP} 192.168.56.100 -> 192.168.56.102\n";

TEST_F(Cli, RunGoldenExitsTwo) {
  const auto r = run("run " + q(test::data_path("scenarios/golden.scn")) + " --output " + q(path("t.json")) +
                     " --dump " + q(path("d.kcd")));
  EXPECT_EQ(r.code, 2) << r.err;
  EXPECT_NE(r.out.find("host:victim  CONFIRMED  malware:wannacry"), std::string::npos);
  const auto j = nlohmann::json::parse(text::read_file(path("t.json")));
  ASSERT_EQ(j["alerts"].size(), 1u);
  EXPECT_EQ(j["alerts"][0]["tier"], "Confirmed");
  EXPECT_EQ(j["final_store_size"].get<std::size_t>(),
            FactStore::load(text::read_file(path("d.kcd")), test::shipped_vocab()).size());
}

TEST_F(Cli, RunVariants) {
  EXPECT_EQ(run("run " + q(test::data_path("scenarios/benign.scn"))).code, 0);
  const auto r = run("run --without-intel " + q(test::data_path("scenarios/golden.scn")));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("SUSPICION"), std::string::npos);
  EXPECT_EQ(run("run " + q(path("missing.scn"))).code, 1);
  EXPECT_EQ(run("run " + q(write("bad.scn", "2017-08-15T10:00:00Z snort nonsense\n"))).code, 1);
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
}

TEST_F(Cli, RunJsonlStreamsAlerts) {
  const auto r = run("--format jsonl run " + q(test::data_path("scenarios/golden.scn")));
  EXPECT_EQ(r.code, 2);
  ASSERT_EQ(count_lines(r.out), 1u);
  const auto j = nlohmann::json::parse(text::split_lines(r.out)[0]);
  EXPECT_EQ(j["host"], "host:victim");
  EXPECT_EQ(j["malware"], "malware:wannacry");
  const auto after = run("run " + q(test::data_path("scenarios/golden.scn")) + " --format jsonl");
  EXPECT_EQ(after.out, r.out);
}

TEST_F(Cli, RunExplainPrintsTrees) {
  const auto r = run("run --explain " + q(test::data_path("scenarios/golden.scn")));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("<= R6"), std::string::npos);
  EXPECT_NE(r.out.find("asserted:intel"), std::string::npos);
}

TEST_F(Cli, IngestSnortThenQueryAndExplain) {
  const auto in = write("alerts.log", kSnort3);
  const auto dump = path("s.kcd");
  auto r = run("ingest snort " + q(in) + " " + q(dump));
  ASSERT_EQ(r.code, 0) << r.err;
  const FactStore store = FactStore::load(text::read_file(dump), test::shipped_vocab());
  // 3 events x (kind, src, dst, time, observed).
  std::size_t from_snort = 0;
  for (const Fact& f : store) from_snort += format_provenance(f.provenance) == "asserted:snort";
  EXPECT_EQ(from_snort, 15u);

  r = run("query \"* snortKind *\" --store " + q(dump));
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(count_lines(r.out), 3u);

  r = run("query \"* hasPhaseEvidence *\" --store " + q(dump) + " --output " + q(path("q.txt")));
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.empty());
  const std::string rows = text::read_file(path("q.txt"));
  ASSERT_GE(count_lines(rows), 1u);

  const auto id = rows.substr(0, rows.find(' '));
  r = run("explain " + id + " --store " + q(dump));
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("snortKind"), std::string::npos);
  EXPECT_EQ(run("explain 999999 --store " + q(dump)).code, 1);
}

TEST_F(Cli, RunDumpSupportsQueryAndExplain) {
  const auto dump = path("g.kcd");
  ASSERT_EQ(run("run " + q(test::data_path("scenarios/golden.scn")) + " --dump " + q(dump)).code, 2);
  auto r = run("query \"host:victim hasPhaseEvidence *\" --store " + q(dump));
  EXPECT_EQ(r.code, 0);
  EXPECT_GE(count_lines(r.out), 4u);
  r = run("query \"* attackDetected *\" --store " + q(dump));
  ASSERT_EQ(count_lines(r.out), 1u);
  r = run("explain " + r.out.substr(0, r.out.find(' ')) + " --store " + q(dump));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("usesTechnique"), std::string::npos);
  EXPECT_EQ(run("query \"not a pattern here\" --store " + q(dump)).code, 1);
}

TEST_F(Cli, IngestEmptyFileDumpsTheBaseline) {
  const auto dump = path("e.kcd");
  ASSERT_EQ(run("ingest host " + q(write("empty.jsonl", "")) + " " + q(dump)).code, 0);
  Engine empty(test::shipped_engine_config());
  EXPECT_EQ(text::read_file(dump), empty.store().dump());
  const auto r = run("query \"* * *\" --store " + q(write("none.kcd", "")));
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.empty());
}

TEST_F(Cli, IngestBadLineReportsItsNumber) {
  const std::string good = test::proc_stat(0, 50.0);
  const auto in = write("h.jsonl", good + "\n" + good + "\n{not json\n");
  const auto r = run("ingest host " + q(in) + " " + q(path("x.kcd")));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("kcc: 3:1: "), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("x.kcd")));
}

TEST_F(Cli, IngestIntelSources) {
  auto r = run("ingest intel-doc " + q(test::data_path("intel/wannacry.json")) + " " + q(path("d.kcd")));
  ASSERT_EQ(r.code, 0) << r.err;
  r = run("query \"malware:wannacry usesTechnique *\" --store " + q(path("d.kcd")));
  EXPECT_EQ(count_lines(r.out), 1u);
  const auto txt = write("i.txt", "Wannacry is a ransomware\nWannacry uses Malformed SMB packets to exploit\n");
  ASSERT_EQ(run("ingest intel-text " + q(txt) + " " + q(path("t.kcd"))).code, 0);
  r = run("query \"malware:wannacry * *\" --store " + q(path("t.kcd")));
  EXPECT_NE(r.out.find("malware:wannacry isClass class:ransomware asserted:intel"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("malware:wannacry usesTechnique technique:malformed_smb_exploit asserted:intel"),
            std::string::npos);
  EXPECT_EQ(run("ingest pcap " + q(txt) + " " + q(path("p.kcd"))).code, 1);
}

TEST_F(Cli, CheckRules) {
  auto r = run("check-rules");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("8 rules ok"), std::string::npos);
  EXPECT_EQ(run("check-rules " + q(write("ok.kcr", "rule X: p(?a, ?b) => q(?a, ?b).\n")) + " --vocab " +
                q(write("v.kcv", "version 1\npredicate p entity\npredicate q entity\n")))
                .code,
            0);
  r = run("check-rules " + q(write("bad.kcr", "rule X: nosuch(?a, ?b) => eventKind(?a, ?b).\n")));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("nosuch"), std::string::npos);
  EXPECT_EQ(run("--rules " + q(path("bad.kcr")) + " run " + q(test::data_path("scenarios/golden.scn"))).code, 1);
}

TEST_F(Cli, BadConfigIsAnInputError) {
  EXPECT_EQ(run("--config " + q(write("c.conf", "vocab = /nonexistent.kcv\n")) + " check-rules").code, 1);
  EXPECT_EQ(run("--format xml check-rules").code, 1);
}

}  // namespace
}  // namespace kc
