#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <tuple>

#include "support.hpp"

namespace kc {
namespace {

Scenario parse(std::string_view content) { return parse_scenario(content, "t", test::data_path("intel"), test::shipped_techniques()); }

std::size_t error_line(std::string_view content) {
  try {
    parse(content);
  } catch (const MalformedScenario& e) {
    return e.pos().line;
  }
  return 0;
}

/// Alert identity without fact ids, which depend on insertion order.
using AlertKey = std::tuple<std::string, AlertTier, std::optional<std::string>, std::set<KillChainPhase>>;

std::set<AlertKey> keys(const std::vector<Alert>& alerts) {
  std::set<AlertKey> out;
  for (const auto& a : alerts) out.insert({a.host, a.tier, a.malware, a.phases});
  return out;
}

std::set<Triple> triples(const FactStore& store) {
  std::set<Triple> out;
  for (const Fact& f : store) out.insert(f.triple);
  return out;
}

Timestamp at(const char* iso) { return *parse_timestamp(iso); }

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

TEST(ScenarioLoad, Golden) {
  const Scenario sc = test::golden();
  EXPECT_EQ(sc.name, "golden");
  ASSERT_EQ(sc.topology.size(), 3u);
  EXPECT_EQ(sc.topology[2].name, "victim");
  EXPECT_EQ(sc.topology[2].ip.to_string(), "192.168.56.102");
  const auto intel = std::count_if(sc.lines.begin(), sc.lines.end(),
                                   [](const ScenarioLine& l) { return l.source == InputSource::IntelText; });
  EXPECT_EQ(intel, 2);
  EXPECT_GE(sc.lines.size() - static_cast<std::size_t>(intel), 12u);
  EXPECT_TRUE(std::is_sorted(sc.lines.begin(), sc.lines.end(),
                             [](const ScenarioLine& a, const ScenarioLine& b) { return a.ts < b.ts; }));
}

// The golden trace carries every sensor-visible step of the custom ransomware:
// the encryptor and key downloads, the sensitive encryption burst, secure
// deletion and the key-index file, and the processor load.
TEST(ScenarioLoad, GoldenCoversRansomwareBehaviour) {
  const Scenario sc = test::golden();
  std::map<std::string, int> ops;
  std::set<std::string> created;
  std::vector<double> cpu;
  int snort_downloads = 0;
  for (const auto& l : sc.lines) {
    if (l.source == InputSource::Snort) {
      const auto ev = parse_snort_line(l.payload, test::shipped_sidmap(), 2017);
      snort_downloads += ev.kind == EventKind::SuspiciousDownload;
      continue;
    }
    if (l.source != InputSource::Host) continue;
    const auto ev = parse_host_event(l.payload);
    const auto path = ev.attributes.count("filePath") ? ev.attributes.at("filePath").text() : "";
    if (ev.kind == EventKind::FileCreatedFromNetwork) created.insert(path.substr(path.rfind('\\') + 1));
    if (ev.kind == EventKind::FileModified) {
      EXPECT_EQ(ev.attributes.at("sensitive").text(), "true");
      ++ops[ev.attributes.at("operation").text()];
      if (path.ends_with("keys.idx")) ++ops["key_index"];
    }
    if (ev.kind == EventKind::ProcessStat) cpu.push_back(ev.attributes.at("cpuPercent").as_decimal());
  }
  EXPECT_EQ(snort_downloads, 2);
  EXPECT_TRUE(created.contains("encryptor.exe"));
  EXPECT_TRUE(created.contains("public.pem"));
  EXPECT_GE(ops["encrypt"], 5);
  EXPECT_GE(ops["secure_delete"], 2);
  EXPECT_EQ(ops["key_index"], 2);
  ASSERT_EQ(cpu.size(), 2u);
  for (double c : cpu) EXPECT_GT(c, 80.0);
}

TEST(ScenarioLoad, CommentsNameAndStableOrder) {
  const Scenario sc = parse(
      "# header\n"
      "name demo\n"
      "\n"
      "2017-08-15T10:00:01Z intel-text B is a worm\n"
      "2017-08-15T10:00:00Z intel-text A is a worm\n"
      "2017-08-15T10:00:01Z intel-text C is a worm\n");
  EXPECT_EQ(sc.name, "demo");
  ASSERT_EQ(sc.lines.size(), 3u);
  EXPECT_EQ(sc.lines[0].payload, "A is a worm");
  EXPECT_EQ(sc.lines[1].payload, "B is a worm");
  EXPECT_EQ(sc.lines[2].payload, "C is a worm");
  EXPECT_EQ(sc.lines[1].line_no, 4u);
}

TEST(ScenarioLoad, EmptyFileIsAnEmptyScenario) {
  const Scenario sc = parse("");
  EXPECT_TRUE(sc.lines.empty());
  const Transcript tr = replay(sc, test::shipped_engine_config());
  EXPECT_TRUE(tr.batches.empty());
  EXPECT_TRUE(tr.final_alerts.empty());
}

TEST(ScenarioLoad, ErrorsNameTheLine) {
  EXPECT_EQ(error_line("\n\n2017-08-15T10:00:00Z snort not a snort line\n"), 3u);
  EXPECT_EQ(error_line("2017-08-15T10:00:00Z host {\"agent\":\"file\"}\n"), 1u);
  EXPECT_EQ(error_line("# c\nyesterday snort x\n"), 2u);
  EXPECT_EQ(error_line("2017-08-15T10:00:00Z syslog x\n"), 1u);
  EXPECT_EQ(error_line("2017-08-15T10:00:00Z snort\n"), 1u);
  EXPECT_EQ(error_line("topology victim 300.1.1.1\n"), 1u);
  EXPECT_EQ(error_line("topology 9victim 10.0.0.1\n"), 1u);
  EXPECT_EQ(error_line("name\n"), 1u);
  EXPECT_EQ(error_line("2017-08-15T10:00:00Z intel-doc missing.json\n"), 1u);
  EXPECT_THROW(load_scenario(test::data_path("scenarios/none.scn"), test::shipped_techniques()), MalformedScenario);
}

TEST(ScenarioLoad, IntelDocumentPathsResolveAgainstTheScenario) {
  Scenario sc = test::without_intel(test::golden());
  Scenario doc = parse("2017-08-15T14:29:00Z intel-doc wannacry.json\n");
  sc.base_dir = doc.base_dir;
  sc.lines.insert(sc.lines.begin(), doc.lines.front());
  const auto tr = replay(sc, test::shipped_engine_config());
  ASSERT_EQ(tr.final_alerts.size(), 1u);
  EXPECT_EQ(tr.final_alerts[0].tier, AlertTier::Confirmed);
  EXPECT_EQ(tr.final_alerts[0].malware, "malware:wannacry");
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

TEST(Replay, GoldenTranscript) {
  const Scenario sc = test::golden();
  const Transcript tr = replay(sc, test::shipped_engine_config());
  std::set<Timestamp> stamps;
  for (const auto& l : sc.lines) stamps.insert(l.ts);
  ASSERT_EQ(tr.batches.size(), stamps.size());
  EXPECT_EQ(tr.batches.back().store_size, tr.final_store_size);
  std::size_t inputs = 0;
  for (const auto& b : tr.batches) inputs += b.inputs;
  EXPECT_EQ(inputs, sc.lines.size());

  ASSERT_EQ(tr.timeline.size(), 2u);
  EXPECT_EQ(tr.timeline[0].tier, AlertTier::Suspicion);
  EXPECT_EQ(tr.timeline[1].tier, AlertTier::Confirmed);
  EXPECT_LT(tr.timeline[0].batch, tr.timeline[1].batch);
  // Confirmed no later than the step-12 batch.
  EXPECT_LE(tr.timeline[1].ts, at("2017-08-15T14:36:00Z"));
  EXPECT_EQ(tr.count(AlertTier::Confirmed), 1u);

  const auto j = transcript_to_json(tr);
  EXPECT_EQ(j["scenario"], "golden");
  EXPECT_EQ(j["rules_hash"].get<std::string>().size(), 16u);
  EXPECT_EQ(j["batches"].size(), tr.batches.size());
  EXPECT_EQ(j["alert_timeline"][1]["tier"], "Confirmed");
  EXPECT_EQ(j["alerts"].size(), 1u);
}

// Hand-trace oracle over timestamp prefixes: Confirmed shows up only once the
// victim has ActionsOnObjectives evidence, and by the step-12 batch at latest.
TEST(Replay, ConfirmedFollowsActionsOnObjectives) {
  const Scenario sc = test::golden();
  std::set<Timestamp> stamps;
  for (const auto& l : sc.lines) stamps.insert(l.ts);
  std::optional<Timestamp> first_aoo, first_confirmed;
  for (Timestamp cut : stamps) {
    Scenario prefix = sc;
    std::erase_if(prefix.lines, [&](const ScenarioLine& l) { return l.ts > cut; });
    Engine e(test::shipped_engine_config());
    const Transcript tr = replay(prefix, e);
    const bool aoo = e.store().contains(
        Triple{"host:victim", "hasPhaseEvidence", Value::entity(phase_entity(KillChainPhase::ActionsOnObjectives))});
    if (aoo && !first_aoo) first_aoo = cut;
    if (tr.count(AlertTier::Confirmed) > 0 && !first_confirmed) first_confirmed = cut;
    if (tr.count(AlertTier::Confirmed) > 0) {
      EXPECT_TRUE(aoo) << format_timestamp(cut);
    }
  }
  ASSERT_TRUE(first_aoo && first_confirmed);
  EXPECT_LE(*first_aoo, *first_confirmed);
  EXPECT_LE(*first_confirmed, at("2017-08-15T14:36:00Z"));
}

TEST(Replay, WithoutIntelEndsInOneSuspicion) {
  const Transcript tr = replay(test::without_intel(test::golden()), test::shipped_engine_config());
  EXPECT_EQ(tr.count(AlertTier::Suspicion), 1u);
  EXPECT_EQ(tr.count(AlertTier::Confirmed), 0u);
}

TEST(Replay, BenignEndsWithoutAlerts) {
  const Transcript tr = replay(test::benign(), test::shipped_engine_config());
  EXPECT_TRUE(tr.final_alerts.empty());
  EXPECT_TRUE(tr.timeline.empty());
}

TEST(Replay, BadPayloadAtReplayNamesTheLine) {
  Scenario sc = test::golden();
  sc.lines[3].payload = "garbage";
  try {
    replay(sc, test::shipped_engine_config());
    FAIL() << "expected MalformedScenario";
  } catch (const MalformedScenario& e) {
    EXPECT_EQ(e.pos().line, sc.lines[3].line_no);
  }
}

TEST(ReplayProperty, Determinism) {
  auto run = [] {
    Engine e(test::shipped_engine_config());
    const Transcript tr = replay(test::golden(), e);
    return transcript_to_json(tr).dump(2) + "\n--\n" + e.store().dump();
  };
  EXPECT_EQ(run(), run());
}

// Every prefix's alerts are covered by the full run's alerts at the same or a
// higher tier.
TEST(ReplayProperty, PrefixMonotonicity) {
  const Scenario sc = test::golden();
  const auto full = replay(sc, test::shipped_engine_config()).final_alerts;
  auto rank = [](const std::vector<Alert>& alerts, const std::string& host) {
    for (const auto& a : alerts)
      if (a.host == host) return a.tier == AlertTier::Confirmed ? 2 : 1;
    return 0;
  };
  for (std::size_t k = 0; k <= sc.lines.size(); ++k) {
    Scenario prefix = sc;
    prefix.lines.resize(k);
    for (const auto& a : replay(prefix, test::shipped_engine_config()).final_alerts)
      EXPECT_LE(rank({a}, a.host), rank(full, a.host)) << "prefix " << k;
  }
}

// Shuffling lines that share a timestamp and shuffling the rules leaves the
// final alerts and the final fact set unchanged.
TEST(ReplayProperty, OrderInvariance) {
  const Scenario sc = test::golden();
  Engine ref(test::shipped_engine_config());
  const auto ref_alerts = keys(replay(sc, ref).final_alerts);
  const auto ref_facts = triples(ref.store());
  std::mt19937_64 rng(3);
  for (int round = 0; round < 10; ++round) {
    Scenario shuffled = sc;
    for (auto it = shuffled.lines.begin(); it != shuffled.lines.end();) {
      auto end = std::find_if(it, shuffled.lines.end(), [&](const ScenarioLine& l) { return l.ts != it->ts; });
      std::shuffle(it, end, rng);
      it = end;
    }
    auto cfg = test::shipped_engine_config();
    std::shuffle(cfg.rules.rules.begin(), cfg.rules.rules.end(), rng);
    Engine e(cfg);
    EXPECT_EQ(keys(replay(shuffled, e).final_alerts), ref_alerts) << round;
    EXPECT_EQ(triples(e.store()), ref_facts) << round;
  }
}

}  // namespace
}  // namespace kc
