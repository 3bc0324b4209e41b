#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kc/engine.hpp"
#include "kc/error.hpp"
#include "kc/text.hpp"

namespace kc {

enum class InputSource : std::uint8_t { Snort, Host, IntelDoc, IntelText };

inline std::string_view to_string(InputSource s) {
  switch (s) {
    case InputSource::Snort: return "snort";
    case InputSource::Host: return "host";
    case InputSource::IntelDoc: return "intel-doc";
    case InputSource::IntelText: return "intel-text";
  }
  return "?";
}

inline std::optional<InputSource> parse_input_source(std::string_view s) {
  if (s == "snort") return InputSource::Snort;
  if (s == "host") return InputSource::Host;
  if (s == "intel-doc") return InputSource::IntelDoc;
  if (s == "intel-text") return InputSource::IntelText;
  return std::nullopt;
}

struct ScenarioLine {
  Timestamp ts;
  InputSource source = InputSource::Snort;
  /// Raw input line, or a document path for intel-doc.
  std::string payload;
  std::size_t line_no = 0;
};

struct TopologyEntry {
  std::string name;
  Ipv4 ip;
};

struct Scenario {
  std::string name;
  std::vector<TopologyEntry> topology;
  /// Sorted by timestamp; ties keep file order.
  std::vector<ScenarioLine> lines;
  /// Directory that relative intel-doc paths resolve against.
  std::filesystem::path base_dir;
};

inline std::filesystem::path resolve_payload_path(const Scenario& sc, std::string_view payload) {
  std::filesystem::path p{std::string(payload)};
  return p.is_absolute() ? p : sc.base_dir / p;
}

/// Scenario format, one entry per line, `#` starts a comment line:
///
///   name <scenario name>
///   topology <host-name> <ipv4>
///   <ISO-ts> <snort|host|intel-doc|intel-text> <payload>
///
/// Every payload is parsed by its adapter during loading; the first failure
/// throws MalformedScenario naming the line.
inline Scenario parse_scenario(std::string_view content, std::string name, std::filesystem::path base_dir,
                               const TechniqueTable& techniques) {
  Scenario sc;
  sc.name = std::move(name);
  sc.base_dir = std::move(base_dir);
  const auto lines = text::split_lines(content);
  const SidMap no_sids;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string_view raw = lines[n];
    const std::string_view line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const SourcePos pos{n + 1, 1};
    auto first_space = line.find_first_of(" \t");
    const std::string_view head = line.substr(0, first_space);
    std::string_view rest = first_space == std::string_view::npos ? std::string_view{} : text::trim(line.substr(first_space));
    if (head == "name") {
      if (rest.empty()) throw MalformedScenario("name directive needs a value", pos);
      sc.name = std::string(rest);
      continue;
    }
    if (head == "topology") {
      const auto words = text::split_ws(rest);
      auto ip = words.size() == 2 ? Ipv4::parse(words[1]) : std::nullopt;
      if (!ip || !text::is_identifier(words[0])) throw MalformedScenario("expected: topology <name> <ipv4>", pos);
      sc.topology.push_back({std::string(words[0]), *ip});
      continue;
    }
    auto ts = parse_timestamp(head);
    if (!ts) throw MalformedScenario("expected an ISO-8601 timestamp, 'name' or 'topology'", pos);
    first_space = rest.find_first_of(" \t");
    const std::string_view tag = rest.substr(0, first_space);
    auto source = parse_input_source(tag);
    if (!source) throw MalformedScenario("unknown source '" + std::string(tag) + "'", pos);
    // Payloads keep their internal spacing; only the separator is dropped.
    const std::string_view payload =
        first_space == std::string_view::npos ? std::string_view{} : text::trim(rest.substr(first_space));
    if (payload.empty()) throw MalformedScenario("missing payload", pos);
    ScenarioLine entry{*ts, *source, std::string(payload), n + 1};
    try {
      switch (*source) {
        case InputSource::Snort: (void)parse_snort_line(payload, no_sids, timestamp_year(*ts)); break;
        case InputSource::Host: (void)parse_host_event(payload); break;
        case InputSource::IntelDoc:
          (void)parse_intel_document(text::read_file(resolve_payload_path(sc, payload)), techniques);
          break;
        case InputSource::IntelText: break;  // sentences never fail
      }
    } catch (const Error& e) {
      throw MalformedScenario(std::string(to_string(*source)) + " payload: " + e.what(), pos);
    }
    sc.lines.push_back(std::move(entry));
  }
  std::stable_sort(sc.lines.begin(), sc.lines.end(),
                   [](const ScenarioLine& a, const ScenarioLine& b) { return a.ts < b.ts; });
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path, const TechniqueTable& techniques) {
  std::string content;
  try {
    content = text::read_file(path);
  } catch (const ConfigError& e) {
    throw MalformedScenario(e.what(), {});
  }
  return parse_scenario(content, path.stem().string(), path.parent_path(), techniques);
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

struct BatchRecord {
  std::size_t index = 0;
  Timestamp ts;
  std::size_t inputs = 0;
  std::size_t facts_asserted = 0;
  std::size_t indicators = 0;
  std::size_t epochs = 0;
  std::size_t facts_derived = 0;
  std::size_t store_size = 0;
  std::size_t suspicion_alerts = 0;
  std::size_t confirmed_alerts = 0;
};

struct AlertAppearance {
  std::string host;
  AlertTier tier = AlertTier::Suspicion;
  Timestamp ts;
  std::size_t batch = 0;
};

struct Transcript {
  std::string scenario;
  std::string rules_hash;
  std::vector<BatchRecord> batches;
  /// First batch at which each (host, tier) pair appears.
  std::vector<AlertAppearance> timeline;
  std::vector<Alert> final_alerts;
  std::size_t final_store_size = 0;

  std::size_t count(AlertTier tier) const {
    return static_cast<std::size_t>(std::count_if(final_alerts.begin(), final_alerts.end(),
                                                  [&](const Alert& a) { return a.tier == tier; }));
  }
};

/// Feeds the scenario into `engine` one timestamp batch at a time. After each
/// batch, indicators are re-extracted, the rules run to fixpoint and alerts are
/// re-assembled. Adapter failures abort with MalformedScenario naming the line.
inline Transcript replay(const Scenario& sc, Engine& engine) {
  Transcript tr;
  tr.scenario = sc.name;
  tr.rules_hash = engine.config().rules.source_hash;
  for (const auto& t : sc.topology) engine.add_host(t.name, t.ip);

  std::map<std::pair<std::string, AlertTier>, bool> seen;
  std::size_t i = 0;
  while (i < sc.lines.size()) {
    BatchRecord rec;
    rec.index = tr.batches.size();
    rec.ts = sc.lines[i].ts;
    engine.store().tick();
    for (; i < sc.lines.size() && sc.lines[i].ts == rec.ts; ++i) {
      const ScenarioLine& line = sc.lines[i];
      try {
        switch (line.source) {
          case InputSource::Snort:
            rec.facts_asserted += engine.ingest_snort_line(line.payload, timestamp_year(line.ts));
            break;
          case InputSource::Host: rec.facts_asserted += engine.ingest_host_line(line.payload); break;
          case InputSource::IntelDoc:
            rec.facts_asserted += engine.ingest_intel_document(text::read_file(resolve_payload_path(sc, line.payload)));
            break;
          case InputSource::IntelText: rec.facts_asserted += engine.ingest_intel_sentence(line.payload); break;
        }
      } catch (const Error& e) {
        throw MalformedScenario("step " + std::to_string(i) + ": " + e.what(), {line.line_no, 1});
      }
      ++rec.inputs;
    }
    const SettleStats s = engine.settle();
    rec.indicators = s.indicators;
    rec.epochs = s.fixpoint.epochs;
    rec.facts_derived = s.fixpoint.derived;
    rec.store_size = engine.store().size();
    for (const auto& a : engine.alerts()) {
      ++(a.tier == AlertTier::Confirmed ? rec.confirmed_alerts : rec.suspicion_alerts);
      if (!seen.emplace(std::pair{a.host, a.tier}, true).second) continue;
      tr.timeline.push_back({a.host, a.tier, rec.ts, rec.index});
    }
    tr.batches.push_back(rec);
  }
  tr.final_alerts = engine.alerts();
  tr.final_store_size = engine.store().size();
  return tr;
}

inline Transcript replay(const Scenario& sc, EngineConfig config) {
  Engine engine(std::move(config));
  return replay(sc, engine);
}

inline nlohmann::ordered_json transcript_to_json(const Transcript& tr) {
  nlohmann::ordered_json j;
  j["scenario"] = tr.scenario;
  j["rules_hash"] = tr.rules_hash;
  auto batches = nlohmann::ordered_json::array();
  for (const auto& b : tr.batches) {
    nlohmann::ordered_json jb;
    jb["index"] = b.index;
    jb["ts"] = format_timestamp(b.ts);
    jb["inputs"] = b.inputs;
    jb["facts_asserted"] = b.facts_asserted;
    jb["indicators"] = b.indicators;
    jb["epochs"] = b.epochs;
    jb["facts_derived"] = b.facts_derived;
    jb["store_size"] = b.store_size;
    jb["suspicion_alerts"] = b.suspicion_alerts;
    jb["confirmed_alerts"] = b.confirmed_alerts;
    batches.push_back(std::move(jb));
  }
  j["batches"] = std::move(batches);
  auto timeline = nlohmann::ordered_json::array();
  for (const auto& t : tr.timeline) {
    nlohmann::ordered_json jt;
    jt["host"] = t.host;
    jt["tier"] = std::string(to_string(t.tier));
    jt["first_ts"] = format_timestamp(t.ts);
    jt["batch"] = t.batch;
    timeline.push_back(std::move(jt));
  }
  j["alert_timeline"] = std::move(timeline);
  auto alerts = nlohmann::ordered_json::array();
  for (const auto& a : tr.final_alerts) alerts.push_back(alert_to_json(a));
  j["alerts"] = std::move(alerts);
  j["final_store_size"] = tr.final_store_size;
  return j;
}

}  // namespace kc
