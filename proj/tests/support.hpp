#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "kc/kc.hpp"

namespace kc::test {

inline std::filesystem::path data_path(const std::string& rel) { return std::filesystem::path(KC_DATA_DIR) / rel; }
inline std::filesystem::path fixture_path(const std::string& rel) {
  return std::filesystem::path(KC_FIXTURE_DIR) / rel;
}

inline const CliConfig& shipped_config() {
  static const CliConfig cfg = CliConfig::load(data_path("kcc.conf"));
  return cfg;
}

/// Shipped vocabulary, rules, sidmap, techniques and indicator defaults.
inline EngineConfig shipped_engine_config() { return shipped_config().engine_config(); }

inline std::shared_ptr<const Vocabulary> shipped_vocab() {
  static const auto v = std::make_shared<const Vocabulary>(Vocabulary::load(data_path("vocab.kcv")));
  return v;
}

inline const SidMap& shipped_sidmap() {
  static const SidMap m = SidMap::load(data_path("sidmap.kcm"));
  return m;
}

inline const TechniqueTable& shipped_techniques() {
  static const TechniqueTable t = TechniqueTable::load(data_path("techniques.kct"));
  return t;
}

inline Scenario golden() { return load_scenario(data_path("scenarios/golden.scn"), shipped_techniques()); }
inline Scenario benign() { return load_scenario(data_path("scenarios/benign.scn"), shipped_techniques()); }

inline Scenario without_intel(Scenario sc) {
  std::erase_if(sc.lines, [](const ScenarioLine& l) {
    return l.source == InputSource::IntelDoc || l.source == InputSource::IntelText;
  });
  return sc;
}

/// A small vocabulary for tests that do not need the shipped one.
inline std::shared_ptr<const Vocabulary> tiny_vocab() {
  auto v = std::make_shared<Vocabulary>();
  v->register_predicate("p", ValueKind::Entity);
  v->register_predicate("q", ValueKind::Entity);
  v->register_predicate("r", ValueKind::Entity);
  v->register_predicate("n", ValueKind::Integer);
  v->register_predicate("d", ValueKind::Decimal);
  v->register_predicate("s", ValueKind::String);
  return v;
}

}  // namespace kc::test

namespace kc::test {

/// 2017-08-15T14:30:00Z, the golden scenario's step-0 instant.
inline constexpr std::int64_t kT0 = 1502807400;

/// One host-agent JSON line at kT0 + offset seconds.
inline std::string host_line(std::int64_t offset_s, const std::string& host, const std::string& type,
                             const nlohmann::json& attrs) {
  nlohmann::json j;
  j["agent"] = type.starts_with("proc.") ? "process" : "file";
  j["ts"] = format_timestamp(Timestamp::from_seconds(kT0 + offset_s));
  j["host"] = host;
  j["type"] = type;
  j["attrs"] = attrs;
  return j.dump();
}

inline std::string file_mod(std::int64_t offset_s, int serial, bool sensitive, const std::string& host = "host:victim") {
  return host_line(offset_s, host, "file.modified",
                   {{"filePath", "C:\\Users\\a\\Documents\\f" + std::to_string(serial) + ".doc"},
                    {"sensitive", sensitive}});
}

inline std::string proc_stat(std::int64_t offset_s, double cpu, const std::string& host = "host:victim") {
  return host_line(offset_s, host, "proc.stat", {{"processName", "p.exe"}, {"cpuPercent", cpu}});
}

/// Inbound-blocked Snort event from 10.0.0.<serial % 250 + 1> to `dst`.
inline SensorEvent blocked_event(std::int64_t ts_s, int serial, const Ipv4& dst) {
  SensorEvent ev;
  ev.kind = EventKind::InboundConnectionBlocked;
  ev.source = SensorSource::Snort;
  ev.ts = Timestamp::from_seconds(ts_s);
  ev.src_ip = Ipv4{{10, 0, static_cast<std::uint8_t>(serial / 250), static_cast<std::uint8_t>(serial % 250 + 1)}};
  ev.dst_ip = dst;
  ev.event_id = "event:blk" + std::to_string(serial);
  return ev;
}

inline bool has_indicator(const FactStore& store, const std::string& host, IndicatorKind k) {
  return store.contains(Triple{host, "hasIndicator", Value::entity(indicator_entity(k))});
}

}  // namespace kc::test
