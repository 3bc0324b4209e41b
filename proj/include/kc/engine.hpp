#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "kc/correlator.hpp"
#include "kc/fact_store.hpp"
#include "kc/ingest.hpp"
#include "kc/ontology.hpp"
#include "kc/reasoner.hpp"
#include "kc/rules.hpp"

namespace kc {

/// Everything the pipeline needs besides its inputs.
struct EngineConfig {
  std::shared_ptr<const Vocabulary> vocab;
  RuleSet rules;
  SidMap sidmap;
  TechniqueTable techniques;
  IndicatorConfig indicators;
  HostDirectory hosts;
  /// Year for Snort lines that carry none.
  int snort_year = 1970;
  std::size_t max_epochs = Reasoner::kDefaultMaxEpochs;
};

struct SettleStats {
  std::size_t indicators = 0;
  FixpointStats fixpoint;
};

/// Fact tags used for asserted provenance.
namespace sources {
inline constexpr const char* kVocabulary = "vocab";
inline constexpr const char* kTopology = "topology";
inline constexpr const char* kSnort = "snort";
inline constexpr const char* kHost = "host";
inline constexpr const char* kIntel = "intel";
}  // namespace sources

/// Ingestion adapters, indicator extraction and the reasoner over one store.
/// The store starts with the vocabulary's background knowledge and one
/// ipv4Address fact per named host.
class Engine {
 public:
  explicit Engine(EngineConfig config)
      : config_(std::move(config)), store_(config_.vocab), reasoner_(config_.rules) {
    config_.indicators.validate();
    for (const auto& t : config_.vocab->knowledge()) store_.assert_fact(t, sources::kVocabulary);
    for (auto& t : config_.hosts.facts()) store_.assert_fact(std::move(t), sources::kTopology);
  }

  const EngineConfig& config() const { return config_; }
  FactStore& store() { return store_; }
  const FactStore& store() const { return store_; }

  void add_host(const std::string& name, const Ipv4& ip) {
    config_.hosts.add(name, ip);
    store_.assert_fact(Triple{"host:" + name, "ipv4Address", Value::string(ip.to_string())}, sources::kTopology);
  }

  /// Each ingest call returns the number of facts that were new to the store.
  std::size_t ingest_snort_line(std::string_view line, std::optional<int> year = std::nullopt) {
    SensorEvent ev = parse_snort_line(line, config_.sidmap, year.value_or(config_.snort_year));
    ev.event_id = make_event_id("snort", text::trim(line));
    return commit(event_to_facts(ev, *config_.vocab, config_.hosts), sources::kSnort);
  }

  std::size_t ingest_host_line(std::string_view json_line) {
    SensorEvent ev = parse_host_event(json_line);
    ev.event_id = make_event_id("host", text::trim(json_line));
    return commit(event_to_facts(ev, *config_.vocab, config_.hosts), sources::kHost);
  }

  std::size_t ingest_event(const SensorEvent& ev) {
    return commit(event_to_facts(ev, *config_.vocab, config_.hosts),
                  ev.source == SensorSource::Snort ? sources::kSnort : sources::kHost);
  }

  std::size_t ingest_intel_document(std::string_view json) {
    return commit(intel_to_facts(parse_intel_document(json, config_.techniques)), sources::kIntel);
  }

  std::size_t ingest_intel_sentence(std::string_view sentence) {
    return commit(intel_to_facts(extract_intel_from_text(sentence, config_.techniques)), sources::kIntel);
  }

  /// Re-extracts indicators, then runs the rules to fixpoint.
  SettleStats settle() {
    SettleStats s;
    s.indicators = extract_indicators(store_, config_.indicators).size();
    s.fixpoint = reasoner_.run(store_, config_.max_epochs);
    return s;
  }

  std::vector<Alert> alerts() const { return assemble_alerts(store_); }

 private:
  std::size_t commit(std::vector<Triple> facts, const char* source) {
    std::size_t added = 0;
    for (auto& t : facts) added += store_.assert_fact(std::move(t), source).inserted ? 1 : 0;
    return added;
  }

  EngineConfig config_;
  FactStore store_;
  Reasoner reasoner_;
};

}  // namespace kc
