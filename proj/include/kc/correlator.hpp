#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kc/error.hpp"
#include "kc/fact_store.hpp"
#include "kc/ontology.hpp"
#include "kc/reasoner.hpp"
#include "kc/text.hpp"

namespace kc {

/// Thresholds for the statistical indicators. None of these come from field
/// data; they are tunable defaults.
struct IndicatorConfig {
  std::int64_t mass_file_mod_threshold = 5;
  std::int64_t mass_file_mod_window = 300;  // seconds
  double high_cpu_threshold = 80.0;         // percent, strictly exceeded
  std::int64_t high_cpu_min_samples = 2;
  std::int64_t spike_window = 60;  // seconds
  double spike_factor = 5.0;
  std::int64_t spike_min_count = 10;

  void validate() const {
    auto positive = [](const char* name, double v) {
      if (!(v > 0)) throw ConfigError(std::string("indicator setting ") + name + " must be > 0");
    };
    positive("mass_file_mod_threshold", static_cast<double>(mass_file_mod_threshold));
    positive("mass_file_mod_window", static_cast<double>(mass_file_mod_window));
    positive("high_cpu_threshold", high_cpu_threshold);
    positive("high_cpu_min_samples", static_cast<double>(high_cpu_min_samples));
    positive("spike_window", static_cast<double>(spike_window));
    positive("spike_min_count", static_cast<double>(spike_min_count));
    if (!(spike_factor > 1.0)) throw ConfigError("indicator setting spike_factor must be > 1");
  }

  /// key = value file; unknown keys are an error, missing keys keep defaults.
  static IndicatorConfig parse(std::string_view content, const std::string& origin = "indicators") {
    IndicatorConfig cfg;
    for (const auto& [key, raw] : text::parse_key_values(content, origin)) {
      auto v = parse_number(raw);
      if (!v) throw ConfigError(origin + ": '" + key + "' needs a number, got '" + raw + "'");
      auto as_int = [&]() -> std::int64_t {
        if (v->kind() != ValueKind::Integer) throw ConfigError(origin + ": '" + key + "' needs an integer");
        return v->as_integer();
      };
      if (key == "mass_file_mod_threshold") cfg.mass_file_mod_threshold = as_int();
      else if (key == "mass_file_mod_window") cfg.mass_file_mod_window = as_int();
      else if (key == "high_cpu_threshold") cfg.high_cpu_threshold = v->as_decimal();
      else if (key == "high_cpu_min_samples") cfg.high_cpu_min_samples = as_int();
      else if (key == "spike_window") cfg.spike_window = as_int();
      else if (key == "spike_factor") cfg.spike_factor = v->as_decimal();
      else if (key == "spike_min_count") cfg.spike_min_count = as_int();
      else throw ConfigError(origin + ": unknown indicator setting '" + key + "'");
    }
    cfg.validate();
    return cfg;
  }

  static IndicatorConfig load(const std::filesystem::path& path) {
    return parse(text::read_file(path), path.string());
  }
};

/// Largest number of times falling in any half-open window [t, t + width).
/// `times` must be sorted ascending.
inline std::size_t max_window_count(const std::vector<std::int64_t>& times, std::int64_t width) {
  std::size_t best = 0;
  std::size_t left = 0;
  for (std::size_t right = 0; right < times.size(); ++right) {
    while (times[right] - times[left] >= width) ++left;
    best = std::max(best, right - left + 1);
  }
  return best;
}

namespace detail {

struct ObservedEvent {
  std::string id;
  std::string host;
  EventKind kind = EventKind::Unclassified;
  Timestamp ts;
  FactId kind_fact = 0;
};

/// Events that have a kind, a host and a time, sorted by (time, kind fact id).
inline std::map<std::string, std::vector<ObservedEvent>> events_by_host(const FactStore& store, EventKind wanted) {
  std::map<std::string, std::vector<ObservedEvent>> out;
  std::map<std::string, std::string, std::less<>> host_of;
  store.for_each_match(Pattern{std::nullopt, std::string("observedEvent"), std::nullopt}, IdRange{}, [&](const Fact& o) {
    if (o.object().is_entity()) host_of.emplace(o.object().text(), o.subject());
  });
  const std::string token(kind_token(wanted));
  for (const char* pred : {"snortKind", "hostKind"}) {
    Pattern p;
    p.predicate = pred;
    p.object = Value::string(token);
    store.for_each_match(p, IdRange{}, [&](const Fact& f) {
      const Value* when = store.first_object(f.subject(), "eventTime");
      if (!when || when->kind() != ValueKind::Timestamp) return;
      auto h = host_of.find(f.subject());
      if (h == host_of.end()) return;
      out[h->second].push_back({f.subject(), h->second, wanted, when->as_timestamp(), f.id});
    });
  }
  for (auto& [host, evs] : out)
    std::sort(evs.begin(), evs.end(), [](const ObservedEvent& a, const ObservedEvent& b) {
      return a.ts != b.ts ? a.ts < b.ts : a.kind_fact < b.kind_fact;
    });
  return out;
}

inline std::vector<FactId> sorted_unique(std::vector<FactId> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace detail

inline std::string indicator_rule_id(IndicatorKind k) { return "IND_" + std::string(to_string(k)); }

/// Indicator facts the current store supports, whether or not already present.
///
///  * MassFileModification: >= mass_file_mod_threshold FileModified events with
///    sensitive = "true" inside some window [t, t + mass_file_mod_window).
///  * HighCpuUsage: >= high_cpu_min_samples ProcessStat events whose cpuPercent
///    exceeds high_cpu_threshold.
///  * DownloadFromUnknownSource: a SuspiciousDownload alert and a
///    FileCreatedFromNetwork event on the same host.
///  * InboundAccessSpike: InboundConnectionBlocked counts per aligned
///    spike_window bucket; a bucket spikes when its count is >= spike_min_count
///    and >= spike_factor times the mean of all earlier buckets since the
///    host's first one (0 when there are none).
inline std::vector<Derivation> compute_indicators(const FactStore& store, const IndicatorConfig& cfg) {
  std::vector<Derivation> out;
  auto emit = [&](const std::string& host, IndicatorKind kind, std::vector<FactId> premises) {
    out.push_back({Triple{host, "hasIndicator", Value::entity(indicator_entity(kind))}, indicator_rule_id(kind),
                   detail::sorted_unique(std::move(premises))});
  };

  for (const auto& [host, all] : detail::events_by_host(store, EventKind::FileModified)) {
    std::vector<const detail::ObservedEvent*> evs;
    for (const auto& e : all) {
      const Value* s = store.first_object(e.id, "sensitive");
      if (s && s->kind() == ValueKind::String && s->text() == "true") evs.push_back(&e);
    }
    const std::int64_t width = cfg.mass_file_mod_window * Timestamp::kPerSecond;
    std::size_t left = 0;
    for (std::size_t right = 0; right < evs.size(); ++right) {
      while (evs[right]->ts.micros - evs[left]->ts.micros >= width) ++left;
      if (static_cast<std::int64_t>(right - left + 1) >= cfg.mass_file_mod_threshold) {
        std::vector<FactId> premises;
        for (std::size_t k = left; k <= right; ++k) premises.push_back(evs[k]->kind_fact);
        emit(host, IndicatorKind::MassFileModification, std::move(premises));
        break;
      }
    }
  }

  for (const auto& [host, evs] : detail::events_by_host(store, EventKind::ProcessStat)) {
    std::vector<FactId> premises;
    for (const auto& e : evs) {
      auto cpu_id = [&]() -> std::optional<FactId> {
        Pattern p{e.id, "cpuPercent", std::nullopt};
        std::optional<FactId> found;
        store.for_each_match(p, IdRange{}, [&](const Fact& f) {
          if (!found && f.object().is_numeric() && f.object().as_decimal() > cfg.high_cpu_threshold) found = f.id;
        });
        return found;
      }();
      if (!cpu_id) continue;
      premises.push_back(e.kind_fact);
      premises.push_back(*cpu_id);
      if (static_cast<std::int64_t>(premises.size() / 2) >= cfg.high_cpu_min_samples) {
        emit(host, IndicatorKind::HighCpuUsage, std::move(premises));
        break;
      }
    }
  }

  {
    const auto downloads = detail::events_by_host(store, EventKind::SuspiciousDownload);
    const auto drops = detail::events_by_host(store, EventKind::FileCreatedFromNetwork);
    for (const auto& [host, dl] : downloads) {
      auto it = drops.find(host);
      if (it == drops.end() || dl.empty() || it->second.empty()) continue;
      emit(host, IndicatorKind::DownloadFromUnknownSource, {dl.front().kind_fact, it->second.front().kind_fact});
    }
  }

  for (const auto& [host, evs] : detail::events_by_host(store, EventKind::InboundConnectionBlocked)) {
    std::map<std::int64_t, std::vector<FactId>> buckets;
    for (const auto& e : evs) {
      const std::int64_t secs = e.ts.seconds();
      const std::int64_t b = secs >= 0 ? secs / cfg.spike_window : -((-secs + cfg.spike_window - 1) / cfg.spike_window);
      buckets[b].push_back(e.kind_fact);
    }
    if (buckets.empty()) continue;
    const std::int64_t first = buckets.begin()->first;
    std::int64_t earlier_total = 0;
    for (const auto& [b, ids] : buckets) {
      const auto count = static_cast<std::int64_t>(ids.size());
      const std::int64_t earlier_buckets = b - first;
      const double mean = earlier_buckets > 0 ? static_cast<double>(earlier_total) / static_cast<double>(earlier_buckets) : 0.0;
      if (count >= cfg.spike_min_count && static_cast<double>(count) >= cfg.spike_factor * mean) {
        emit(host, IndicatorKind::InboundAccessSpike, ids);
        break;
      }
      earlier_total += count;
    }
  }
  return out;
}

/// Asserts every supported indicator fact that is not yet in the store and
/// returns the ids of the new ones. Running it twice adds nothing the second time.
inline std::vector<FactId> extract_indicators(FactStore& store, const IndicatorConfig& cfg) {
  std::vector<FactId> added;
  for (auto& d : compute_indicators(store, cfg)) {
    if (store.contains(d.triple)) continue;
    auto r = store.insert(std::move(d.triple), Derived{std::move(d.rule_id), std::move(d.premises)});
    if (r.inserted) added.push_back(r.id);
  }
  return added;
}

// ---------------------------------------------------------------------------
// Alerts
// ---------------------------------------------------------------------------

enum class AlertTier : std::uint8_t { Suspicion, Confirmed };

inline std::string_view to_string(AlertTier t) { return t == AlertTier::Confirmed ? "Confirmed" : "Suspicion"; }

struct Alert {
  std::string host;
  AlertTier tier = AlertTier::Suspicion;
  std::optional<std::string> malware;
  std::set<KillChainPhase> phases;
  /// attackDetected and hasPhaseEvidence facts backing the alert, ascending.
  std::vector<FactId> evidence;
  std::vector<DerivationNode> explanations;
  std::optional<Timestamp> first_seen;
  std::optional<Timestamp> last_seen;
};

inline bool has_intel_leaf(const FactStore& store, const DerivationNode& tree) {
  for (FactId id : leaves_of(tree)) {
    const auto* a = std::get_if<Asserted>(&store.at(id).provenance);
    if (a && a->source == "intel") return true;
  }
  return false;
}

/// One alert per host, sorted by host:
///  * Confirmed when an attackDetected(host, malware) fact exists whose
///    derivation rests on at least one intel fact;
///  * otherwise Suspicion when phase evidence covers >= 2 distinct phases;
///  * otherwise nothing.
inline std::vector<Alert> assemble_alerts(const FactStore& store) {
  std::map<std::string, std::vector<const Fact*>> phase_facts;
  std::map<std::string, std::vector<const Fact*>> attack_facts;
  for (const Fact* f : store.query(Pattern{std::nullopt, std::string("hasPhaseEvidence"), std::nullopt}))
    if (f->object().is_entity() && parse_phase(f->object().text())) phase_facts[f->subject()].push_back(f);
  for (const Fact* f : store.query(Pattern{std::nullopt, std::string("attackDetected"), std::nullopt}))
    attack_facts[f->subject()].push_back(f);

  std::set<std::string> hosts;
  for (const auto& [h, _] : phase_facts) hosts.insert(h);
  for (const auto& [h, _] : attack_facts) hosts.insert(h);

  std::vector<Alert> out;
  for (const auto& host : hosts) {
    Alert alert;
    alert.host = host;
    std::vector<FactId> evidence;
    if (auto it = phase_facts.find(host); it != phase_facts.end()) {
      for (const Fact* f : it->second) {
        alert.phases.insert(*parse_phase(f->object().text()));
        evidence.push_back(f->id);
      }
    }
    if (alert.phases.empty()) continue;
    if (auto it = attack_facts.find(host); it != attack_facts.end()) {
      std::vector<const Fact*> confirmed;
      for (const Fact* f : it->second)
        if (has_intel_leaf(store, store.explain(f->id))) confirmed.push_back(f);
      if (!confirmed.empty()) {
        alert.tier = AlertTier::Confirmed;
        std::sort(confirmed.begin(), confirmed.end(),
                  [](const Fact* a, const Fact* b) { return a->object().text() < b->object().text(); });
        alert.malware = confirmed.front()->object().text();
        for (const Fact* f : confirmed) evidence.push_back(f->id);
      }
    }
    if (alert.tier != AlertTier::Confirmed && alert.phases.size() < 2) continue;
    alert.evidence = detail::sorted_unique(std::move(evidence));
    for (FactId id : alert.evidence) {
      alert.explanations.push_back(store.explain(id));
      for (FactId leaf : leaves_of(alert.explanations.back())) {
        const Value* when = store.first_object(store.at(leaf).subject(), "eventTime");
        if (!when || when->kind() != ValueKind::Timestamp) continue;
        const Timestamp ts = when->as_timestamp();
        if (!alert.first_seen || ts < *alert.first_seen) alert.first_seen = ts;
        if (!alert.last_seen || ts > *alert.last_seen) alert.last_seen = ts;
      }
    }
    out.push_back(std::move(alert));
  }
  return out;
}

/// {host, tier, malware, phases[], first_seen, last_seen, evidence_fact_ids[]}
inline nlohmann::ordered_json alert_to_json(const Alert& a) {
  nlohmann::ordered_json j;
  j["host"] = a.host;
  j["tier"] = std::string(to_string(a.tier));
  j["malware"] = a.malware ? nlohmann::ordered_json(*a.malware) : nlohmann::ordered_json(nullptr);
  auto phases = nlohmann::ordered_json::array();
  for (auto p : a.phases) phases.push_back(std::string(to_string(p)));
  j["phases"] = std::move(phases);
  j["first_seen"] = a.first_seen ? nlohmann::ordered_json(format_timestamp(*a.first_seen)) : nlohmann::ordered_json(nullptr);
  j["last_seen"] = a.last_seen ? nlohmann::ordered_json(format_timestamp(*a.last_seen)) : nlohmann::ordered_json(nullptr);
  j["evidence_fact_ids"] = a.evidence;
  return j;
}

inline std::string render_alerts_jsonl(const std::vector<Alert>& alerts) {
  std::string out;
  for (const auto& a : alerts) {
    out += alert_to_json(a).dump();
    out.push_back('\n');
  }
  return out;
}

/// Indented derivation tree, one fact per line.
inline void render_tree(const FactStore& store, const DerivationNode& node, std::string& out, int depth = 0) {
  out.append(static_cast<std::size_t>(depth) * 2, ' ');
  const Fact& f = store.at(node.fact);
  out += "#" + std::to_string(f.id) + " " + f.subject() + " " + f.predicate() + " " + format_value(f.object());
  if (node.is_leaf()) {
    out += "  [" + format_provenance(f.provenance) + "]\n";
  } else {
    out += "  <= " + node.rule_id + "\n";
    for (const auto& p : node.premises) render_tree(store, p, out, depth + 1);
  }
}

/// Human-readable report: one block per host.
inline std::string render_report(const FactStore& store, const std::vector<Alert>& alerts, bool with_trees = false) {
  if (alerts.empty()) return "no alerts\n";
  std::string out;
  for (const auto& a : alerts) {
    out += a.host + "  " + std::string(a.tier == AlertTier::Confirmed ? "CONFIRMED" : "SUSPICION");
    if (a.malware) out += "  " + *a.malware;
    out += "\n  phases    ";
    bool first = true;
    for (auto p : a.phases) {
      out += (first ? "" : ", ") + std::string(to_string(p));
      first = false;
    }
    out += "\n  seen      ";
    out += a.first_seen ? format_timestamp(*a.first_seen) : "-";
    out += " .. ";
    out += a.last_seen ? format_timestamp(*a.last_seen) : "-";
    out += "\n  evidence  ";
    for (std::size_t i = 0; i < a.evidence.size(); ++i) out += (i ? " #" : "#") + std::to_string(a.evidence[i]);
    out += "\n";
    if (with_trees)
      for (const auto& t : a.explanations)
        if (store.at(t.fact).predicate() == "attackDetected") render_tree(store, t, out, 2);
  }
  return out;
}

}  // namespace kc
