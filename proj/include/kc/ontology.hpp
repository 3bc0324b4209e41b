#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kc/error.hpp"
#include "kc/text.hpp"
#include "kc/value.hpp"

namespace kc {

// ---------------------------------------------------------------------------
// Closed enumerations
// ---------------------------------------------------------------------------

/// Lockheed Martin intrusion kill chain, in its canonical order.
enum class KillChainPhase : std::uint8_t {
  Reconnaissance,
  Weaponization,
  Delivery,
  Exploitation,
  Installation,
  CommandAndControl,
  ActionsOnObjectives,
};

inline constexpr std::array<KillChainPhase, 7> kAllPhases = {
    KillChainPhase::Reconnaissance, KillChainPhase::Weaponization,    KillChainPhase::Delivery,
    KillChainPhase::Exploitation,   KillChainPhase::Installation,     KillChainPhase::CommandAndControl,
    KillChainPhase::ActionsOnObjectives,
};

inline constexpr std::string_view to_string(KillChainPhase p) {
  switch (p) {
    case KillChainPhase::Reconnaissance: return "Reconnaissance";
    case KillChainPhase::Weaponization: return "Weaponization";
    case KillChainPhase::Delivery: return "Delivery";
    case KillChainPhase::Exploitation: return "Exploitation";
    case KillChainPhase::Installation: return "Installation";
    case KillChainPhase::CommandAndControl: return "CommandAndControl";
    case KillChainPhase::ActionsOnObjectives: return "ActionsOnObjectives";
  }
  return "?";
}

/// Accepts the bare name or the `phase:` entity form.
inline std::optional<KillChainPhase> parse_phase(std::string_view s) {
  if (s.substr(0, 6) == "phase:") s.remove_prefix(6);
  for (auto p : kAllPhases)
    if (to_string(p) == s) return p;
  return std::nullopt;
}

inline std::string phase_entity(KillChainPhase p) { return "phase:" + std::string(to_string(p)); }

/// Sensor observation kinds. Unclassified is the sink for signatures the
/// configuration does not know; it is not part of the closed set.
enum class EventKind : std::uint8_t {
  PortScan,
  MalformedSmb,
  SuspiciousDownload,
  ProcessStat,
  FileModified,
  FileCreatedFromNetwork,
  InboundConnectionBlocked,
  Unclassified,
};

inline constexpr std::array<EventKind, 7> kClassifiedEventKinds = {
    EventKind::PortScan,     EventKind::MalformedSmb,           EventKind::SuspiciousDownload,
    EventKind::ProcessStat,  EventKind::FileModified,           EventKind::FileCreatedFromNetwork,
    EventKind::InboundConnectionBlocked,
};

inline constexpr std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::PortScan: return "PortScan";
    case EventKind::MalformedSmb: return "MalformedSmb";
    case EventKind::SuspiciousDownload: return "SuspiciousDownload";
    case EventKind::ProcessStat: return "ProcessStat";
    case EventKind::FileModified: return "FileModified";
    case EventKind::FileCreatedFromNetwork: return "FileCreatedFromNetwork";
    case EventKind::InboundConnectionBlocked: return "InboundConnectionBlocked";
    case EventKind::Unclassified: return "Unclassified";
  }
  return "?";
}

/// Token stored in snortKind/hostKind facts and matched by rules.
inline constexpr std::string_view kind_token(EventKind k) {
  switch (k) {
    case EventKind::PortScan: return "portscan";
    case EventKind::MalformedSmb: return "malformed_smb";
    case EventKind::SuspiciousDownload: return "suspicious_download";
    case EventKind::ProcessStat: return "process_stat";
    case EventKind::FileModified: return "file_modified";
    case EventKind::FileCreatedFromNetwork: return "file_created_from_network";
    case EventKind::InboundConnectionBlocked: return "inbound_connection_blocked";
    case EventKind::Unclassified: return "unclassified";
  }
  return "?";
}

/// Accepts either the enumerator name or its fact token.
inline std::optional<EventKind> parse_event_kind(std::string_view s) {
  for (auto k : kClassifiedEventKinds)
    if (to_string(k) == s || kind_token(k) == s) return k;
  if (s == "Unclassified" || s == "unclassified") return EventKind::Unclassified;
  return std::nullopt;
}

enum class IndicatorKind : std::uint8_t {
  MassFileModification,
  HighCpuUsage,
  DownloadFromUnknownSource,
  InboundAccessSpike,
};

inline constexpr std::array<IndicatorKind, 4> kAllIndicators = {
    IndicatorKind::MassFileModification, IndicatorKind::HighCpuUsage,
    IndicatorKind::DownloadFromUnknownSource, IndicatorKind::InboundAccessSpike};

inline constexpr std::string_view to_string(IndicatorKind k) {
  switch (k) {
    case IndicatorKind::MassFileModification: return "MassFileModification";
    case IndicatorKind::HighCpuUsage: return "HighCpuUsage";
    case IndicatorKind::DownloadFromUnknownSource: return "DownloadFromUnknownSource";
    case IndicatorKind::InboundAccessSpike: return "InboundAccessSpike";
  }
  return "?";
}

inline std::optional<IndicatorKind> parse_indicator(std::string_view s) {
  if (s.substr(0, 10) == "indicator:") s.remove_prefix(10);
  for (auto k : kAllIndicators)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline std::string indicator_entity(IndicatorKind k) { return "indicator:" + std::string(to_string(k)); }

// ---------------------------------------------------------------------------
// Triples and the predicate registry
// ---------------------------------------------------------------------------

/// subject-predicate-object content of a fact, without identity or provenance.
struct Triple {
  std::string subject;
  std::string predicate;
  Value object;

  friend bool operator==(const Triple& a, const Triple& b) {
    return a.subject == b.subject && a.predicate == b.predicate && a.object == b.object;
  }
  friend bool operator<(const Triple& a, const Triple& b) {
    if (a.subject != b.subject) return a.subject < b.subject;
    if (a.predicate != b.predicate) return a.predicate < b.predicate;
    return a.object < b.object;
  }
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::size_t h = std::hash<std::string>{}(t.subject);
    h = h * 31 + std::hash<std::string>{}(t.predicate);
    return h * 31 + t.object.hash();
  }
};

/// What a predicate's object must be. Shares its members with ValueKind.
using ObjectSchema = ValueKind;

inline std::optional<ObjectSchema> parse_schema(std::string_view s) {
  if (s == "entity") return ValueKind::Entity;
  if (s == "string") return ValueKind::String;
  if (s == "integer") return ValueKind::Integer;
  if (s == "decimal") return ValueKind::Decimal;
  if (s == "timestamp") return ValueKind::Timestamp;
  return std::nullopt;
}

/// Subjects and entity objects are non-empty tokens without whitespace or quotes.
inline bool is_valid_entity_text(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (text::is_space(c) || c == '"') return false;
  return true;
}

/// Converts `v` to the representation `schema` demands; integers widen to
/// decimals, every other mismatch is rejected.
inline std::optional<Value> conform(const Value& v, ObjectSchema schema) {
  if (v.kind() == schema) {
    if (schema == ValueKind::Entity && !is_valid_entity_text(v.text())) return std::nullopt;
    return v;
  }
  if (schema == ValueKind::Decimal && v.kind() == ValueKind::Integer)
    return Value::decimal(static_cast<double>(v.as_integer()));
  return std::nullopt;
}

class Vocabulary {
 public:
  static constexpr int kFormatVersion = 1;

  /// Returns true when the predicate is new. Re-registering the same schema
  /// is a no-op; a different schema throws ConflictingSchema.
  bool register_predicate(const std::string& name, ObjectSchema schema) {
    if (!text::is_identifier(name)) throw ConfigError("invalid predicate name '" + name + "'");
    auto [it, inserted] = predicates_.emplace(name, schema);
    if (!inserted && it->second != schema)
      throw ConflictingSchema("predicate '" + name + "' already registered as " +
                              std::string(to_string(it->second)) + ", not " + std::string(to_string(schema)));
    return inserted;
  }

  bool contains(std::string_view name) const { return predicates_.find(name) != predicates_.end(); }

  std::optional<ObjectSchema> schema(std::string_view name) const {
    auto it = predicates_.find(name);
    if (it == predicates_.end()) return std::nullopt;
    return it->second;
  }

  const std::map<std::string, ObjectSchema, std::less<>>& predicates() const { return predicates_; }

  /// nullopt when valid, otherwise the reason.
  std::optional<std::string> check(const Triple& t) const {
    auto s = schema(t.predicate);
    if (!s) return "unregistered predicate '" + t.predicate + "'";
    if (!is_valid_entity_text(t.subject)) return "invalid subject '" + t.subject + "'";
    if (!conform(t.object, *s))
      return "object " + format_value(t.object) + " does not match " + std::string(to_string(*s)) +
             " schema of '" + t.predicate + "'";
    return std::nullopt;
  }

  /// Background knowledge declared with `fact` lines, in file order.
  const std::vector<Triple>& knowledge() const { return knowledge_; }

  void add_knowledge(Triple t) {
    if (auto why = check(t)) throw VocabularyViolation(*why);
    t.object = *conform(t.object, *schema(t.predicate));
    knowledge_.push_back(std::move(t));
  }

  /// Parses the `vocab.kcv` declaration format:
  ///
  ///   version 1
  ///   predicate <name> <entity|string|integer|decimal|timestamp>
  ///   enum <KillChainPhase|EventKind|IndicatorKind> <member>...
  ///   fact <subject> <predicate> <object>
  ///
  /// `enum` lines must list exactly the compiled-in members, in order.
  static Vocabulary parse(std::string_view content, const std::string& origin = "vocab.kcv") {
    Vocabulary vocab;
    bool saw_version = false;
    const auto lines = text::split_lines(content);
    for (std::size_t n = 0; n < lines.size(); ++n) {
      const auto where = [&] { return origin + ":" + std::to_string(n + 1) + ": "; };
      const auto line = text::trim(text::strip_comment(lines[n]));
      if (line.empty()) continue;
      const auto words = text::split_ws(line);
      const auto directive = words[0];
      if (directive == "version") {
        if (words.size() != 2 || words[1] != std::to_string(kFormatVersion))
          throw ConfigError(where() + "unsupported vocabulary version");
        saw_version = true;
        continue;
      }
      if (!saw_version) throw ConfigError(where() + "first directive must be 'version " + std::to_string(kFormatVersion) + "'");
      if (directive == "predicate") {
        if (words.size() != 3) throw ConfigError(where() + "expected: predicate <name> <type>");
        auto schema = parse_schema(words[2]);
        if (!schema) throw ConfigError(where() + "unknown type '" + std::string(words[2]) + "'");
        try {
          vocab.register_predicate(std::string(words[1]), *schema);
        } catch (const ConflictingSchema& e) {
          throw ConflictingSchema(where() + e.what());
        }
      } else if (directive == "enum") {
        if (words.size() < 2) throw ConfigError(where() + "expected: enum <name> <member>...");
        check_enum(words, where());
      } else if (directive == "fact") {
        // Object may be a quoted string containing spaces.
        if (words.size() < 4) throw ConfigError(where() + "expected: fact <subject> <predicate> <object>");
        std::string_view obj_text = text::trim(line.substr(static_cast<std::size_t>(words[3].data() - line.data())));
        auto obj = parse_value_token(obj_text);
        if (!obj) throw ConfigError(where() + "cannot parse object '" + std::string(obj_text) + "'");
        try {
          vocab.add_knowledge(Triple{std::string(words[1]), std::string(words[2]), std::move(*obj)});
        } catch (const VocabularyViolation& e) {
          throw VocabularyViolation(where() + e.what());
        }
      } else {
        throw ConfigError(where() + "unknown directive '" + std::string(directive) + "'");
      }
    }
    if (!saw_version) throw ConfigError(origin + ": missing version line");
    return vocab;
  }

  static Vocabulary load(const std::filesystem::path& path) {
    return parse(text::read_file(path), path.string());
  }

 private:
  template <typename Enum, std::size_t N>
  static void expect_members(const std::vector<std::string_view>& words, const std::array<Enum, N>& members,
                             const std::string& where) {
    if (words.size() - 2 != N) throw ConfigError(where + "enum " + std::string(words[1]) + " must list " + std::to_string(N) + " members");
    for (std::size_t i = 0; i < N; ++i)
      if (words[i + 2] != to_string(members[i]))
        throw ConfigError(where + "enum " + std::string(words[1]) + " member " + std::to_string(i + 1) +
                          " is '" + std::string(words[i + 2]) + "', expected '" + std::string(to_string(members[i])) + "'");
  }

  static void check_enum(const std::vector<std::string_view>& words, const std::string& where) {
    if (words[1] == "KillChainPhase") {
      expect_members(words, kAllPhases, where);
    } else if (words[1] == "EventKind") {
      expect_members(words, kClassifiedEventKinds, where);
    } else if (words[1] == "IndicatorKind") {
      expect_members(words, kAllIndicators, where);
    } else {
      throw ConfigError(where + "unknown enumeration '" + std::string(words[1]) + "'");
    }
  }

  std::map<std::string, ObjectSchema, std::less<>> predicates_;
  std::vector<Triple> knowledge_;
};

/// True iff the predicate is registered and the object matches its schema.
inline bool validate_fact(const Triple& t, const Vocabulary& vocab) { return !vocab.check(t).has_value(); }

}  // namespace kc
