#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "kc/error.hpp"
#include "kc/ontology.hpp"
#include "kc/text.hpp"
#include "kc/value.hpp"

namespace kc {

// ---------------------------------------------------------------------------
// Addresses and configuration tables
// ---------------------------------------------------------------------------

struct Ipv4 {
  std::array<std::uint8_t, 4> octets{};

  friend auto operator<=>(const Ipv4&, const Ipv4&) = default;

  std::string to_string() const {
    return std::to_string(octets[0]) + "." + std::to_string(octets[1]) + "." + std::to_string(octets[2]) + "." +
           std::to_string(octets[3]);
  }

  /// Strict dotted quad: four decimal octets, no leading '+', at most 3 digits each.
  static std::optional<Ipv4> parse(std::string_view s) {
    Ipv4 ip;
    std::size_t i = 0;
    for (int part = 0; part < 4; ++part) {
      if (part > 0) {
        if (i >= s.size() || s[i] != '.') return std::nullopt;
        ++i;
      }
      std::size_t digits = 0;
      unsigned v = 0;
      while (i < s.size() && s[i] >= '0' && s[i] <= '9' && digits < 4) {
        v = v * 10 + static_cast<unsigned>(s[i] - '0');
        ++i;
        ++digits;
      }
      if (digits == 0 || digits > 3 || v > 255) return std::nullopt;
      ip.octets[part] = static_cast<std::uint8_t>(v);
    }
    if (i != s.size()) return std::nullopt;
    return ip;
  }
};

/// Maps Snort `gid:sid` pairs to event kinds (`sidmap.kcm`).
class SidMap {
 public:
  void add(std::uint32_t gid, std::uint32_t sid, EventKind kind) { map_[{gid, sid}] = kind; }

  EventKind classify(std::uint32_t gid, std::uint32_t sid) const {
    auto it = map_.find({gid, sid});
    return it == map_.end() ? EventKind::Unclassified : it->second;
  }

  std::size_t size() const { return map_.size(); }

  /// Format: one `<gid>:<sid> <EventKind>` per line, `#` comments.
  static SidMap parse(std::string_view content, const std::string& origin = "sidmap.kcm") {
    SidMap out;
    const auto lines = text::split_lines(content);
    for (std::size_t n = 0; n < lines.size(); ++n) {
      const auto where = origin + ":" + std::to_string(n + 1) + ": ";
      const auto words = text::split_ws(text::strip_comment(lines[n]));
      if (words.empty()) continue;
      if (words.size() != 2) throw ConfigError(where + "expected <gid>:<sid> <EventKind>");
      const auto colon = words[0].find(':');
      auto gid = colon == std::string_view::npos ? std::nullopt : parse_number(words[0].substr(0, colon));
      auto sid = colon == std::string_view::npos ? std::nullopt : parse_number(words[0].substr(colon + 1));
      if (!gid || !sid || gid->kind() != ValueKind::Integer || sid->kind() != ValueKind::Integer ||
          gid->as_integer() < 0 || sid->as_integer() < 0 || gid->as_integer() > UINT32_MAX ||
          sid->as_integer() > UINT32_MAX)
        throw ConfigError(where + "bad gid:sid '" + std::string(words[0]) + "'");
      auto kind = parse_event_kind(words[1]);
      if (!kind || *kind == EventKind::Unclassified)
        throw ConfigError(where + "unknown event kind '" + std::string(words[1]) + "'");
      const auto g = static_cast<std::uint32_t>(gid->as_integer());
      const auto sd = static_cast<std::uint32_t>(sid->as_integer());
      if (auto it = out.map_.find({g, sd}); it != out.map_.end() && it->second != *kind)
        throw ConfigError(where + std::string(words[0]) + " is already mapped to " + std::string(to_string(it->second)));
      out.add(g, sd, *kind);
    }
    return out;
  }

  static SidMap load(const std::filesystem::path& path) { return parse(text::read_file(path), path.string()); }

 private:
  std::map<std::pair<std::uint32_t, std::uint32_t>, EventKind> map_;
};

/// Lowercases and collapses runs of whitespace.
inline std::string normalize_phrase(std::string_view s) {
  std::string out;
  for (char c : text::trim(s)) {
    if (text::is_space(c)) {
      if (!out.empty() && out.back() != ' ') out.push_back(' ');
    } else {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

/// Technique synonym table (`techniques.kct`). Its technique ids double as the
/// registry of known techniques.
class TechniqueTable {
 public:
  void add(std::string_view phrase, std::string technique_id) {
    if (!is_entity_id(technique_id) || technique_id.rfind("technique:", 0) != 0)
      throw ConfigError("technique id must look like technique:<name>, got '" + technique_id + "'");
    ids_.insert(technique_id);
    phrases_[normalize_phrase(phrase)] = std::move(technique_id);
  }

  std::optional<std::string> lookup_phrase(std::string_view phrase) const {
    auto it = phrases_.find(normalize_phrase(phrase));
    if (it == phrases_.end()) return std::nullopt;
    return it->second;
  }

  bool is_registered(std::string_view id) const { return ids_.count(std::string(id)) != 0; }

  /// Accepts `technique:x`, bare `x`, or a synonym phrase.
  std::optional<std::string> resolve(std::string_view ref) const {
    if (is_registered(ref)) return std::string(ref);
    std::string prefixed = "technique:" + std::string(ref);
    if (is_registered(prefixed)) return prefixed;
    return lookup_phrase(ref);
  }

  const std::set<std::string>& ids() const { return ids_; }

  /// Format: one `"<phrase>" <technique-id>` per line, `#` comments.
  static TechniqueTable parse(std::string_view content, const std::string& origin = "techniques.kct") {
    TechniqueTable out;
    const auto lines = text::split_lines(content);
    for (std::size_t n = 0; n < lines.size(); ++n) {
      const auto where = origin + ":" + std::to_string(n + 1) + ": ";
      const auto line = text::trim(text::strip_comment(lines[n]));
      if (line.empty()) continue;
      std::size_t i = 0;
      auto phrase = read_quoted(line, i);
      if (!phrase) throw ConfigError(where + "expected quoted phrase");
      const auto rest = text::split_ws(line.substr(i));
      if (rest.size() != 1) throw ConfigError(where + "expected \"<phrase>\" <technique-id>");
      try {
        out.add(*phrase, std::string(rest[0]));
      } catch (const ConfigError& e) {
        throw ConfigError(where + e.what());
      }
    }
    return out;
  }

  static TechniqueTable load(const std::filesystem::path& path) {
    return parse(text::read_file(path), path.string());
  }

 private:
  std::map<std::string, std::string> phrases_;
  std::set<std::string> ids_;
};

/// Named hosts of the monitored network. Addresses without a name map to
/// `host:<ip>`.
class HostDirectory {
 public:
  void add(std::string name, Ipv4 ip) {
    if (!text::is_identifier(name)) throw ConfigError("invalid host name '" + name + "'");
    const std::string entity = "host:" + name;
    auto [it, inserted] = by_ip_.emplace(ip, entity);
    if (!inserted && it->second != entity)
      throw ConfigError("address " + ip.to_string() + " already names " + it->second);
  }

  std::string entity_for(const Ipv4& ip) const {
    auto it = by_ip_.find(ip);
    return it == by_ip_.end() ? "host:" + ip.to_string() : it->second;
  }

  const std::map<Ipv4, std::string>& entries() const { return by_ip_; }

  /// (host, ipv4Address, "a.b.c.d") for every named host, sorted by address.
  std::vector<Triple> facts() const {
    std::vector<Triple> out;
    for (const auto& [ip, entity] : by_ip_) out.push_back({entity, "ipv4Address", Value::string(ip.to_string())});
    return out;
  }

 private:
  std::map<Ipv4, std::string> by_ip_;
};

// ---------------------------------------------------------------------------
// Sensor events
// ---------------------------------------------------------------------------

enum class SensorSource : std::uint8_t { Snort, ProcessAgent, FileAgent };

inline std::string_view to_string(SensorSource s) {
  switch (s) {
    case SensorSource::Snort: return "snort";
    case SensorSource::ProcessAgent: return "process";
    case SensorSource::FileAgent: return "file";
  }
  return "?";
}

/// Fields of a Snort fast alert that do not become facts.
struct SnortAlert {
  std::uint32_t gid = 0;
  std::uint32_t sid = 0;
  std::uint32_t rev = 0;
  std::string message;
  std::optional<std::string> classification;
  std::optional<int> priority;
  std::string protocol;
  std::optional<std::uint16_t> src_port;
  std::optional<std::uint16_t> dst_port;
  bool has_year = false;

  friend bool operator==(const SnortAlert&, const SnortAlert&) = default;
};

struct SensorEvent {
  std::string event_id;
  EventKind kind = EventKind::Unclassified;
  SensorSource source = SensorSource::Snort;
  Timestamp ts;
  std::optional<Ipv4> src_ip;
  std::optional<Ipv4> dst_ip;
  /// Host entity for agent events.
  std::string host;
  /// Raw agent event type, e.g. "proc.stat".
  std::string agent_type;
  std::map<std::string, Value> attributes;
  std::optional<SnortAlert> snort;
};

/// Content-derived id: identical input lines map to the same event.
inline std::string make_event_id(std::string_view source_tag, std::string_view payload) {
  std::string key(source_tag);
  key.push_back('\n');
  key.append(payload);
  return "event:e" + text::hex(text::fnv1a(key), 12);
}

namespace detail {

/// Cursor over one Snort line that reports 1-based columns on failure.
class LineCursor {
 public:
  explicit LineCursor(std::string_view s) : s_(s) {}

  std::size_t pos() const { return i_; }
  bool done() const { return i_ >= s_.size(); }
  char peek() const { return i_ < s_.size() ? s_[i_] : '\0'; }
  std::string_view rest() const { return s_.substr(i_); }

  [[noreturn]] void fail(const std::string& what) const { fail_at(what, i_); }
  [[noreturn]] void fail_at(const std::string& what, std::size_t at) const {
    throw MalformedLine("snort: " + what, {1, at + 1});
  }

  void expect(std::string_view tok, const char* what) {
    for (std::size_t k = 0; k < tok.size(); ++k)
      if (i_ + k >= s_.size() || s_[i_ + k] != tok[k]) fail_at(std::string("expected ") + what, i_ + k);
    i_ += tok.size();
  }

  bool accept(std::string_view tok) {
    if (s_.substr(i_, tok.size()) != tok) return false;
    i_ += tok.size();
    return true;
  }

  void spaces(const char* what) {
    if (peek() != ' ' && peek() != '\t') fail(std::string("expected whitespace before ") + what);
    while (peek() == ' ' || peek() == '\t') ++i_;
  }

  void advance() { ++i_; }

  void skip_spaces() {
    while (peek() == ' ' || peek() == '\t') ++i_;
  }

  int digits(std::size_t n, const char* what) {
    int v = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const char c = peek();
      if (c < '0' || c > '9') fail(std::string("expected digit in ") + what);
      v = v * 10 + (c - '0');
      ++i_;
    }
    return v;
  }

  std::uint64_t number(const char* what, std::uint64_t max) {
    const std::size_t start = i_;
    std::uint64_t v = 0;
    while (peek() >= '0' && peek() <= '9') {
      v = v * 10 + static_cast<std::uint64_t>(peek() - '0');
      if (v > max) fail_at(std::string(what) + " out of range", start);
      ++i_;
    }
    if (i_ == start) fail(std::string("expected ") + what);
    return v;
  }

  /// Advances to the next occurrence of `tok`, returning the skipped text.
  std::string_view until(std::string_view tok, const char* what) {
    const auto at = s_.find(tok, i_);
    if (at == std::string_view::npos) fail(std::string("unterminated ") + what);
    auto out = s_.substr(i_, at - i_);
    i_ = at;
    return out;
  }

  Ipv4 address(const char* what) {
    const std::size_t start = i_;
    while ((peek() >= '0' && peek() <= '9') || peek() == '.') ++i_;
    auto ip = Ipv4::parse(s_.substr(start, i_ - start));
    if (!ip) fail_at(std::string("malformed ") + what + " address", start);
    return *ip;
  }

 private:
  std::string_view s_;
  std::size_t i_ = 0;
};

}  // namespace detail

/// Parses one Snort "fast" alert line:
///
///   MM/DD[/YY]-HH:MM:SS.ffffff  [**] [gid:sid:rev] MSG [**] [Classification: C] [Priority: P] {PROTO} SRC[:SPORT] -> DST[:DPORT]
///
/// Classification and priority are optional, as are ports (ICMP has none).
/// Without a year field the event is dated in `default_year`. The event id is
/// left empty. Throws MalformedLine with the column of the first divergence.
inline SensorEvent parse_snort_line(std::string_view line, const SidMap& sidmap, int default_year = 1970) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n' || line.back() == ' ')) line.remove_suffix(1);
  detail::LineCursor c(line);
  SnortAlert alert;

  const std::size_t ts_start = c.pos();
  const int month = c.digits(2, "month");
  c.expect("/", "'/' after month");
  const int day = c.digits(2, "day");
  int year = default_year;
  if (c.accept("/")) {
    year = 2000 + c.digits(2, "year");
    alert.has_year = true;
  }
  c.expect("-", "'-' before time");
  const int hour = c.digits(2, "hour");
  c.expect(":", "':' after hour");
  const int minute = c.digits(2, "minute");
  c.expect(":", "':' after minute");
  const int second = c.digits(2, "second");
  std::int64_t micros = 0;
  if (c.accept(".")) {
    const std::size_t frac_start = c.pos();
    std::int64_t scale = 100000;
    while (c.peek() >= '0' && c.peek() <= '9') {
      if (c.pos() - frac_start >= 6) c.fail("more than 6 fractional digits");
      micros += (c.peek() - '0') * scale;
      scale /= 10;
      c.advance();
    }
    if (c.pos() == frac_start) c.fail("expected fractional seconds");
  }
  auto ts = make_timestamp(year, month, day, hour, minute, second, micros);
  if (!ts) c.fail_at("timestamp out of range", ts_start);

  c.spaces("'[**]'");
  c.expect("[**]", "'[**]'");
  c.spaces("signature id");
  c.expect("[", "'[' before gid:sid:rev");
  alert.gid = static_cast<std::uint32_t>(c.number("gid", UINT32_MAX));
  c.expect(":", "':' after gid");
  alert.sid = static_cast<std::uint32_t>(c.number("sid", UINT32_MAX));
  c.expect(":", "':' after sid");
  alert.rev = static_cast<std::uint32_t>(c.number("rev", UINT32_MAX));
  c.expect("]", "']' after rev");
  c.spaces("message");
  const std::size_t msg_start = c.pos();
  auto msg = text::trim(c.until(" [**]", "message"));
  if (msg.empty()) c.fail_at("empty message", msg_start);
  alert.message = std::string(msg);
  c.expect(" [**]", "'[**]' after message");

  c.skip_spaces();
  if (c.accept("[Classification:")) {
    c.skip_spaces();
    auto cls = text::trim(c.until("]", "classification"));
    alert.classification = std::string(cls);
    c.expect("]", "']'");
    c.skip_spaces();
  }
  if (c.accept("[Priority:")) {
    c.skip_spaces();
    alert.priority = static_cast<int>(c.number("priority", 255));
    c.expect("]", "']' after priority");
    c.skip_spaces();
  }
  c.expect("{", "'{' before protocol");
  const std::size_t proto_start = c.pos();
  auto proto = c.until("}", "protocol");
  // Snort prints unknown protocols as e.g. PROTO:255.
  const bool proto_ok = !proto.empty() && std::all_of(proto.begin(), proto.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == ':';
  });
  if (!proto_ok) c.fail_at("invalid protocol", proto_start);
  alert.protocol = std::string(proto);
  c.expect("}", "'}'");
  c.spaces("source address");

  SensorEvent ev;
  ev.source = SensorSource::Snort;
  ev.src_ip = c.address("source");
  if (c.accept(":")) alert.src_port = static_cast<std::uint16_t>(c.number("source port", 65535));
  c.spaces("'->'");
  c.expect("->", "'->'");
  c.spaces("destination address");
  ev.dst_ip = c.address("destination");
  if (c.accept(":")) alert.dst_port = static_cast<std::uint16_t>(c.number("destination port", 65535));
  if (!c.done()) c.fail("unexpected trailing text");

  ev.ts = *ts;
  ev.kind = sidmap.classify(alert.gid, alert.sid);
  ev.snort = std::move(alert);
  return ev;
}

/// Renders a Snort event back to fast-alert text (without the year field
/// unless the source line had one).
inline std::string render_snort_line(const SensorEvent& ev) {
  if (!ev.snort || !ev.src_ip || !ev.dst_ip) throw MalformedEvent("not a snort event");
  const SnortAlert& a = *ev.snort;
  const std::string iso = format_timestamp(ev.ts);  // YYYY-MM-DDTHH:MM:SS[.ffffff]Z
  const std::int64_t frac = ev.ts.micros - ev.ts.seconds() * Timestamp::kPerSecond;
  char ts[40];
  if (a.has_year) {
    std::snprintf(ts, sizeof ts, "%.2s/%.2s/%.2s-%.8s.%06lld", iso.c_str() + 5, iso.c_str() + 8, iso.c_str() + 2,
                  iso.c_str() + 11, static_cast<long long>(frac));
  } else {
    std::snprintf(ts, sizeof ts, "%.2s/%.2s-%.8s.%06lld", iso.c_str() + 5, iso.c_str() + 8, iso.c_str() + 11,
                  static_cast<long long>(frac));
  }
  std::string out = ts;
  out += "  [**] [" + std::to_string(a.gid) + ":" + std::to_string(a.sid) + ":" + std::to_string(a.rev) + "] " +
         a.message + " [**]";
  if (a.classification) out += " [Classification: " + *a.classification + "]";
  if (a.priority) out += " [Priority: " + std::to_string(*a.priority) + "]";
  out += " {" + a.protocol + "} " + ev.src_ip->to_string();
  if (a.src_port) out += ":" + std::to_string(*a.src_port);
  out += " -> " + ev.dst_ip->to_string();
  if (a.dst_port) out += ":" + std::to_string(*a.dst_port);
  return out;
}

inline EventKind host_event_kind(std::string_view type) {
  if (type == "proc.stat") return EventKind::ProcessStat;
  if (type == "file.modified") return EventKind::FileModified;
  if (type == "file.net_created") return EventKind::FileCreatedFromNetwork;
  return EventKind::Unclassified;
}

/// Parses one JSON-Lines record from a host agent:
/// {"agent": "process"|"file", "ts": ISO-8601, "host": entity, "type": "...", "attrs": {...}}.
/// attrs values become literals: strings, integers, decimals; booleans become
/// the strings "true"/"false". The event id is left empty.
inline SensorEvent parse_host_event(std::string_view json_line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_line);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedEvent(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw MalformedEvent("host event must be a JSON object");
  auto required = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end()) throw MalformedEvent(std::string("missing required field '") + key + "'");
    if (!it->is_string() || it->get_ref<const std::string&>().empty())
      throw MalformedEvent(std::string("field '") + key + "' must be a non-empty string");
    return it->get<std::string>();
  };
  const std::string agent = required("agent");
  const std::string ts_text = required("ts");
  std::string host = required("host");
  const std::string type = required("type");

  SensorEvent ev;
  if (agent == "process") {
    ev.source = SensorSource::ProcessAgent;
    if (type.rfind("proc.", 0) != 0) throw MalformedEvent("process agent cannot report type '" + type + "'");
  } else if (agent == "file") {
    ev.source = SensorSource::FileAgent;
    if (type.rfind("file.", 0) != 0) throw MalformedEvent("file agent cannot report type '" + type + "'");
  } else {
    throw MalformedEvent("unknown agent '" + agent + "'");
  }
  auto ts = parse_timestamp(ts_text);
  if (!ts) throw MalformedEvent("unparseable timestamp '" + ts_text + "'");
  ev.ts = *ts;
  if (host.find(':') == std::string::npos) host = "host:" + host;
  if (!is_valid_entity_text(host)) throw MalformedEvent("invalid host '" + host + "'");
  ev.host = std::move(host);
  ev.agent_type = type;
  ev.kind = host_event_kind(type);

  if (auto it = j.find("attrs"); it != j.end()) {
    if (!it->is_object()) throw MalformedEvent("'attrs' must be an object");
    for (const auto& [key, val] : it->items()) {
      if (!text::is_identifier(key)) throw MalformedEvent("invalid attribute name '" + key + "'");
      Value v;
      if (val.is_string()) v = Value::string(val.get<std::string>());
      else if (val.is_boolean()) v = Value::string(val.get<bool>() ? "true" : "false");
      else if (val.is_number_integer()) v = Value::integer(val.get<std::int64_t>());
      else if (val.is_number_float()) v = Value::decimal(val.get<double>());
      else throw MalformedEvent("attribute '" + key + "' must be a string, number or boolean");
      ev.attributes.emplace(key, std::move(v));
    }
  }
  return ev;
}

/// Reifies an event as facts about its id:
///
///   (event, snortKind|hostKind, "<kind token>")
///   (event, srcIp, host), (event, dstIp, host)     Snort only
///   (event, onHost, host)                          agents only
///   (event, eventTime, ts)
///   (event, <attribute>, literal)                  one per attribute
///   (host, observedEvent, event)
///
/// Snort evidence is attributed to the destination host. Throws
/// VocabularyViolation if an attribute predicate is unregistered or its
/// value does not fit the registered type.
inline std::vector<Triple> event_to_facts(const SensorEvent& ev, const Vocabulary& vocab,
                                          const HostDirectory& hosts = {}) {
  if (ev.event_id.empty()) throw MalformedEvent("event has no id");
  std::vector<Triple> out;
  const std::string kind(kind_token(ev.kind));
  std::string observer;
  if (ev.source == SensorSource::Snort) {
    if (!ev.src_ip || !ev.dst_ip) throw MalformedEvent("snort event without addresses");
    out.push_back({ev.event_id, "snortKind", Value::string(kind)});
    out.push_back({ev.event_id, "srcIp", Value::entity(hosts.entity_for(*ev.src_ip))});
    observer = hosts.entity_for(*ev.dst_ip);
    out.push_back({ev.event_id, "dstIp", Value::entity(observer)});
  } else {
    if (ev.host.empty()) throw MalformedEvent("agent event without host");
    out.push_back({ev.event_id, "hostKind", Value::string(kind)});
    observer = ev.host;
    out.push_back({ev.event_id, "onHost", Value::entity(observer)});
  }
  out.push_back({ev.event_id, "eventTime", Value::timestamp(ev.ts)});
  for (const auto& [name, value] : ev.attributes) {
    auto schema = vocab.schema(name);
    if (!schema) throw VocabularyViolation("attribute '" + name + "' is not a registered predicate");
    auto v = conform(value, *schema);
    if (!v && *schema == ValueKind::Timestamp && value.kind() == ValueKind::String)
      if (auto ts = parse_timestamp(value.text())) v = Value::timestamp(*ts);
    if (!v)
      throw VocabularyViolation("attribute '" + name + "' value " + format_value(value) + " is not " +
                                std::string(to_string(*schema)));
    out.push_back({ev.event_id, name, std::move(*v)});
  }
  out.push_back({observer, "observedEvent", Value::entity(ev.event_id)});
  for (const auto& t : out)
    if (auto why = vocab.check(t)) throw VocabularyViolation(*why);
  return out;
}

// ---------------------------------------------------------------------------
// Threat intelligence
// ---------------------------------------------------------------------------

struct IsMalwareOfClass {
  std::string malware_class;
  friend bool operator==(const IsMalwareOfClass&, const IsMalwareOfClass&) = default;
};
struct UsesTechnique {
  std::string technique_id;
  friend bool operator==(const UsesTechnique&, const UsesTechnique&) = default;
};
struct HasIndicator {
  IndicatorKind indicator;
  friend bool operator==(const HasIndicator&, const HasIndicator&) = default;
};

using IntelAssertion = std::variant<IsMalwareOfClass, UsesTechnique, HasIndicator>;

struct IntelStatement {
  /// Lowercase malware name, e.g. "wannacry".
  std::string subject_name;
  IntelAssertion assertion;
  friend bool operator==(const IntelStatement&, const IntelStatement&) = default;
};

inline std::string malware_entity(std::string_view name) {
  std::string out = "malware:";
  for (char c : text::trim(name)) {
    const auto uc = static_cast<unsigned char>(c);
    out.push_back(std::isalnum(uc) || c == '_' || c == '-' || c == '.' ? static_cast<char>(std::tolower(uc)) : '_');
  }
  return out;
}

/// STIX-flavored subset: a JSON array of {name, labels[], uses[], indicators[]}.
/// Each label yields IsMalwareOfClass, each `uses` entry UsesTechnique (it must
/// resolve through the technique table), each indicator HasIndicator.
inline std::vector<IntelStatement> parse_intel_document(std::string_view json, const TechniqueTable& techniques) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedDocument(std::string("invalid JSON: ") + e.what());
  }
  if (doc.is_object()) doc = nlohmann::json::array({doc});
  if (!doc.is_array()) throw MalformedDocument("intel document must be an array of objects");
  std::vector<IntelStatement> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& obj = doc[i];
    const std::string where = "entry " + std::to_string(i) + ": ";
    if (!obj.is_object()) throw MalformedDocument(where + "not an object");
    auto name_it = obj.find("name");
    if (name_it == obj.end() || !name_it->is_string() || text::trim(name_it->get<std::string>()).empty())
      throw MalformedDocument(where + "missing name");
    const std::string name = text::to_lower(text::trim(name_it->get<std::string>()));
    auto strings = [&](const char* key) {
      std::vector<std::string> vals;
      auto it = obj.find(key);
      if (it == obj.end()) return vals;
      if (!it->is_array()) throw MalformedDocument(where + "'" + key + "' must be an array");
      for (const auto& v : *it) {
        if (!v.is_string()) throw MalformedDocument(where + "'" + key + "' entries must be strings");
        vals.push_back(v.get<std::string>());
      }
      return vals;
    };
    for (const auto& label : strings("labels")) {
      const std::string cls = text::to_lower(text::trim(label));
      if (!text::is_identifier(cls) && !is_entity_id("class:" + cls))
        throw MalformedDocument(where + "invalid label '" + label + "'");
      out.push_back({name, IsMalwareOfClass{cls}});
    }
    for (const auto& uses : strings("uses")) {
      auto id = techniques.resolve(uses);
      if (!id) throw MalformedDocument(where + "unknown technique '" + uses + "'");
      out.push_back({name, UsesTechnique{*id}});
    }
    for (const auto& ind : strings("indicators")) {
      auto kind = parse_indicator(ind);
      if (!kind) throw MalformedDocument(where + "unknown indicator '" + ind + "'");
      out.push_back({name, HasIndicator{*kind}});
    }
  }
  return out;
}

inline const std::set<std::string>& known_malware_classes() {
  static const std::set<std::string> classes = {"ransomware", "trojan", "worm"};
  return classes;
}

/// Template extractor for two sentence shapes, case-insensitive:
///
///   <X> is a [new] <ransomware|trojan|worm>
///   <X> uses <technique phrase> [to exploit]
///
/// The technique phrase goes through the synonym table. Anything else yields
/// no statements.
inline std::vector<IntelStatement> extract_intel_from_text(std::string_view sentence, const TechniqueTable& techniques) {
  static const std::regex kIsA(R"(^\s*([A-Za-z][A-Za-z0-9_.\-]*)\s+is\s+an?\s+(?:new\s+)?([A-Za-z]+)\s*[.!]?\s*$)",
                               std::regex::icase);
  static const std::regex kUses(R"(^\s*([A-Za-z][A-Za-z0-9_.\-]*)\s+uses\s+(.+?)(?:\s+to\s+exploit)?\s*[.!]?\s*$)",
                                std::regex::icase);
  static const std::set<std::string> kNotNames = {"it",   "this",  "that", "he",    "she",   "they", "there", "which",
                                                  "what", "who",   "one",  "everyone", "someone", "nobody", "i", "we",
                                                  "you",  "here"};
  const std::string s(sentence);
  std::smatch m;
  if (std::regex_match(s, m, kIsA)) {
    const std::string name = text::to_lower(m[1].str());
    const std::string cls = text::to_lower(m[2].str());
    if (kNotNames.count(name) || !known_malware_classes().count(cls)) return {};
    return {{name, IsMalwareOfClass{cls}}};
  }
  if (std::regex_match(s, m, kUses)) {
    const std::string name = text::to_lower(m[1].str());
    if (kNotNames.count(name)) return {};
    auto id = techniques.lookup_phrase(m[2].str());
    if (!id) return {};
    return {{name, UsesTechnique{*id}}};
  }
  return {};
}

/// (malware, isClass, class:c), (malware, usesTechnique, technique:t),
/// (malware, exhibitsIndicator, indicator:I).
inline std::vector<Triple> intel_to_facts(const std::vector<IntelStatement>& statements) {
  std::vector<Triple> out;
  for (const auto& st : statements) {
    const std::string subject = malware_entity(st.subject_name);
    if (const auto* c = std::get_if<IsMalwareOfClass>(&st.assertion)) {
      out.push_back({subject, "isClass", Value::entity("class:" + c->malware_class)});
    } else if (const auto* u = std::get_if<UsesTechnique>(&st.assertion)) {
      out.push_back({subject, "usesTechnique", Value::entity(u->technique_id)});
    } else {
      out.push_back({subject, "exhibitsIndicator",
                     Value::entity(indicator_entity(std::get<HasIndicator>(st.assertion).indicator))});
    }
  }
  return out;
}

}  // namespace kc
