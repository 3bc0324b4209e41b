#pragma once

#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>

namespace kc {

/// Microseconds since 1970-01-01T00:00:00Z.
struct Timestamp {
  std::int64_t micros = 0;

  static constexpr std::int64_t kPerSecond = 1'000'000;

  static constexpr Timestamp from_seconds(std::int64_t s) { return {s * kPerSecond}; }
  constexpr std::int64_t seconds() const {
    return micros >= 0 ? micros / kPerSecond : -((-micros + kPerSecond - 1) / kPerSecond);
  }

  friend constexpr auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

namespace detail {

// Howard Hinnant's civil calendar conversions.
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct Civil {
  std::int64_t year;
  unsigned month;
  unsigned day;
};

constexpr Civil civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {y + (m <= 2), m, d};
}

constexpr bool is_leap(std::int64_t y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

constexpr unsigned days_in_month(std::int64_t y, unsigned m) {
  constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

inline bool read_digits(std::string_view s, std::size_t& i, std::size_t n, int& out) {
  if (i + n > s.size()) return false;
  int v = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const char c = s[i + k];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  i += n;
  return true;
}

}  // namespace detail

/// Builds a UTC timestamp from calendar fields; nullopt if any field is out of range.
inline std::optional<Timestamp> make_timestamp(std::int64_t year, int month, int day, int hour,
                                               int minute, int second, std::int64_t micros = 0) {
  if (month < 1 || month > 12) return std::nullopt;
  if (day < 1 || static_cast<unsigned>(day) > detail::days_in_month(year, month)) return std::nullopt;
  if (hour < 0 || hour > 23 || minute < 0 || minute > 59 || second < 0 || second > 60) return std::nullopt;
  if (micros < 0 || micros >= Timestamp::kPerSecond) return std::nullopt;
  const std::int64_t days = detail::days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  const std::int64_t secs = days * 86400 + hour * 3600 + minute * 60 + second;
  return Timestamp{secs * Timestamp::kPerSecond + micros};
}

/// Parses `YYYY-MM-DDTHH:MM:SS[.fraction](Z|+HH:MM|-HH:MM|+HHMM|-HHMM)` and
/// normalizes to UTC. A zone designator is mandatory.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
  using detail::read_digits;
  std::size_t i = 0;
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  auto expect = [&](char c) {
    if (i < s.size() && s[i] == c) {
      ++i;
      return true;
    }
    return false;
  };
  if (!read_digits(s, i, 4, year) || !expect('-') || !read_digits(s, i, 2, month) || !expect('-') ||
      !read_digits(s, i, 2, day))
    return std::nullopt;
  if (!(expect('T') || expect('t'))) return std::nullopt;
  if (!read_digits(s, i, 2, hour) || !expect(':') || !read_digits(s, i, 2, minute) || !expect(':') ||
      !read_digits(s, i, 2, second))
    return std::nullopt;
  std::int64_t micros = 0;
  if (expect('.')) {
    std::size_t digits = 0;
    std::int64_t scale = 100000;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
      if (digits < 6) {
        micros += (s[i] - '0') * scale;
        scale /= 10;
      }
      ++digits;
      ++i;
    }
    if (digits == 0 || digits > 9) return std::nullopt;
  }
  std::int64_t offset_seconds = 0;
  if (expect('Z') || expect('z')) {
  } else if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
    const int sign = s[i] == '-' ? -1 : 1;
    ++i;
    int oh = 0, om = 0;
    if (!read_digits(s, i, 2, oh)) return std::nullopt;
    expect(':');
    if (!read_digits(s, i, 2, om)) return std::nullopt;
    if (oh > 23 || om > 59) return std::nullopt;
    offset_seconds = sign * (oh * 3600 + om * 60);
  } else {
    return std::nullopt;
  }
  if (i != s.size()) return std::nullopt;
  auto ts = make_timestamp(year, month, day, hour, minute, second, micros);
  if (!ts) return std::nullopt;
  ts->micros -= offset_seconds * Timestamp::kPerSecond;
  return ts;
}

/// ISO-8601 UTC rendering; the fraction is printed only when nonzero.
inline std::string format_timestamp(Timestamp ts) {
  std::int64_t secs = ts.seconds();
  const std::int64_t frac = ts.micros - secs * Timestamp::kPerSecond;
  std::int64_t days = secs >= 0 ? secs / 86400 : -((-secs + 86399) / 86400);
  std::int64_t rem = secs - days * 86400;
  const auto c = detail::civil_from_days(days);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lld", static_cast<long long>(c.year), c.month,
                c.day, static_cast<long long>(rem / 3600), static_cast<long long>(rem / 60 % 60),
                static_cast<long long>(rem % 60));
  std::string out = buf;
  if (frac != 0) {
    std::snprintf(buf, sizeof buf, ".%06lld", static_cast<long long>(frac));
    out += buf;
  }
  out.push_back('Z');
  return out;
}

inline int timestamp_year(Timestamp ts) {
  const std::int64_t secs = ts.seconds();
  const std::int64_t days = secs >= 0 ? secs / 86400 : -((-secs + 86399) / 86400);
  return static_cast<int>(detail::civil_from_days(days).year);
}

enum class ValueKind : std::uint8_t { Entity, String, Integer, Decimal, Timestamp };

inline std::string_view to_string(ValueKind k) {
  switch (k) {
    case ValueKind::Entity: return "entity";
    case ValueKind::String: return "string";
    case ValueKind::Integer: return "integer";
    case ValueKind::Decimal: return "decimal";
    case ValueKind::Timestamp: return "timestamp";
  }
  return "?";
}

inline bool is_entity_prefix_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

inline bool is_entity_body_char(char c) {
  return is_entity_prefix_char(c) || c == '.' || c == '-' || c == ':' || c == '/';
}

/// `prefix:local`, prefix an identifier, local nonempty and not ending in '.'.
inline bool is_entity_id(std::string_view s) {
  if (s.empty() || !((s[0] >= 'a' && s[0] <= 'z') || (s[0] >= 'A' && s[0] <= 'Z'))) return false;
  std::size_t i = 1;
  while (i < s.size() && is_entity_prefix_char(s[i])) ++i;
  if (i >= s.size() || s[i] != ':') return false;
  ++i;
  if (i >= s.size() || s.back() == '.') return false;
  for (; i < s.size(); ++i)
    if (!is_entity_body_char(s[i])) return false;
  return true;
}

/// A fact object or rule constant: an entity id or a typed literal.
/// Decimals compare by numeric value, so 93.50 and 93.5 are the same value.
class Value {
 public:
  Value() = default;

  static Value entity(std::string id) { return Value(ValueKind::Entity, std::move(id)); }
  static Value string(std::string s) { return Value(ValueKind::String, std::move(s)); }
  static Value integer(std::int64_t v) {
    Value out;
    out.kind_ = ValueKind::Integer;
    out.int_ = v;
    return out;
  }
  static Value decimal(double v) {
    Value out;
    out.kind_ = ValueKind::Decimal;
    out.dec_ = v == 0.0 ? 0.0 : v;
    return out;
  }
  static Value timestamp(Timestamp ts) {
    Value out;
    out.kind_ = ValueKind::Timestamp;
    out.int_ = ts.micros;
    return out;
  }

  ValueKind kind() const noexcept { return kind_; }
  bool is_entity() const noexcept { return kind_ == ValueKind::Entity; }
  bool is_numeric() const noexcept { return kind_ == ValueKind::Integer || kind_ == ValueKind::Decimal; }

  /// Entity id or string contents.
  const std::string& text() const noexcept { return text_; }
  std::int64_t as_integer() const noexcept { return int_; }
  double as_decimal() const noexcept { return kind_ == ValueKind::Integer ? static_cast<double>(int_) : dec_; }
  Timestamp as_timestamp() const noexcept { return Timestamp{int_}; }

  friend bool operator==(const Value& a, const Value& b) {
    if (a.kind_ != b.kind_) return false;
    switch (a.kind_) {
      case ValueKind::Entity:
      case ValueKind::String: return a.text_ == b.text_;
      case ValueKind::Integer:
      case ValueKind::Timestamp: return a.int_ == b.int_;
      case ValueKind::Decimal: return a.dec_ == b.dec_;
    }
    return false;
  }

  /// Total order used for deterministic sorting: by kind, then payload.
  friend bool operator<(const Value& a, const Value& b) {
    if (a.kind_ != b.kind_) return a.kind_ < b.kind_;
    switch (a.kind_) {
      case ValueKind::Entity:
      case ValueKind::String: return a.text_ < b.text_;
      case ValueKind::Integer:
      case ValueKind::Timestamp: return a.int_ < b.int_;
      case ValueKind::Decimal: return a.dec_ < b.dec_;
    }
    return false;
  }

  std::size_t hash() const noexcept {
    std::size_t h = static_cast<std::size_t>(kind_) * 0x9e3779b97f4a7c15ULL;
    switch (kind_) {
      case ValueKind::Entity:
      case ValueKind::String: return h ^ std::hash<std::string>{}(text_);
      case ValueKind::Integer:
      case ValueKind::Timestamp: return h ^ std::hash<std::int64_t>{}(int_);
      case ValueKind::Decimal: return h ^ std::hash<double>{}(dec_);
    }
    return h;
  }

 private:
  Value(ValueKind k, std::string text) : kind_(k), text_(std::move(text)) {}

  ValueKind kind_ = ValueKind::String;
  std::string text_;
  std::int64_t int_ = 0;
  double dec_ = 0.0;
};

struct ValueHash {
  std::size_t operator()(const Value& v) const noexcept { return v.hash(); }
};

/// Ordering between two values for comparison builtins. Integers and
/// decimals compare numerically with each other; any other pair must share a
/// kind. nullopt means the pair is incomparable.
inline std::optional<std::partial_ordering> compare_values(const Value& a, const Value& b) {
  if (a.is_numeric() && b.is_numeric()) {
    if (a.kind() == ValueKind::Integer && b.kind() == ValueKind::Integer)
      return a.as_integer() <=> b.as_integer();
    return a.as_decimal() <=> b.as_decimal();
  }
  if (a.kind() != b.kind()) return std::nullopt;
  switch (a.kind()) {
    case ValueKind::Entity:
    case ValueKind::String: return a.text() <=> b.text();
    case ValueKind::Timestamp: return a.as_timestamp() <=> b.as_timestamp();
    default: break;
  }
  return std::nullopt;
}

inline std::string quote_string(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 2);
  out.push_back('"');
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

inline std::string format_decimal(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
  std::string out(buf, res.ptr);
  if (out.find('.') == std::string::npos) out += ".0";
  return out;
}

/// Canonical single-token rendering. parse_value_token() inverts it.
inline std::string format_value(const Value& v) {
  switch (v.kind()) {
    case ValueKind::Entity: return v.text();
    case ValueKind::String: return quote_string(v.text());
    case ValueKind::Integer: return std::to_string(v.as_integer());
    case ValueKind::Decimal: return format_decimal(v.as_decimal());
    case ValueKind::Timestamp: return format_timestamp(v.as_timestamp());
  }
  return {};
}

/// Reads a quoted string starting at s[i] == '"'. Advances i past the closing
/// quote. nullopt on an unterminated string or a bad escape.
inline std::optional<std::string> read_quoted(std::string_view s, std::size_t& i) {
  if (i >= s.size() || s[i] != '"') return std::nullopt;
  std::string out;
  for (++i; i < s.size(); ++i) {
    char c = s[i];
    if (c == '"') {
      ++i;
      return out;
    }
    if (c == '\\') {
      if (++i >= s.size()) return std::nullopt;
      switch (s[i]) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        default: return std::nullopt;
      }
      continue;
    }
    out.push_back(c);
  }
  return std::nullopt;
}

inline std::optional<Value> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::size_t i = s[0] == '-' ? 1 : 0;
  std::size_t digits = 0, dot = std::string_view::npos;
  for (std::size_t k = i; k < s.size(); ++k) {
    if (s[k] >= '0' && s[k] <= '9') {
      ++digits;
    } else if (s[k] == '.' && dot == std::string_view::npos) {
      dot = k;
    } else {
      return std::nullopt;
    }
  }
  if (digits == 0) return std::nullopt;
  if (dot == std::string_view::npos) {
    std::int64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
    return Value::integer(v);
  }
  if (dot == i || dot + 1 == s.size()) return std::nullopt;
  double d = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), d);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(d)) return std::nullopt;
  return Value::decimal(d);
}

/// Classifies one whitespace-free token: quoted string, integer, decimal,
/// ISO timestamp or namespaced entity id.
inline std::optional<Value> parse_value_token(std::string_view tok) {
  if (tok.empty()) return std::nullopt;
  if (tok[0] == '"') {
    std::size_t i = 0;
    auto s = read_quoted(tok, i);
    if (!s || i != tok.size()) return std::nullopt;
    return Value::string(std::move(*s));
  }
  if (auto n = parse_number(tok)) return n;
  if (tok.size() >= 20 && tok[4] == '-' && tok[10] == 'T') {
    if (auto ts = parse_timestamp(tok)) return Value::timestamp(*ts);
    return std::nullopt;
  }
  if (is_entity_id(tok)) return Value::entity(std::string(tok));
  return std::nullopt;
}

}  // namespace kc
