#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <istream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "kc/error.hpp"
#include "kc/ontology.hpp"
#include "kc/text.hpp"
#include "kc/value.hpp"

namespace kc {

/// 1-based, dense and monotone in insertion order.
using FactId = std::uint64_t;

struct Asserted {
  std::string source;
  friend bool operator==(const Asserted&, const Asserted&) = default;
};

struct Derived {
  std::string rule_id;
  std::vector<FactId> premises;
  friend bool operator==(const Derived&, const Derived&) = default;
};

using Provenance = std::variant<Asserted, Derived>;

inline std::string format_provenance(const Provenance& p) {
  if (const auto* a = std::get_if<Asserted>(&p)) return "asserted:" + a->source;
  const auto& d = std::get<Derived>(p);
  std::string out = "derived:" + d.rule_id + ":";
  for (std::size_t i = 0; i < d.premises.size(); ++i) {
    if (i) out.push_back(',');
    out += std::to_string(d.premises[i]);
  }
  return out;
}

inline std::optional<Provenance> parse_provenance(std::string_view s) {
  if (s.substr(0, 9) == "asserted:") {
    auto src = s.substr(9);
    if (src.empty()) return std::nullopt;
    return Asserted{std::string(src)};
  }
  if (s.substr(0, 8) != "derived:") return std::nullopt;
  s.remove_prefix(8);
  const auto colon = s.rfind(':');
  if (colon == std::string_view::npos || colon == 0) return std::nullopt;
  Derived d{std::string(s.substr(0, colon)), {}};
  std::string_view ids = s.substr(colon + 1);
  while (!ids.empty()) {
    const auto comma = ids.find(',');
    const auto part = ids.substr(0, comma);
    auto v = parse_number(part);
    if (!v || v->kind() != ValueKind::Integer || v->as_integer() <= 0) return std::nullopt;
    d.premises.push_back(static_cast<FactId>(v->as_integer()));
    if (comma == std::string_view::npos) break;
    ids.remove_prefix(comma + 1);
    if (ids.empty()) return std::nullopt;
  }
  if (d.premises.empty()) return std::nullopt;
  return d;
}

struct Fact {
  FactId id = 0;
  Triple triple;
  Provenance provenance;
  /// Store logical clock at insertion.
  std::uint64_t asserted_at = 0;

  const std::string& subject() const { return triple.subject; }
  const std::string& predicate() const { return triple.predicate; }
  const Value& object() const { return triple.object; }
  bool is_asserted() const { return std::holds_alternative<Asserted>(provenance); }
};

/// A triple pattern; an empty position is a wildcard.
struct Pattern {
  std::optional<std::string> subject;
  std::optional<std::string> predicate;
  std::optional<Value> object;

  bool matches(const Triple& t) const {
    return (!subject || *subject == t.subject) && (!predicate || *predicate == t.predicate) &&
           (!object || *object == t.object);
  }

  /// Parses `<subject> <predicate> <object>` where `*` or `?name` is a
  /// wildcard and the object follows the dump value syntax.
  static Pattern parse(std::string_view text) {
    text = text::trim(text);
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && text::is_space(text[i])) ++i;
      if (i >= text.size()) break;
      const std::size_t start = i;
      if (text[i] == '"') {
        if (!read_quoted(text, i)) throw SyntaxError("unterminated string in pattern", {1, start + 1});
      } else {
        while (i < text.size() && !text::is_space(text[i])) ++i;
      }
      parts.emplace_back(text.substr(start, i - start));
    }
    if (parts.size() != 3) throw SyntaxError("pattern needs exactly 3 terms, got " + std::to_string(parts.size()), {1, 1});
    auto wildcard = [](const std::string& p) { return p == "*" || (p.size() > 1 && p[0] == '?'); };
    Pattern out;
    if (!wildcard(parts[0])) {
      if (!is_valid_entity_text(parts[0])) throw SyntaxError("invalid subject '" + parts[0] + "'", {1, 1});
      out.subject = parts[0];
    }
    if (!wildcard(parts[1])) {
      if (!text::is_identifier(parts[1])) throw SyntaxError("invalid predicate '" + parts[1] + "'", {1, 1});
      out.predicate = parts[1];
    }
    if (!wildcard(parts[2])) {
      auto v = parse_value_token(parts[2]);
      if (!v) throw SyntaxError("cannot parse object '" + parts[2] + "'", {1, 1});
      out.object = std::move(*v);
    }
    return out;
  }
};

/// Half-open id window (after, upto].
struct IdRange {
  FactId after = 0;
  FactId upto = std::numeric_limits<FactId>::max();

  bool empty() const { return upto <= after; }
  bool contains(FactId id) const { return id > after && id <= upto; }
};

struct InsertResult {
  FactId id = 0;
  bool inserted = false;
};

/// Derivation tree. Leaves are asserted facts; interior nodes name the rule
/// that produced them.
struct DerivationNode {
  FactId fact = 0;
  std::string rule_id;
  std::vector<DerivationNode> premises;

  bool is_leaf() const { return premises.empty(); }
};

inline void collect_leaves(const DerivationNode& n, std::vector<FactId>& out) {
  if (n.is_leaf()) {
    out.push_back(n.fact);
    return;
  }
  for (const auto& p : n.premises) collect_leaves(p, out);
}

/// Sorted, deduplicated leaf ids.
inline std::vector<FactId> leaves_of(const DerivationNode& n) {
  std::vector<FactId> out;
  collect_leaves(n, out);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// The knowledge graph: a set of typed triples, indexed by subject, by
/// predicate, and by (subject, predicate).
///
/// Single writer. Readers may share a const store, but not while a rule
/// engine epoch is committing.
class FactStore {
 public:
  explicit FactStore(std::shared_ptr<const Vocabulary> vocab) : vocab_(std::move(vocab)) {
    if (!vocab_) throw ConfigError("fact store needs a vocabulary");
  }
  explicit FactStore(const Vocabulary& vocab) : FactStore(std::make_shared<const Vocabulary>(vocab)) {}

  const Vocabulary& vocabulary() const { return *vocab_; }
  std::shared_ptr<const Vocabulary> vocabulary_ptr() const { return vocab_; }

  std::size_t size() const { return facts_.size(); }
  bool empty() const { return facts_.empty(); }
  FactId last_id() const { return facts_.size(); }

  std::uint64_t clock() const { return clock_; }
  /// Advances the logical clock; later insertions carry the new value.
  std::uint64_t tick() { return ++clock_; }

  /// Inserts unless (s,p,o) is already present. Throws VocabularyViolation if
  /// the triple does not validate and UnknownFact if a derived fact cites a
  /// premise that does not exist.
  InsertResult insert(Triple t, Provenance provenance) {
    auto schema = vocab_->schema(t.predicate);
    if (auto why = vocab_->check(t)) throw VocabularyViolation(*why);
    t.object = *conform(t.object, *schema);
    if (auto existing = find(t)) return {*existing, false};
    if (const auto* d = std::get_if<Derived>(&provenance)) {
      if (d->premises.empty()) throw VocabularyViolation("derived fact without premises: rule " + d->rule_id);
      for (FactId p : d->premises)
        if (p == 0 || p > last_id()) throw UnknownFact("premise " + std::to_string(p) + " does not exist");
    }
    const FactId id = last_id() + 1;
    const auto& f = facts_.emplace_back(Fact{id, std::move(t), std::move(provenance), clock_});
    by_key_.emplace(f.triple, id);
    by_subject_[f.subject()].push_back(id);
    by_predicate_[f.predicate()].push_back(id);
    by_subject_predicate_[sp_key(f.subject(), f.predicate())].push_back(id);
    return {id, true};
  }

  InsertResult assert_fact(Triple t, std::string source) { return insert(std::move(t), Asserted{std::move(source)}); }

  std::optional<FactId> find(const Triple& t) const {
    auto it = by_key_.find(t);
    if (it == by_key_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(const Triple& t) const { return by_key_.count(t) != 0; }

  const Fact* get(FactId id) const noexcept {
    if (id == 0 || id > facts_.size()) return nullptr;
    return &facts_[id - 1];
  }

  const Fact& at(FactId id) const {
    if (const Fact* f = get(id)) return *f;
    throw UnknownFact("unknown fact id " + std::to_string(id));
  }

  auto begin() const { return facts_.begin(); }
  auto end() const { return facts_.end(); }

  /// Calls fn(const Fact&) for every fact in `range` that matches, in id order.
  template <typename Fn>
  void for_each_match(const Pattern& pattern, IdRange range, Fn&& fn) const {
    if (range.empty() || facts_.empty()) return;
    const std::vector<FactId>* ids = nullptr;
    if (pattern.subject && pattern.predicate) {
      ids = lookup(by_subject_predicate_, sp_key(*pattern.subject, *pattern.predicate));
    } else if (pattern.predicate) {
      ids = lookup(by_predicate_, *pattern.predicate);
    } else if (pattern.subject) {
      ids = lookup(by_subject_, *pattern.subject);
    } else {
      const FactId last = std::min<FactId>(range.upto, last_id());
      for (FactId id = range.after + 1; id <= last; ++id) {
        const Fact& f = facts_[id - 1];
        if (pattern.matches(f.triple)) fn(f);
      }
      return;
    }
    if (!ids) return;
    auto it = std::upper_bound(ids->begin(), ids->end(), range.after);
    for (; it != ids->end() && *it <= range.upto; ++it) {
      const Fact& f = facts_[*it - 1];
      if (pattern.matches(f.triple)) fn(f);
    }
  }

  /// Matching facts sorted by id.
  std::vector<const Fact*> query(const Pattern& pattern) const {
    std::vector<const Fact*> out;
    for_each_match(pattern, IdRange{}, [&](const Fact& f) { out.push_back(&f); });
    return out;
  }

  /// Object of the lowest-id fact (subject, predicate, *), if any.
  const Value* first_object(const std::string& subject, const std::string& predicate) const {
    const auto* ids = lookup(by_subject_predicate_, sp_key(subject, predicate));
    if (!ids || ids->empty()) return nullptr;
    return &facts_[ids->front() - 1].triple.object;
  }

  DerivationNode explain(FactId id) const {
    const Fact& f = at(id);
    DerivationNode node{id, {}, {}};
    if (const auto* d = std::get_if<Derived>(&f.provenance)) {
      node.rule_id = d->rule_id;
      node.premises.reserve(d->premises.size());
      // Premises always have smaller ids, so recursion terminates.
      for (FactId p : d->premises) node.premises.push_back(explain(p));
    }
    return node;
  }

  /// One line per fact: `<factid> <subject> <predicate> <object> <provenance>`.
  static std::string format_fact(const Fact& f) {
    return std::to_string(f.id) + " " + f.subject() + " " + f.predicate() + " " + format_value(f.object()) + " " +
           format_provenance(f.provenance);
  }

  void dump(std::ostream& out) const {
    for (const auto& f : facts_) out << format_fact(f) << '\n';
  }

  std::string dump() const {
    std::string out;
    for (const auto& f : facts_) {
      out += format_fact(f);
      out.push_back('\n');
    }
    return out;
  }

  /// Inverse of dump(). Ids must be 1..N in order so they survive the round trip.
  static FactStore load(std::string_view content, std::shared_ptr<const Vocabulary> vocab) {
    FactStore store(std::move(vocab));
    const auto lines = text::split_lines(content);
    for (std::size_t n = 0; n < lines.size(); ++n) {
      const auto line = lines[n];
      if (text::trim(line).empty() || text::trim(line).front() == '#') continue;
      const auto fail = [&](const std::string& why, std::size_t col) {
        throw SyntaxError("fact dump: " + why, {n + 1, col + 1});
      };
      std::size_t i = 0;
      auto word = [&]() -> std::string_view {
        while (i < line.size() && text::is_space(line[i])) ++i;
        const std::size_t start = i;
        if (i < line.size() && line[i] == '"') {
          if (!read_quoted(line, i)) fail("unterminated string", start);
        } else {
          while (i < line.size() && !text::is_space(line[i])) ++i;
        }
        return line.substr(start, i - start);
      };
      const auto id_text = word();
      const auto subject = word();
      const auto predicate = word();
      const std::size_t obj_col = i;
      const auto object_text = word();
      const std::size_t prov_col = i;
      const auto prov_text = word();
      if (prov_text.empty() || !text::trim(line.substr(i)).empty()) fail("expected 5 fields", 0);
      auto id = parse_number(id_text);
      if (!id || id->kind() != ValueKind::Integer || static_cast<FactId>(id->as_integer()) != store.last_id() + 1)
        fail("fact ids must be consecutive from 1", 0);
      auto object = parse_value_token(object_text);
      if (!object) fail("cannot parse object", obj_col);
      auto prov = parse_provenance(prov_text);
      if (!prov) fail("cannot parse provenance", prov_col);
      InsertResult r;
      try {
        r = store.insert(Triple{std::string(subject), std::string(predicate), std::move(*object)}, std::move(*prov));
      } catch (const VocabularyViolation& e) {
        fail(e.what(), 0);
      } catch (const UnknownFact& e) {
        fail(e.what(), prov_col);
      }
      if (!r.inserted) fail("duplicate fact", 0);
    }
    return store;
  }

 private:
  using Index = std::unordered_map<std::string, std::vector<FactId>>;

  static std::string sp_key(const std::string& s, const std::string& p) {
    std::string k;
    k.reserve(s.size() + p.size() + 1);
    k += s;
    k.push_back('\x1f');
    k += p;
    return k;
  }

  static const std::vector<FactId>* lookup(const Index& idx, const std::string& key) {
    auto it = idx.find(key);
    return it == idx.end() ? nullptr : &it->second;
  }

  std::shared_ptr<const Vocabulary> vocab_;
  std::deque<Fact> facts_;
  std::unordered_map<Triple, FactId, TripleHash> by_key_;
  Index by_subject_;
  Index by_predicate_;
  Index by_subject_predicate_;
  std::uint64_t clock_ = 0;
};

}  // namespace kc
