#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "kc/error.hpp"
#include "kc/ontology.hpp"
#include "kc/text.hpp"
#include "kc/value.hpp"

namespace kc {

struct Variable {
  std::string name;
  friend bool operator==(const Variable&, const Variable&) = default;
};

using Term = std::variant<Variable, Value>;

inline std::string format_term(const Term& t) {
  if (const auto* v = std::get_if<Variable>(&t)) return "?" + v->name;
  return format_value(std::get<Value>(t));
}

/// `predicate(subject, object)`: a triple pattern with shared variables.
struct Atom {
  std::string predicate;
  Term subject;
  Term object;
  SourcePos pos;
};

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge };

inline std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::Eq: return "=";
    case CompareOp::Ne: return "!=";
    case CompareOp::Lt: return "<";
    case CompareOp::Le: return "<=";
    case CompareOp::Gt: return ">";
    case CompareOp::Ge: return ">=";
  }
  return "?";
}

/// Comparison between two bound terms. Incomparable operands only satisfy `!=`.
inline bool evaluate_comparison(const Value& lhs, CompareOp op, const Value& rhs) {
  auto ord = compare_values(lhs, rhs);
  if (!ord) return op == CompareOp::Ne;
  switch (op) {
    case CompareOp::Eq: return *ord == 0;
    case CompareOp::Ne: return *ord != 0;
    case CompareOp::Lt: return *ord < 0;
    case CompareOp::Le: return *ord <= 0;
    case CompareOp::Gt: return *ord > 0;
    case CompareOp::Ge: return *ord >= 0;
  }
  return false;
}

struct Builtin {
  Term lhs;
  CompareOp op = CompareOp::Eq;
  Term rhs;
  SourcePos pos;
};

using BodyItem = std::variant<Atom, Builtin>;

struct Rule {
  std::string id;
  std::vector<BodyItem> body;
  std::vector<Atom> head;
  SourcePos pos;

  std::size_t atom_count() const {
    return static_cast<std::size_t>(
        std::count_if(body.begin(), body.end(), [](const BodyItem& b) { return std::holds_alternative<Atom>(b); }));
  }
};

struct RuleSet {
  std::vector<Rule> rules;
  /// FNV-1a of the source text, hex.
  std::string source_hash;

  std::size_t size() const { return rules.size(); }
  bool empty() const { return rules.empty(); }
};

inline std::string format_atom(const Atom& a) {
  return a.predicate + "(" + format_term(a.subject) + ", " + format_term(a.object) + ")";
}

inline std::string format_rule(const Rule& r) {
  std::string out = "rule " + r.id + ": ";
  for (std::size_t i = 0; i < r.body.size(); ++i) {
    if (i) out += ", ";
    if (const auto* a = std::get_if<Atom>(&r.body[i])) {
      out += format_atom(*a);
    } else {
      const auto& b = std::get<Builtin>(r.body[i]);
      out += format_term(b.lhs) + " " + std::string(to_string(b.op)) + " " + format_term(b.rhs);
    }
  }
  out += " => ";
  for (std::size_t i = 0; i < r.head.size(); ++i) {
    if (i) out += ", ";
    out += format_atom(r.head[i]);
  }
  return out + ".";
}

namespace detail {

/// Recursive-descent parser for the rule language:
///
///   ruleset := rule*
///   rule    := "rule" ID ":" body "=>" head "."
///   body    := atom ("," (atom | builtin))*
///   head    := atom ("," atom)*
///   atom    := PRED "(" term ("," term)* ")"
///   builtin := term OP term
///   term    := "?" ID | constant
///
/// `#` and `//` start comments that run to end of line.
class RuleParser {
 public:
  RuleParser(std::string_view src, const Vocabulary& vocab) : src_(src), vocab_(vocab) {}

  RuleSet parse() {
    RuleSet out;
    out.source_hash = text::hex(text::fnv1a(src_));
    std::set<std::string, std::less<>> ids;
    skip_trivia();
    while (!eof()) {
      const SourcePos start = here();
      if (read_identifier() != "rule") throw SyntaxError("expected 'rule'", start);
      Rule r = parse_rule();
      if (!ids.insert(r.id).second) throw SyntaxError("duplicate rule id '" + r.id + "'", r.pos);
      check_rule(r);
      out.rules.push_back(std::move(r));
      skip_trivia();
    }
    return out;
  }

 private:
  bool eof() const { return i_ >= src_.size(); }
  char peek(std::size_t ahead = 0) const { return i_ + ahead < src_.size() ? src_[i_ + ahead] : '\0'; }

  SourcePos here() const {
    SourcePos p{1, 1};
    for (std::size_t k = line_start_; k < i_; ++k) ++p.column;
    p.line = line_;
    return p;
  }

  void advance(std::size_t n = 1) {
    for (std::size_t k = 0; k < n && i_ < src_.size(); ++k) {
      if (src_[i_] == '\n') {
        ++line_;
        line_start_ = i_ + 1;
      }
      ++i_;
    }
  }

  void skip_trivia() {
    for (;;) {
      while (!eof() && text::is_space(peek())) advance();
      if (peek() == '#' || (peek() == '/' && peek(1) == '/')) {
        while (!eof() && peek() != '\n') advance();
        continue;
      }
      return;
    }
  }

  [[noreturn]] void fail(const std::string& what) const { throw SyntaxError(what, here()); }

  void expect(std::string_view tok) {
    skip_trivia();
    if (src_.substr(i_, tok.size()) != tok) {
      std::string found = eof() ? "end of input" : "'" + std::string(1, peek()) + "'";
      fail("expected '" + std::string(tok) + "', found " + found);
    }
    advance(tok.size());
  }

  bool accept(std::string_view tok) {
    skip_trivia();
    if (src_.substr(i_, tok.size()) != tok) return false;
    advance(tok.size());
    return true;
  }

  static bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
  static bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

  std::string read_identifier() {
    skip_trivia();
    if (!ident_start(peek())) fail("expected identifier");
    const std::size_t start = i_;
    while (ident_char(peek())) advance();
    return std::string(src_.substr(start, i_ - start));
  }

  Rule parse_rule() {
    Rule r;
    skip_trivia();
    r.pos = here();
    r.id = read_identifier();
    expect(":");
    r.body.emplace_back(parse_atom());
    while (accept(",")) r.body.push_back(parse_body_item());
    expect("=>");
    r.head.push_back(parse_atom());
    while (accept(",")) r.head.push_back(parse_atom());
    expect(".");
    return r;
  }

  bool at_atom() {
    skip_trivia();
    if (!ident_start(peek())) return false;
    std::size_t k = i_;
    while (k < src_.size() && ident_char(src_[k])) ++k;
    while (k < src_.size() && text::is_space(src_[k])) ++k;
    return k < src_.size() && src_[k] == '(';
  }

  BodyItem parse_body_item() {
    if (at_atom()) return parse_atom();
    Builtin b;
    b.pos = here();
    b.lhs = parse_term();
    b.op = parse_op();
    b.rhs = parse_term();
    return b;
  }

  CompareOp parse_op() {
    skip_trivia();
    static constexpr std::pair<std::string_view, CompareOp> kOps[] = {
        {"!=", CompareOp::Ne}, {"\xE2\x89\xA0", CompareOp::Ne}, {"<=", CompareOp::Le},
        {"\xE2\x89\xA4", CompareOp::Le}, {">=", CompareOp::Ge}, {"\xE2\x89\xA5", CompareOp::Ge},
        {"<", CompareOp::Lt}, {">", CompareOp::Gt}, {"=", CompareOp::Eq},
    };
    if (src_.substr(i_, 2) == "=>") fail("expected comparison operator");
    for (const auto& [tok, op] : kOps) {
      if (src_.substr(i_, tok.size()) == tok) {
        advance(tok.size());
        return op;
      }
    }
    fail("expected comparison operator");
  }

  Atom parse_atom() {
    skip_trivia();
    Atom a;
    a.pos = here();
    a.predicate = read_identifier();
    expect("(");
    std::vector<Term> terms;
    terms.push_back(parse_term());
    while (accept(",")) terms.push_back(parse_term());
    expect(")");
    if (terms.size() != 2)
      throw SyntaxError("atom '" + a.predicate + "' has " + std::to_string(terms.size()) + " terms; triples take 2",
                        a.pos);
    a.subject = std::move(terms[0]);
    a.object = std::move(terms[1]);
    return a;
  }

  Term parse_term() {
    skip_trivia();
    const char c = peek();
    if (c == '?') {
      advance();
      if (!ident_start(peek())) fail("expected variable name after '?'");
      return Variable{read_identifier()};
    }
    if (c == '"') {
      std::size_t k = i_;
      auto s = read_quoted(src_, k);
      if (!s) fail("unterminated or malformed string");
      advance(k - i_);
      return Value::string(std::move(*s));
    }
    const std::size_t start = i_;
    if ((c >= '0' && c <= '9') || c == '-') {
      std::size_t k = i_;
      while (k < src_.size() && !text::is_space(src_[k]) && src_[k] != ',' && src_[k] != ')' &&
             (src_[k] != '.' || (k + 1 < src_.size() && src_[k + 1] >= '0' && src_[k + 1] <= '9')))
        ++k;
      const auto lexeme = src_.substr(start, k - start);
      auto v = lexeme.size() >= 20 && lexeme[4] == '-' ? [&]() -> std::optional<Value> {
        auto ts = parse_timestamp(lexeme);
        if (!ts) return std::nullopt;
        return Value::timestamp(*ts);
      }()
                                                        : parse_number(lexeme);
      if (!v) fail("malformed number '" + std::string(lexeme) + "'");
      advance(k - start);
      return *v;
    }
    if (ident_start(c)) {
      std::size_t k = i_;
      while (k < src_.size() && is_entity_body_char(src_[k])) ++k;
      while (k > start && src_[k - 1] == '.') --k;
      const auto lexeme = src_.substr(start, k - start);
      if (!is_entity_id(lexeme)) fail("constant '" + std::string(lexeme) + "' is not a namespaced entity id");
      advance(k - start);
      return Value::entity(std::string(lexeme));
    }
    fail("expected term");
  }

  // -- static checks -------------------------------------------------------

  using TypeMap = std::map<std::string, ValueKind, std::less<>>;

  ObjectSchema schema_of(const Atom& a) const {
    auto s = vocab_.schema(a.predicate);
    if (!s) throw UnknownPredicate("unknown predicate '" + a.predicate + "'", a.pos);
    return *s;
  }

  static void check_constant(const Term& t, ValueKind expected, const Atom& a, const char* where) {
    const auto* v = std::get_if<Value>(&t);
    if (!v) return;
    if (!conform(*v, expected))
      throw SyntaxError(std::string(where) + " constant " + format_value(*v) + " of '" + a.predicate +
                            "' must be " + std::string(to_string(expected)),
                        a.pos);
  }

  static void bind_type(TypeMap& types, const Term& t, ValueKind kind, const Atom& a) {
    const auto* var = std::get_if<Variable>(&t);
    if (!var) return;
    auto [it, inserted] = types.emplace(var->name, kind);
    if (!inserted && it->second != kind)
      throw SyntaxError("variable ?" + var->name + " used as both " + std::string(to_string(it->second)) + " and " +
                            std::string(to_string(kind)),
                        a.pos);
  }

  static std::optional<ValueKind> term_type(const Term& t, const TypeMap& types) {
    if (const auto* v = std::get_if<Value>(&t)) return v->kind();
    auto it = types.find(std::get<Variable>(t).name);
    if (it == types.end()) return std::nullopt;
    return it->second;
  }

  void check_rule(const Rule& r) const {
    TypeMap types;
    for (const auto& item : r.body) {
      if (const auto* a = std::get_if<Atom>(&item)) {
        const auto schema = schema_of(*a);
        check_constant(a->subject, ValueKind::Entity, *a, "subject");
        check_constant(a->object, schema, *a, "object");
        bind_type(types, a->subject, ValueKind::Entity, *a);
        bind_type(types, a->object, schema, *a);
        continue;
      }
      const auto& b = std::get<Builtin>(item);
      for (const Term* t : {&b.lhs, &b.rhs}) {
        if (const auto* var = std::get_if<Variable>(t); var && !types.count(var->name))
          throw SyntaxError("variable ?" + var->name + " is not bound by an earlier atom", b.pos);
      }
      const auto lt = *term_type(b.lhs, types);
      const auto rt = *term_type(b.rhs, types);
      const bool numeric = (lt == ValueKind::Integer || lt == ValueKind::Decimal) &&
                           (rt == ValueKind::Integer || rt == ValueKind::Decimal);
      if (!numeric && lt != rt)
        throw SyntaxError("cannot compare " + std::string(to_string(lt)) + " with " + std::string(to_string(rt)),
                          b.pos);
    }
    for (const auto& h : r.head) {
      const auto schema = schema_of(h);
      check_constant(h.subject, ValueKind::Entity, h, "subject");
      check_constant(h.object, schema, h, "object");
      for (const auto& [term, expected] : {std::pair{&h.subject, ValueKind::Entity}, std::pair{&h.object, schema}}) {
        const auto* var = std::get_if<Variable>(term);
        if (!var) continue;
        auto it = types.find(var->name);
        if (it == types.end())
          throw RangeRestrictionViolation(
              "head variable ?" + var->name + " of rule " + r.id + " does not occur in a body atom", h.pos);
        const bool ok = it->second == expected || (expected == ValueKind::Decimal && it->second == ValueKind::Integer);
        if (!ok)
          throw SyntaxError("head variable ?" + var->name + " is " + std::string(to_string(it->second)) + " but '" +
                                h.predicate + "' needs " + std::string(to_string(expected)),
                            h.pos);
      }
    }
  }

  std::string_view src_;
  const Vocabulary& vocab_;
  std::size_t i_ = 0;
  std::size_t line_ = 1;
  std::size_t line_start_ = 0;
};

}  // namespace detail

/// Parses and statically checks a rule file against `vocab`.
/// Throws SyntaxError, RangeRestrictionViolation or UnknownPredicate.
inline RuleSet parse_ruleset(std::string_view text, const Vocabulary& vocab) {
  return detail::RuleParser(text, vocab).parse();
}

inline RuleSet load_ruleset(const std::filesystem::path& path, const Vocabulary& vocab) {
  return parse_ruleset(text::read_file(path), vocab);
}

}  // namespace kc
