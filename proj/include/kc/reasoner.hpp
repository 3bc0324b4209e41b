#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "kc/error.hpp"
#include "kc/fact_store.hpp"
#include "kc/rules.hpp"

namespace kc {

struct FixpointStats {
  /// Epochs evaluated, including the final one that derived nothing.
  std::size_t epochs = 0;
  std::size_t derived = 0;
};

/// One head instantiation: the fact a rule would add and the body facts that
/// justify it, in body-atom order.
struct Derivation {
  Triple triple;
  std::string rule_id;
  std::vector<FactId> premises;
};

namespace detail {

struct SlotTerm {
  int slot = -1;
  Value constant;

  bool is_var() const { return slot >= 0; }
};

struct CompiledAtom {
  std::string predicate;
  SlotTerm subject;
  SlotTerm object;
};

struct CompiledCheck {
  SlotTerm lhs;
  CompareOp op;
  SlotTerm rhs;
};

struct CompiledRule {
  std::string id;
  std::vector<CompiledAtom> atoms;
  // Body in written order: an atom index, or a comparison.
  std::vector<std::variant<std::size_t, CompiledCheck>> steps;
  std::vector<CompiledAtom> head;
  std::size_t slot_count = 0;
};

inline CompiledRule compile_rule(const Rule& rule) {
  CompiledRule out;
  out.id = rule.id;
  std::unordered_map<std::string, int> slots;
  auto term = [&](const Term& t) {
    SlotTerm st;
    if (const auto* v = std::get_if<Variable>(&t)) {
      auto [it, inserted] = slots.emplace(v->name, static_cast<int>(slots.size()));
      st.slot = it->second;
    } else {
      st.constant = std::get<Value>(t);
    }
    return st;
  };
  for (const auto& item : rule.body) {
    if (const auto* a = std::get_if<Atom>(&item)) {
      out.steps.emplace_back(out.atoms.size());
      out.atoms.push_back({a->predicate, term(a->subject), term(a->object)});
    } else {
      const auto& b = std::get<Builtin>(item);
      out.steps.emplace_back(CompiledCheck{term(b.lhs), b.op, term(b.rhs)});
    }
  }
  for (const auto& h : rule.head) out.head.push_back({h.predicate, term(h.subject), term(h.object)});
  out.slot_count = slots.size();
  return out;
}

/// Enumerates body matches of one rule where atom j reads facts from ranges[j].
class Matcher {
 public:
  template <typename OnMatch>
  static void run(const CompiledRule& rule, const FactStore& store, const std::vector<IdRange>& ranges,
                  OnMatch&& on_match) {
    Matcher m(rule, store, ranges);
    m.step(0, on_match);
  }

 private:
  Matcher(const CompiledRule& rule, const FactStore& store, const std::vector<IdRange>& ranges)
      : rule_(rule), store_(store), ranges_(ranges), values_(rule.slot_count), bound_(rule.slot_count, false),
        premises_(rule.atoms.size(), 0) {}

  const Value& resolve(const SlotTerm& t) const { return t.is_var() ? values_[t.slot] : t.constant; }
  bool known(const SlotTerm& t) const { return !t.is_var() || bound_[t.slot]; }

  template <typename OnMatch>
  void step(std::size_t k, OnMatch& on_match) {
    if (k == rule_.steps.size()) {
      on_match(values_, premises_);
      return;
    }
    if (const auto* check = std::get_if<CompiledCheck>(&rule_.steps[k])) {
      if (evaluate_comparison(resolve(check->lhs), check->op, resolve(check->rhs))) step(k + 1, on_match);
      return;
    }
    const std::size_t ai = std::get<std::size_t>(rule_.steps[k]);
    const CompiledAtom& atom = rule_.atoms[ai];
    Pattern pattern;
    pattern.predicate = atom.predicate;
    if (known(atom.subject)) {
      const Value& s = resolve(atom.subject);
      if (!s.is_entity()) return;
      pattern.subject = s.text();
    }
    if (known(atom.object)) pattern.object = resolve(atom.object);
    store_.for_each_match(pattern, ranges_[ai], [&](const Fact& f) {
      const bool bind_s = !known(atom.subject);
      if (bind_s) {
        values_[atom.subject.slot] = Value::entity(f.subject());
        bound_[atom.subject.slot] = true;
      }
      const bool bind_o = !known(atom.object);
      bool ok = true;
      if (bind_o) {
        values_[atom.object.slot] = f.object();
        bound_[atom.object.slot] = true;
      } else if (atom.object.is_var() && bind_s && atom.object.slot == atom.subject.slot) {
        // p(?x, ?x): the object slot was just bound from the subject.
        ok = f.object() == values_[atom.object.slot];
      }
      if (ok) {
        premises_[ai] = f.id;
        step(k + 1, on_match);
      }
      if (bind_o) bound_[atom.object.slot] = false;
      if (bind_s) bound_[atom.subject.slot] = false;
    });
  }

  const CompiledRule& rule_;
  const FactStore& store_;
  const std::vector<IdRange>& ranges_;
  std::vector<Value> values_;
  std::vector<bool> bound_;
  std::vector<FactId> premises_;
};

inline Triple instantiate(const CompiledAtom& head, const std::vector<Value>& values, const Vocabulary& vocab) {
  const Value& s = head.subject.is_var() ? values[head.subject.slot] : head.subject.constant;
  const Value& o = head.object.is_var() ? values[head.object.slot] : head.object.constant;
  Triple t{s.text(), head.predicate, o};
  if (auto schema = vocab.schema(head.predicate))
    if (auto c = conform(o, *schema)) t.object = std::move(*c);
  return t;
}

}  // namespace detail

/// Every head fact the rule can derive from the current store that the store
/// does not already hold. Evaluates naively over all facts; the store is not
/// modified. Results are in match order without duplicates.
inline std::vector<Derivation> apply_rule(const Rule& rule, const FactStore& store) {
  const auto compiled = detail::compile_rule(rule);
  std::vector<IdRange> ranges(compiled.atoms.size(), IdRange{0, store.last_id()});
  std::vector<Derivation> out;
  std::unordered_set<Triple, TripleHash> seen;
  detail::Matcher::run(compiled, store, ranges, [&](const std::vector<Value>& values, const std::vector<FactId>& premises) {
    for (const auto& h : compiled.head) {
      Triple t = detail::instantiate(h, values, store.vocabulary());
      if (store.contains(t) || !seen.insert(t).second) continue;
      out.push_back({std::move(t), compiled.id, premises});
    }
  });
  return out;
}

/// Semi-naive forward chaining. Keeps a watermark so that repeated runs over a
/// growing store only join against facts added since the previous fixpoint.
class Reasoner {
 public:
  static constexpr std::size_t kDefaultMaxEpochs = 10'000;

  explicit Reasoner(RuleSet rules) : rules_(std::move(rules)) {
    compiled_.reserve(rules_.rules.size());
    for (const auto& r : rules_.rules) compiled_.push_back(detail::compile_rule(r));
  }

  const RuleSet& rules() const { return rules_; }
  FactId watermark() const { return watermark_; }

  /// Forget the previous fixpoint; the next run re-derives from scratch.
  void reset() {
    watermark_ = 0;
    last_store_ = nullptr;
  }

  FixpointStats run(FactStore& store, std::size_t max_epochs = kDefaultMaxEpochs) {
    if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
    if (last_store_ != &store || watermark_ > store.last_id()) watermark_ = 0;
    last_store_ = &store;
    const FactId start = watermark_;
    watermark_ = 0;  // stays invalid if this run throws
    FixpointStats stats = evaluate(store, start, max_epochs);
    watermark_ = store.last_id();
    return stats;
  }

 private:
  FixpointStats evaluate(FactStore& store, FactId old_upto, std::size_t max_epochs) const {
    FixpointStats stats;
    FactId delta_upto = store.last_id();
    for (;;) {
      if (++stats.epochs > max_epochs)
        throw EpochLimitExceeded("no fixpoint after " + std::to_string(max_epochs) + " epochs");
      std::vector<Derivation> pending;
      std::unordered_set<Triple, TripleHash> pending_keys;
      if (delta_upto > old_upto) {
        for (const auto& rule : compiled_) {
          std::vector<IdRange> ranges(rule.atoms.size());
          // Atom i reads the delta; atoms before it read only old facts and
          // atoms after it read everything, so each match is found once.
          for (std::size_t i = 0; i < rule.atoms.size(); ++i) {
            for (std::size_t j = 0; j < rule.atoms.size(); ++j) {
              if (j < i) ranges[j] = IdRange{0, old_upto};
              else if (j == i) ranges[j] = IdRange{old_upto, delta_upto};
              else ranges[j] = IdRange{0, delta_upto};
            }
            detail::Matcher::run(rule, store, ranges, [&](const std::vector<Value>& values, const std::vector<FactId>& premises) {
              for (const auto& h : rule.head) {
                Triple t = detail::instantiate(h, values, store.vocabulary());
                if (store.contains(t) || !pending_keys.insert(t).second) continue;
                pending.push_back({std::move(t), rule.id, premises});
              }
            });
          }
        }
      }
      if (pending.empty()) break;
      old_upto = delta_upto;
      for (auto& d : pending) {
        store.insert(std::move(d.triple), Derived{std::move(d.rule_id), std::move(d.premises)});
        ++stats.derived;
      }
      delta_upto = store.last_id();
    }
    return stats;
  }

  RuleSet rules_;
  std::vector<detail::CompiledRule> compiled_;
  FactId watermark_ = 0;
  const FactStore* last_store_ = nullptr;
};

/// Runs `rules` over the whole store until nothing new can be derived.
inline FixpointStats run_to_fixpoint(const RuleSet& rules, FactStore& store,
                                     std::size_t max_epochs = Reasoner::kDefaultMaxEpochs) {
  Reasoner r(rules);
  return r.run(store, max_epochs);
}

}  // namespace kc
