// kcc: replay scenarios, ingest sensor logs and inspect the knowledge base.
//
// Exit codes: 0 clean, 1 input or configuration error, 2 a Confirmed alert
// was raised by `run`.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kc/kc.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitConfirmed = 2;

struct Options {
  std::string config = std::string(KC_DATA_DIR) + "/kcc.conf";
  std::string rules;
  std::string vocab;
  std::string output;
  std::string format;

  std::string scenario;
  std::string dump_out;
  bool without_intel = false;
  bool trees = false;

  std::string source_type;
  std::string input;

  std::string pattern;
  std::string store;
  kc::FactId fact_id = 0;
};

kc::CliConfig resolve_config(const Options& o) {
  kc::CliConfig cfg = kc::CliConfig::load(o.config);
  if (!o.rules.empty()) cfg.rules = o.rules;
  if (!o.vocab.empty()) cfg.vocab = o.vocab;
  if (!o.format.empty()) cfg.format = *kc::parse_output_format(o.format);
  cfg.require_files();
  return cfg;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw kc::ConfigError("cannot write " + path);
  out << content;
  if (!out) throw kc::ConfigError("failed writing " + path);
}

void emit(const Options& o, const std::string& content) {
  if (o.output.empty()) std::cout << content;
  else write_file(o.output, content);
}

int cmd_run(const Options& o) {
  const kc::CliConfig cfg = resolve_config(o);
  kc::EngineConfig ec = cfg.engine_config();
  kc::Scenario sc = kc::load_scenario(o.scenario, ec.techniques);
  if (o.without_intel) {
    std::erase_if(sc.lines, [](const kc::ScenarioLine& l) {
      return l.source == kc::InputSource::IntelDoc || l.source == kc::InputSource::IntelText;
    });
  }
  kc::Engine engine(std::move(ec));
  const kc::Transcript tr = kc::replay(sc, engine);

  if (!o.output.empty()) write_file(o.output, kc::transcript_to_json(tr).dump(2) + "\n");
  if (!o.dump_out.empty()) write_file(o.dump_out, engine.store().dump());
  if (cfg.format == kc::OutputFormat::Jsonl) std::cout << kc::render_alerts_jsonl(tr.final_alerts);
  else std::cout << kc::render_report(engine.store(), tr.final_alerts, o.trees);
  return tr.count(kc::AlertTier::Confirmed) > 0 ? kExitConfirmed : kExitOk;
}

int cmd_ingest(const Options& o) {
  const kc::CliConfig cfg = resolve_config(o);
  kc::Engine engine(cfg.engine_config());
  const std::string content = kc::text::read_file(o.input);

  if (o.source_type == "intel-doc") {
    engine.ingest_intel_document(content);
  } else {
    const auto lines = kc::text::split_lines(content);
    for (std::size_t n = 0; n < lines.size(); ++n) {
      const auto line = kc::text::trim(lines[n]);
      if (line.empty()) continue;
      try {
        if (o.source_type == "snort") engine.ingest_snort_line(line);
        else if (o.source_type == "host") engine.ingest_host_line(line);
        else engine.ingest_intel_sentence(line);
      } catch (const kc::Error& e) {
        throw kc::MalformedLine(o.input + ": " + e.what(), {n + 1, 1});
      }
    }
  }
  engine.settle();
  write_file(o.dump_out, engine.store().dump());
  std::cerr << "wrote " << engine.store().size() << " facts to " << o.dump_out << "\n";
  return kExitOk;
}

kc::FactStore load_store(const Options& o) {
  const kc::CliConfig cfg = resolve_config(o);
  auto vocab = std::make_shared<kc::Vocabulary>(kc::Vocabulary::load(cfg.vocab));
  return kc::FactStore::load(kc::text::read_file(o.store), std::move(vocab));
}

int cmd_query(const Options& o) {
  const kc::FactStore store = load_store(o);
  const kc::Pattern p = kc::Pattern::parse(o.pattern);
  std::string out;
  for (const kc::Fact* f : store.query(p)) out += kc::FactStore::format_fact(*f) + "\n";
  emit(o, out);
  return kExitOk;
}

int cmd_explain(const Options& o) {
  const kc::FactStore store = load_store(o);
  std::string out;
  kc::render_tree(store, store.explain(o.fact_id), out);
  emit(o, out);
  return kExitOk;
}

int cmd_check_rules(const Options& o) {
  const kc::CliConfig cfg = resolve_config(o);
  const kc::Vocabulary vocab = kc::Vocabulary::load(cfg.vocab);
  const kc::RuleSet rules = kc::load_ruleset(cfg.rules, vocab);
  std::cout << cfg.rules.string() << ": " << rules.size() << " rules ok\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kill-chain correlation engine"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "key=value configuration file");
  app.add_option("--rules", o.rules, "rule file, overrides the config");
  app.add_option("--vocab", o.vocab, "vocabulary file, overrides the config");
  app.add_option("--output", o.output, "write the transcript (run) or results to this file");
  app.add_option("--format", o.format, "human or jsonl")->check(CLI::IsMember({"human", "jsonl"}));

  auto* run = app.add_subcommand("run", "replay a scenario");
  run->add_option("scenario", o.scenario)->required();
  run->add_option("--dump", o.dump_out, "write the final fact store here");
  run->add_flag("--without-intel", o.without_intel, "drop intel lines before replay");
  run->add_flag("--explain", o.trees, "print derivation trees for confirmed alerts");

  auto* ingest = app.add_subcommand("ingest", "ingest one input file and dump the store");
  ingest->add_option("source", o.source_type)->required()->check(
      CLI::IsMember({"snort", "host", "intel-doc", "intel-text"}));
  ingest->add_option("path", o.input)->required();
  ingest->add_option("dump", o.dump_out)->required();

  auto* query = app.add_subcommand("query", "match a pattern against a store dump");
  query->add_option("pattern", o.pattern)->required();
  query->add_option("--store", o.store)->required();

  auto* explain = app.add_subcommand("explain", "print the derivation tree of a fact");
  explain->add_option("id", o.fact_id)->required();
  explain->add_option("--store", o.store)->required();

  auto* check = app.add_subcommand("check-rules", "parse and validate a rule file");
  check->add_option("rules", o.rules, "rule file, overrides the config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*run) return cmd_run(o);
    if (*ingest) return cmd_ingest(o);
    if (*query) return cmd_query(o);
    if (*explain) return cmd_explain(o);
    if (*check) return cmd_check_rules(o);
  } catch (const kc::Error& e) {
    std::cerr << "kcc: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "kcc: internal error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
