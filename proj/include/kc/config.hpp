#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "kc/engine.hpp"
#include "kc/error.hpp"
#include "kc/text.hpp"

namespace kc {

enum class OutputFormat { Human, Jsonl };

inline std::optional<OutputFormat> parse_output_format(std::string_view s) {
  if (s == "human") return OutputFormat::Human;
  if (s == "jsonl") return OutputFormat::Jsonl;
  return std::nullopt;
}

/// File locations and output settings for the command line tool.
struct CliConfig {
  std::filesystem::path vocab;
  std::filesystem::path rules;
  std::filesystem::path sidmap;
  std::filesystem::path techniques;
  /// Optional; defaults apply when empty.
  std::filesystem::path indicators;
  OutputFormat format = OutputFormat::Human;
  int snort_year = 1970;
  /// `host.<name> = <ipv4>` entries.
  std::map<std::string, std::string> hosts;

  /// Throws ConfigError naming the first referenced file that does not exist.
  void require_files() const {
    auto need = [](const char* key, const std::filesystem::path& p) {
      if (p.empty()) throw ConfigError(std::string("config: '") + key + "' is not set");
      if (!std::filesystem::is_regular_file(p)) throw ConfigError(std::string("missing ") + key + " file: " + p.string());
    };
    need("vocab", vocab);
    need("rules", rules);
    need("sidmap", sidmap);
    need("techniques", techniques);
    if (!indicators.empty() && !std::filesystem::is_regular_file(indicators))
      throw ConfigError("missing indicators file: " + indicators.string());
  }

  /// Parses a flat key = value file. Relative paths resolve against the
  /// config file's directory.
  static CliConfig load(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw ConfigError("missing config file: " + path.string());
    const auto base = path.parent_path();
    auto rel = [&](const std::string& v) {
      std::filesystem::path p(v);
      return p.is_absolute() ? p : base / p;
    };
    CliConfig cfg;
    for (const auto& [key, value] : text::parse_key_values(text::read_file(path), path.string())) {
      if (key == "vocab") cfg.vocab = rel(value);
      else if (key == "rules") cfg.rules = rel(value);
      else if (key == "sidmap") cfg.sidmap = rel(value);
      else if (key == "techniques") cfg.techniques = rel(value);
      else if (key == "indicators") cfg.indicators = rel(value);
      else if (key == "format") {
        auto f = parse_output_format(value);
        if (!f) throw ConfigError(path.string() + ": format must be human or jsonl");
        cfg.format = *f;
      } else if (key == "snort_year") {
        auto y = parse_number(value);
        if (!y || y->kind() != ValueKind::Integer) throw ConfigError(path.string() + ": snort_year must be an integer");
        cfg.snort_year = static_cast<int>(y->as_integer());
      } else if (key.rfind("host.", 0) == 0) {
        cfg.hosts[key.substr(5)] = value;
      } else {
        throw ConfigError(path.string() + ": unknown key '" + key + "'");
      }
    }
    return cfg;
  }

  EngineConfig engine_config() const {
    require_files();
    EngineConfig ec;
    auto loaded = std::make_shared<Vocabulary>(Vocabulary::load(this->vocab));
    ec.rules = load_ruleset(rules, *loaded);
    ec.vocab = std::move(loaded);
    ec.sidmap = SidMap::load(sidmap);
    ec.techniques = TechniqueTable::load(techniques);
    if (!indicators.empty()) ec.indicators = IndicatorConfig::load(indicators);
    ec.snort_year = snort_year;
    for (const auto& [name, ip_text] : hosts) {
      auto ip = Ipv4::parse(ip_text);
      if (!ip) throw ConfigError("host." + name + ": invalid address '" + ip_text + "'");
      ec.hosts.add(name, *ip);
    }
    return ec;
  }
};

}  // namespace kc
