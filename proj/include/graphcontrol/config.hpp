#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphcontrol/adapt.hpp"
#include "graphcontrol/condition.hpp"
#include "graphcontrol/dataset_io.hpp"
#include "graphcontrol/errors.hpp"
#include "graphcontrol/pretrain.hpp"

// Flat key=value configuration. Keys before the first [section] header are
// global; later keys belong to their section. A key may also be written as
// section.key anywhere. Resolution order: built-in defaults, dataset profile,
// config file, --seed, --set overrides.

namespace graphcontrol {

struct GlobalOptions {
  std::string data_root = "data";
  std::string dataset;
  std::string checkpoint;
  std::string profile;  // empty: chosen from the dataset name when one matches
  std::string cache_dir;
};

struct GradcheckConfig {
  std::size_t nodes = 5;
  int classes = 3;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
};

struct ResolvedConfig {
  GlobalOptions global;
  PretrainConfig pretrain;
  FinetuneConfig finetune;
  DeepWalkConfig embed;
  GradcheckConfig gradcheck;
  std::string profile_applied;
};

struct ConfigEntry {
  std::string section;  // "" for global
  std::string key;
  std::string value;
  std::string origin;  // "file:line" or "--set"
};

struct DatasetProfile {
  std::size_t epochs;
  double learning_rate;
  OptimizerKind optimizer;
  double weight_decay;
  std::size_t walk_steps;
  double restart_rate;
  double threshold;
};

/// Transfer-learning hyper-parameters per downstream dataset.
inline const std::map<std::string, DatasetProfile>& dataset_profiles() {
  using enum OptimizerKind;
  static const std::map<std::string, DatasetProfile> profiles{
      {"cora_ml", {100, 0.5, adamw, 5e-4, 256, 0.8, 0.17}},
      {"amazon_photo", {100, 0.5, adamw, 5e-4, 256, 0.8, 0.2}},
      {"dblp", {100, 0.1, adam, 5e-4, 256, 0.8, 0.3}},
      {"coauthor_physics", {100, 0.01, adam, 1e-2, 256, 0.8, 0.15}},
      {"usa_airport", {100, 0.3, sgd, 1e-3, 256, 0.5, 0.15}},
      {"europe_airport", {100, 0.2, sgd, 5e-4, 256, 0.5, 0.15}},
      {"brazil_airport", {400, 0.1, sgd, 1e-3, 256, 0.3, 0.3}},
      {"h_index", {100, 0.1, sgd, 5e-4, 256, 0.5, 0.17}},
  };
  return profiles;
}

/// Lower-cases and maps '-' and ' ' to '_', so "Cora-ML" finds "cora_ml".
inline std::string profile_key(std::string name) {
  for (auto& c : name) c = c == '-' || c == ' ' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (name == "europe" || name == "usa" || name == "brazil") name += "_airport";
  if (name == "amazon_photos") name = "amazon_photo";
  if (name == "physics") name = "coauthor_physics";
  return name;
}

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

namespace detail {

template <class T>
T parse_as(const ConfigEntry& e) {
  if constexpr (std::is_same_v<T, std::string>) {
    return e.value;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    throw ConfigError(e.key + ": expected true/false, got '" + e.value + "'");
  } else {
    if (auto v = parse_number<T>(e.value)) return *v;
    throw ConfigError(e.key + ": cannot parse '" + e.value + "' (" + e.origin + ")");
  }
}

using Setter = std::function<void(ResolvedConfig&, const ConfigEntry&)>;

template <class T, class Field>
Setter field(Field f) {
  return [f](ResolvedConfig& c, const ConfigEntry& e) { f(c) = parse_as<T>(e); };
}

// section -> key -> setter
inline const std::map<std::string, std::map<std::string, Setter>>& schema() {
  static const std::map<std::string, std::map<std::string, Setter>> s{
      {"",
       {{"data_root", field<std::string>([](ResolvedConfig& c) -> auto& { return c.global.data_root; })},
        {"dataset", field<std::string>([](ResolvedConfig& c) -> auto& { return c.global.dataset; })},
        {"checkpoint", field<std::string>([](ResolvedConfig& c) -> auto& { return c.global.checkpoint; })},
        {"profile", field<std::string>([](ResolvedConfig& c) -> auto& { return c.global.profile; })},
        {"cache_dir", field<std::string>([](ResolvedConfig& c) -> auto& { return c.global.cache_dir; })}}},
      {"pretrain",
       {{"epochs", field<std::size_t>([](ResolvedConfig& c) -> auto& { return c.pretrain.epochs; })},
        {"batch_size", field<std::size_t>([](ResolvedConfig& c) -> auto& { return c.pretrain.batch_size; })},
        {"learning_rate", field<double>([](ResolvedConfig& c) -> auto& { return c.pretrain.learning_rate; })},
        {"temperature", field<double>([](ResolvedConfig& c) -> auto& { return c.pretrain.temperature; })},
        {"walk_steps", field<std::size_t>([](ResolvedConfig& c) -> auto& { return c.pretrain.walk_steps; })},
        {"restart_rate", field<double>([](ResolvedConfig& c) -> auto& { return c.pretrain.restart_rate; })},
        {"optimizer", [](ResolvedConfig& c, const ConfigEntry& e) { c.pretrain.optimizer = parse_optimizer(e.value); }},
        {"weight_decay", field<double>([](ResolvedConfig& c) -> auto& { return c.pretrain.weight_decay; })},
        {"seed", field<std::uint64_t>([](ResolvedConfig& c) -> auto& { return c.pretrain.seed; })},
        {"loss", field<std::string>([](ResolvedConfig& c) -> auto& { return c.pretrain.loss; })},
        {"objective", field<std::string>([](ResolvedConfig& c) -> auto& { return c.pretrain.objective; })},
        {"edge_drop", field<double>([](ResolvedConfig& c) -> auto& { return c.pretrain.edge_drop; })},
        {"batches_per_epoch", field<std::size_t>([](ResolvedConfig& c) -> auto& { return c.pretrain.batches_per_epoch; })}}},
      {"finetune",
       {{"mode", [](ResolvedConfig& c, const ConfigEntry& e) { c.finetune.mode = parse_mode(e.value); }},
        {"epochs", field<std::size_t>([](ResolvedConfig& c) -> auto& { return c.finetune.epochs; })},
        {"learning_rate", field<double>([](ResolvedConfig& c) -> auto& { return c.finetune.learning_rate; })},
        {"optimizer", [](ResolvedConfig& c, const ConfigEntry& e) { c.finetune.optimizer = parse_optimizer(e.value); }},
        {"weight_decay", field<double>([](ResolvedConfig& c) -> auto& { return c.finetune.weight_decay; })},
        {"walk_steps", field<std::size_t>([](ResolvedConfig& c) -> auto& { return c.finetune.walk_steps; })},
        {"restart_rate", field<double>([](ResolvedConfig& c) -> auto& { return c.finetune.restart_rate; })},
        {"threshold", field<double>([](ResolvedConfig& c) -> auto& { return c.finetune.threshold; })},
        {"batch_size", field<std::size_t>([](ResolvedConfig& c) -> auto& { return c.finetune.batch_size; })},
        {"seed", field<std::uint64_t>([](ResolvedConfig& c) -> auto& { return c.finetune.seed; })},
        {"shots", field<std::size_t>([](ResolvedConfig& c) -> auto& { return c.finetune.shots; })},
        {"train_fraction", field<double>([](ResolvedConfig& c) -> auto& { return c.finetune.train_fraction; })},
        {"n_runs", field<std::size_t>([](ResolvedConfig& c) -> auto& { return c.finetune.n_runs; })},
        {"sample_seed", field<std::uint64_t>([](ResolvedConfig& c) -> auto& { return c.finetune.sample_seed; })},
        {"prompt_init", field<double>([](ResolvedConfig& c) -> auto& { return c.finetune.prompt_init; })},
        {"condition_scope",
         [](ResolvedConfig& c, const ConfigEntry& e) { c.finetune.condition_scope = parse_condition_scope(e.value); }}}},
      {"embed",
       {{"dim", field<std::size_t>([](ResolvedConfig& c) -> auto& { return c.embed.dim; })},
        {"walks_per_node", field<std::size_t>([](ResolvedConfig& c) -> auto& { return c.embed.walks_per_node; })},
        {"walk_length", field<std::size_t>([](ResolvedConfig& c) -> auto& { return c.embed.walk_length; })},
        {"window", field<std::size_t>([](ResolvedConfig& c) -> auto& { return c.embed.window; })},
        {"negatives", field<std::size_t>([](ResolvedConfig& c) -> auto& { return c.embed.negatives; })},
        {"epochs", field<std::size_t>([](ResolvedConfig& c) -> auto& { return c.embed.epochs; })},
        {"learning_rate", field<double>([](ResolvedConfig& c) -> auto& { return c.embed.learning_rate; })},
        {"seed", field<std::uint64_t>([](ResolvedConfig& c) -> auto& { return c.embed.seed; })}}},
      {"gradcheck",
       {{"nodes", field<std::size_t>([](ResolvedConfig& c) -> auto& { return c.gradcheck.nodes; })},
        {"classes", field<int>([](ResolvedConfig& c) -> auto& { return c.gradcheck.classes; })},
        {"seed", field<std::uint64_t>([](ResolvedConfig& c) -> auto& { return c.gradcheck.seed; })},
        {"tolerance", field<double>([](ResolvedConfig& c) -> auto& { return c.gradcheck.tolerance; })}}},
  };
  return s;
}

inline std::string qualified(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

inline std::optional<std::string> suggest(const std::string& section, const std::string& key) {
  std::optional<std::string> best;
  std::size_t best_d = std::string::npos;
  bool best_same = false;
  for (const auto& [sec, keys] : schema()) {
    for (const auto& [k, setter] : keys) {
      const std::size_t d = edit_distance(key, k);
      const bool same = sec == section;
      if (d < best_d || (d == best_d && same && !best_same)) {
        best = same ? k : qualified(sec, k);
        best_d = d;
        best_same = same;
      }
    }
  }
  if (best && best_d <= std::max<std::size_t>(2, key.size() / 3)) return best;
  return std::nullopt;
}

}  // namespace detail

/// Parses config text. Syntax errors raise ConfigError naming the line.
inline std::vector<ConfigEntry> parse_config_text(const std::string& text, const std::string& source) {
  std::vector<ConfigEntry> out;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  std::vector<std::string> errors;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string origin = source + ":" + std::to_string(lineno);
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        errors.push_back(origin + ": malformed section header");
        continue;
      }
      section = std::string(detail::trim(t.substr(1, t.size() - 2)));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      errors.push_back(origin + ": expected key = value");
      continue;
    }
    ConfigEntry e{section, std::string(detail::trim(t.substr(0, eq))), std::string(detail::trim(t.substr(eq + 1))), origin};
    if (auto dot = e.key.find('.'); dot != std::string::npos && section.empty()) {
      e.section = e.key.substr(0, dot);
      e.key.erase(0, dot + 1);
    }
    out.push_back(std::move(e));
  }
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return out;
}

inline std::vector<ConfigEntry> parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.filename().string());
}

/// Parses `--set key=value`. An unqualified key belongs to `default_section`
/// when that section has it, otherwise to the global section, otherwise to
/// the only section that defines it.
inline ConfigEntry parse_override(const std::string& text, const std::string& default_section) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + text + "'");
  ConfigEntry e{default_section, std::string(detail::trim(std::string_view(text).substr(0, eq))),
                std::string(detail::trim(std::string_view(text).substr(eq + 1))), "--set"};
  if (auto dot = e.key.find('.'); dot != std::string::npos) {
    e.section = e.key.substr(0, dot);
    e.key.erase(0, dot + 1);
    return e;
  }
  const auto& s = detail::schema();
  auto has = [&](const std::string& sec) { return s.contains(sec) && s.at(sec).contains(e.key); };
  if (has(default_section)) return e;
  if (has("")) {
    e.section.clear();
    return e;
  }
  std::vector<std::string> owners;
  for (const auto& [sec, keys] : s)
    if (keys.contains(e.key)) owners.push_back(sec);
  if (owners.size() == 1) e.section = owners.front();
  return e;
}

inline void apply_profile(ResolvedConfig& c, const std::string& name) {
  const auto& profiles = dataset_profiles();
  const auto it = profiles.find(profile_key(name));
  if (it == profiles.end()) throw ConfigError("unknown profile '" + name + "'");
  const auto& p = it->second;
  c.finetune.epochs = p.epochs;
  c.finetune.learning_rate = p.learning_rate;
  c.finetune.optimizer = p.optimizer;
  c.finetune.weight_decay = p.weight_decay;
  c.finetune.walk_steps = p.walk_steps;
  c.finetune.restart_rate = p.restart_rate;
  c.finetune.threshold = p.threshold;
  c.profile_applied = it->first;
}

/// Applies `entries` (file values first, then overrides) on top of the
/// defaults and the dataset profile. Every unknown key and every bad value
/// is reported in one ConfigError.
inline ResolvedConfig resolve_config(const std::vector<ConfigEntry>& entries) {
  const auto& s = detail::schema();
  std::vector<std::string> errors;
  for (const auto& e : entries) {
    if (s.contains(e.section) && s.at(e.section).contains(e.key)) continue;
    std::string msg = "unknown config key '" + detail::qualified(e.section, e.key) + "' (" + e.origin + ")";
    if (!s.contains(e.section)) msg += ": no section [" + e.section + "]";
    if (auto hint = detail::suggest(e.section, e.key)) msg += "; did you mean '" + *hint + "'?";
    errors.push_back(msg);
  }

  ResolvedConfig c;
  // Profile selection needs the global keys first.
  for (const auto& e : entries)
    if (e.section.empty() && (e.key == "profile" || e.key == "dataset")) s.at("").at(e.key)(c, e);
  const std::string profile = !c.global.profile.empty() ? c.global.profile : c.global.dataset;
  if (!profile.empty()) {
    if (dataset_profiles().contains(profile_key(profile)))
      apply_profile(c, profile);
    else if (!c.global.profile.empty())
      errors.push_back("unknown profile '" + c.global.profile + "'");
  }

  for (const auto& e : entries) {
    if (!s.contains(e.section) || !s.at(e.section).contains(e.key)) continue;
    try {
      s.at(e.section).at(e.key)(c, e);
    } catch (const ConfigError& err) {
      errors.push_back(detail::qualified(e.section, e.key) + " (" + e.origin + "): " + err.what());
    }
  }
  if (errors.empty()) {
    for (auto check : std::initializer_list<std::function<void()>>{[&] { c.pretrain.validate(); },
                                                                   [&] { c.finetune.validate(); }}) {
      try {
        check();
      } catch (const ConfigError& err) {
        errors.push_back(err.what());
      }
    }
  }
  if (!errors.empty()) {
    std::string msg = errors.size() == 1 ? errors.front() : std::to_string(errors.size()) + " problems:";
    if (errors.size() > 1)
      for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return c;
}

inline nlohmann::json to_json(const ResolvedConfig& c) {
  return {{"global",
           {{"data_root", c.global.data_root},
            {"dataset", c.global.dataset},
            {"checkpoint", c.global.checkpoint},
            {"profile", c.global.profile},
            {"cache_dir", c.global.cache_dir}}},
          {"profile_applied", c.profile_applied},
          {"pretrain", to_json(c.pretrain)},
          {"finetune", to_json(c.finetune)},
          {"embed",
           {{"dim", c.embed.dim},
            {"walks_per_node", c.embed.walks_per_node},
            {"walk_length", c.embed.walk_length},
            {"window", c.embed.window},
            {"negatives", c.embed.negatives},
            {"epochs", c.embed.epochs},
            {"learning_rate", c.embed.learning_rate},
            {"seed", c.embed.seed}}},
          {"gradcheck",
           {{"nodes", c.gradcheck.nodes},
            {"classes", c.gradcheck.classes},
            {"seed", c.gradcheck.seed},
            {"tolerance", c.gradcheck.tolerance}}}};
}

}  // namespace graphcontrol
