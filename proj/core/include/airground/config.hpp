#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "airground/mdp.hpp"
#include "airground/neural.hpp"
#include "airground/scenario.hpp"
#include "airground/trainer.hpp"

namespace airground {

/// A parsed value from the config text format: `key = value` lines grouped
/// under `[table]` / `[table.sub]` headers, `#` comments, values being
/// strings, integers, floats, booleans, or flat arrays of those.
struct ConfigValue {
  using Array = std::vector<ConfigValue>;
  std::variant<bool, std::int64_t, double, std::string, Array> v;
  int line = 0;
};

/// Flat view of a config file keyed by dotted path ("fleet.n_uav").
class ConfigDocument {
 public:
  static ConfigDocument parse(std::string_view text);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const ConfigValue* find(const std::string& key) const;
  /// Marks a key as consumed by the reader.
  void mark(const std::string& key) const { used_[key] = true; }
  /// Keys present in the text but never read.
  std::vector<std::string> unused() const;
  const std::map<std::string, ConfigValue>& values() const { return values_; }

 private:
  std::map<std::string, ConfigValue> values_;
  mutable std::map<std::string, bool> used_;
};

/// Everything one CLI invocation needs.
struct RunConfig {
  ScenarioConfig scenario;
  RewardWeights rewards;
  nn::NetConfig net;
  TrainConfig train;
  std::uint64_t init_seed = 0;  // parameter initialization
  std::vector<std::uint64_t> eval_seeds{101, 102, 103, 104, 105};
  std::vector<std::string> compare_policies{"greedy", "exact", "random"};
};

/// Reads a document into a RunConfig, starting from defaults. Relative paths
/// are resolved against `base_dir`. Unknown keys and type mismatches throw
/// ConfigError naming the key.
RunConfig read_run_config(const ConfigDocument& doc, const std::string& base_dir);

RunConfig load_run_config(const std::string& path);

/// The fully resolved configuration in the same text format; parsing it back
/// yields an equal RunConfig.
std::string render_run_config(const RunConfig& config);

}  // namespace airground
