#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "airground/config.hpp"
#include "airground/engine.hpp"

namespace airground::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kRuntimeError = 3 };

/// Flags shared by every subcommand.
struct Options {
  std::string config_path;  // empty: built-in defaults
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> policies;
  std::string out_dir = "out";
  std::optional<FleetMode> mode;
  bool no_hierarchy = false;
  bool no_intrinsic = false;
  bool no_shaping = false;
  bool no_timing = false;  // record ET as 0 so outputs are byte-stable
  bool no_trace = false;
};

/// Config file plus flag overrides, validated.
RunConfig resolve_config(const Options& opt);

/// One evaluated policy: name as given on the command line plus the object.
struct PolicyHandle {
  std::string label;
  std::unique_ptr<DispatchPolicy> policy;
  std::shared_ptr<nn::PolicyParams> params;  // set for learned policies
};

/// "greedy", "exact", "random", or "hrl4ag:CHECKPOINT".
PolicyHandle make_policy(const std::string& spec, const RunConfig& config);

struct SeedResult {
  std::uint64_t seed = 0;
  EpisodeMetrics metrics;
};

struct Summary {
  double pn_mean = 0, pn_std = 0;
  double dn_mean = 0, dn_std = 0;
  double et_mean = 0, et_std = 0;
};

/// Sample mean and standard deviation (n - 1 denominator; 0 for one sample).
Summary summarize(const std::vector<SeedResult>& results);

/// Shortest round-trip decimal form.
std::string format_double(double v);

int cmd_generate(const Options& opt, std::ostream& log);
int cmd_train(const Options& opt, std::ostream& log);
int cmd_evaluate(const Options& opt, std::ostream& log);
int cmd_compare(const Options& opt, std::ostream& log);

/// Parses argv and dispatches; maps failures to exit codes with a message on
/// `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace airground::cli
