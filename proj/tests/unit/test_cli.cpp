#include <gtest/gtest.h>

#include <sstream>

#include "airground/cli/commands.hpp"
#include "helpers.hpp"

using namespace airground;
using airground::testing::read_file;
using airground::testing::temp_dir;

namespace {

const std::string kSmoke = std::string(AIRGROUND_CONFIG_DIR) + "/smoke.toml";

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "airground");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(Cli, HelpAndParseErrors) {
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"compare", "--bogus"}).code, 2);
  EXPECT_EQ(run_cli({"compare", "--seed", "x"}).code, 2);
}

TEST(Cli, ConfigAndRuntimeErrorCodes) {
  const auto dir = temp_dir("cli_errors").string();
  auto r = run_cli({"compare", "--config", dir + "/nope.toml", "--out", dir});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope.toml"), std::string::npos);
  EXPECT_EQ(run_cli({"compare", "--config", kSmoke, "--policy", "magic", "--out", dir}).code, 2);
  EXPECT_EQ(run_cli({"evaluate", "--config", kSmoke, "--out", dir}).code, 2);
  EXPECT_EQ(run_cli({"evaluate", "--config", kSmoke, "--policy", "hrl4ag", "--out", dir}).code, 2);
  EXPECT_EQ(run_cli({"compare", "--config", kSmoke, "--mode", "boats", "--out", dir}).code, 2);
  r = run_cli({"evaluate", "--config", kSmoke, "--policy", "hrl4ag:" + dir + "/missing.bin", "--out", dir});
  EXPECT_EQ(r.code, 3);
  // A bad policy later in the list stops the run before anything is written.
  const auto fresh = dir + "/fresh";
  r = run_cli({"compare", "--config", kSmoke, "--policy", "greedy,hrl4ag:" + dir + "/missing.bin",
               "--out", fresh});
  EXPECT_EQ(r.code, 3);
  EXPECT_FALSE(std::filesystem::exists(fresh + "/compare.csv"));
}

TEST(Cli, SummaryUsesSampleStd) {
  std::vector<cli::SeedResult> rs(3);
  rs[0].metrics.dn = 1;
  rs[1].metrics.dn = 2;
  rs[2].metrics.dn = 6;
  const auto s = cli::summarize(rs);
  EXPECT_DOUBLE_EQ(s.dn_mean, 3.0);
  EXPECT_DOUBLE_EQ(s.dn_std, std::sqrt(7.0));
  EXPECT_EQ(cli::summarize({rs[0]}).dn_std, 0.0);
  EXPECT_EQ(cli::format_double(0.1), "0.1");
  EXPECT_EQ(cli::format_double(2.0), "2");
}

TEST(Cli, GenerateWritesReplayableInstance) {
  const auto dir = temp_dir("cli_gen");
  ASSERT_EQ(run_cli({"generate", "--config", kSmoke, "--seed", "4", "--out", dir.string()}).code, 0);
  for (const char* f : {"nodes.csv", "edges.csv", "stations.csv", "orders.csv", "config.resolved.toml"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  const auto rc = load_run_config((dir / "config.resolved.toml").string());
  EXPECT_TRUE(rc.scenario.orders.from_file());
  const auto orders = load_orders(rc.scenario.orders.path);
  const auto again = make_world(load_scenario(load_run_config(kSmoke).scenario), 4);
  ASSERT_EQ(orders.size(), again.orders.size());
  for (std::size_t i = 0; i < orders.size(); ++i) {
    EXPECT_EQ(orders[i].origin, again.orders[i].origin);
    EXPECT_EQ(orders[i].deadline, again.orders[i].deadline);
  }
  const auto out = temp_dir("cli_gen_eval").string();
  EXPECT_EQ(run_cli({"compare", "--config", (dir / "config.resolved.toml").string(), "--seed", "1",
                     "--out", out, "--no-trace"})
                .code,
            0);
}

TEST(Cli, TrainThenEvaluateIsByteStable) {
  auto train_eval = [](const std::string& name) {
    const auto dir = temp_dir(name);
    const auto r = run_cli({"train", "--config", kSmoke, "--seed", "3", "--out", dir.string(), "--no-timing"});
    EXPECT_EQ(r.code, 0) << r.err;
    const auto ckpt = (dir / "checkpoint.bin").string();
    const auto e = run_cli({"evaluate", "--config", kSmoke, "--policy", "hrl4ag:" + ckpt + ",greedy",
                            "--out", dir.string(), "--no-timing"});
    EXPECT_EQ(e.code, 0) << e.err;
    return std::vector<std::string>{read_file(dir / "checkpoint.bin"), read_file(dir / "curves.jsonl"),
                                    read_file(dir / "evaluate.csv"),
                                    read_file(dir / "traces" / "hrl4ag_seed2.jsonl")};
  };
  const auto a = train_eval("cli_det_a");
  const auto b = train_eval("cli_det_b");
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a[0].empty());
  EXPECT_FALSE(a[3].empty());
  std::istringstream curves(a[1]);
  std::string line;
  int lines = 0;
  while (std::getline(curves, line)) ++lines;
  EXPECT_EQ(lines, 6);
  // header + 3 seed rows + summary, for each of two policies
  std::istringstream csv(a[2]);
  lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 1 + 2 * 4);
}

TEST(Cli, MultiSeedTrainUsesSubdirectories) {
  const auto dir = temp_dir("cli_multi");
  ASSERT_EQ(run_cli({"train", "--config", kSmoke, "--seed", "1,2", "--out", dir.string()}).code, 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "seed_1" / "checkpoint.bin"));
  EXPECT_TRUE(std::filesystem::exists(dir / "seed_2" / "curves.jsonl"));
  EXPECT_NE(read_file(dir / "seed_1" / "checkpoint.bin"), read_file(dir / "seed_2" / "checkpoint.bin"));
}

TEST(Cli, FlagsOverrideConfig) {
  cli::Options o;
  o.config_path = kSmoke;
  o.no_hierarchy = true;
  o.no_intrinsic = true;
  o.no_shaping = true;
  o.mode = FleetMode::CarrierOnly;
  const auto rc = cli::resolve_config(o);
  EXPECT_FALSE(rc.net.hierarchy);
  EXPECT_EQ(rc.rewards.alpha, 0.0);
  EXPECT_FALSE(rc.rewards.shaping);
  EXPECT_EQ(rc.scenario.fleet.n_uav, 0);
  EXPECT_EQ(rc.scenario.fleet.n_carrier, 6);
}

TEST(Cli, CompareWritesTable) {
  const auto dir = temp_dir("cli_cmp");
  const auto r = run_cli({"compare", "--config", kSmoke, "--out", dir.string(), "--no-trace"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = read_file(dir / "compare.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "policy,pn_mean,pn_std,dn_mean,dn_std,et_mean,et_std");
  EXPECT_NE(r.out.find("exact"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(dir / "traces"));
}
