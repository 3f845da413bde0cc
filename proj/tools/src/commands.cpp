#include "airground/cli/commands.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "airground/errors.hpp"
#include "airground/policy.hpp"
#include "airground/trainer.hpp"

namespace airground::cli {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& p, std::ios::openmode mode = std::ios::out) {
  std::ofstream f(p, mode);
  if (!f) throw FileError("cannot write " + p.string());
  return f;
}

void echo_config(const RunConfig& rc, const fs::path& dir) {
  auto f = open_out(dir / "config.resolved.toml");
  f << render_run_config(rc);
}

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw FileError("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

std::vector<std::uint64_t> eval_seeds(const Options& opt, const RunConfig& rc) {
  return opt.seeds.empty() ? rc.eval_seeds : opt.seeds;
}

std::string file_label(const std::string& label) {
  std::string out;
  for (const char c : label) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

std::vector<SeedResult> evaluate_policy(PolicyHandle& h,
                                        const std::shared_ptr<const Scenario>& scenario,
                                        const std::vector<std::uint64_t>& seeds, const Options& opt,
                                        const fs::path& out) {
  std::vector<SeedResult> results;
  for (const auto seed : seeds) {
    EngineOptions eo;
    eo.measure_time = !opt.no_timing;
    std::ofstream trace_file;
    std::optional<TraceWriter> trace;
    if (!opt.no_trace) {
      const auto dir = out / "traces";
      fs::create_directories(dir);
      trace_file = open_out(dir / (file_label(h.label) + "_seed" + std::to_string(seed) + ".jsonl"));
      trace.emplace(trace_file);
      eo.trace = &*trace;
    }
    results.push_back({seed, run_episode(scenario, *h.policy, seed, eo)});
  }
  return results;
}

std::string csv_label(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

RunConfig resolve_config(const Options& opt) {
  RunConfig rc;
  if (!opt.config_path.empty()) {
    rc = load_run_config(opt.config_path);
  }
  if (opt.mode) apply_mode(rc.scenario, *opt.mode);
  if (opt.no_hierarchy) rc.net.hierarchy = false;
  if (opt.no_intrinsic) rc.rewards.alpha = 0.0;
  if (opt.no_shaping) rc.rewards.shaping = false;
  rc.scenario.validate();
  rc.rewards.validate();
  rc.net.validate();
  rc.train.validate();
  return rc;
}

PolicyHandle make_policy(const std::string& spec, const RunConfig& rc) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  PolicyHandle h;
  h.label = name;
  if (name != "hrl4ag" && colon != std::string::npos) {
    throw ConfigError("--policy: '" + name + "' takes no checkpoint");
  }
  if (name == "greedy") {
    h.policy = std::make_unique<GreedyDistancePolicy>();
  } else if (name == "exact") {
    h.policy = std::make_unique<ExactPolicy>();
  } else if (name == "random") {
    h.policy = std::make_unique<RandomPolicy>();
  } else if (name == "hrl4ag") {
    if (colon == std::string::npos || colon + 1 == spec.size()) {
      throw ConfigError("--policy: hrl4ag needs a checkpoint, as hrl4ag:PATH");
    }
    const std::string path = spec.substr(colon + 1);
    if (!fs::exists(path)) throw FileError("checkpoint not found: " + path);
    h.params = std::make_shared<nn::PolicyParams>(rc.net, caps_for(rc.scenario), rc.init_seed);
    nn::load_checkpoint(*h.params, path);
    h.policy = std::make_unique<HierarchicalPolicy>(h.params->actor, h.params->caps,
                                                    rc.scenario.max_speed_kmh(), rc.scenario.energy);
  } else {
    throw ConfigError("--policy: unknown policy '" + name + "' (greedy, exact, random, hrl4ag:PATH)");
  }
  return h;
}

// All specs are resolved before any output is written.
std::vector<PolicyHandle> make_policies(const std::vector<std::string>& specs, const RunConfig& rc) {
  std::vector<PolicyHandle> out;
  for (const auto& spec : specs) out.push_back(make_policy(spec, rc));
  return out;
}

Summary summarize(const std::vector<SeedResult>& results) {
  Summary s;
  const auto n = static_cast<double>(results.size());
  if (results.empty()) return s;
  auto stat = [&](auto get, double& mean, double& sd) {
    double sum = 0.0;
    for (const auto& r : results) sum += get(r.metrics);
    mean = sum / n;
    double sq = 0.0;
    for (const auto& r : results) sq += (get(r.metrics) - mean) * (get(r.metrics) - mean);
    sd = results.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
  };
  stat([](const EpisodeMetrics& m) { return static_cast<double>(m.pn); }, s.pn_mean, s.pn_std);
  stat([](const EpisodeMetrics& m) { return static_cast<double>(m.dn); }, s.dn_mean, s.dn_std);
  stat([](const EpisodeMetrics& m) { return m.mean_et; }, s.et_mean, s.et_std);
  return s;
}

int cmd_generate(const Options& opt, std::ostream& log) {
  auto rc = resolve_config(opt);
  const auto out = prepare_dir(opt.out_dir);
  const auto seed = opt.seeds.empty() ? std::uint64_t{0} : opt.seeds.front();
  const auto scenario = load_scenario(rc.scenario);
  const auto world = make_world(scenario, seed);

  const auto nodes = fs::absolute(out / "nodes.csv").lexically_normal();
  const auto edges = fs::absolute(out / "edges.csv").lexically_normal();
  const auto stations = fs::absolute(out / "stations.csv").lexically_normal();
  const auto orders = fs::absolute(out / "orders.csv").lexically_normal();
  write_road_network(*scenario.net, nodes.string(), edges.string());
  write_stations(scenario.stations, stations.string());
  write_orders(world.orders, orders.string());

  // The echoed config points at the files just written, so it reproduces
  // this exact instance.
  rc.scenario.network.nodes_path = nodes.string();
  rc.scenario.network.edges_path = edges.string();
  rc.scenario.stations.path = stations.string();
  rc.scenario.orders.path = orders.string();
  echo_config(rc, out);
  log << "generated " << scenario.net->node_count() << " nodes, " << world.orders.size()
      << " orders, " << scenario.stations.size() << " stations in " << out.string() << "\n";
  return kOk;
}

int cmd_train(const Options& opt, std::ostream& log) {
  const auto rc = resolve_config(opt);
  const auto out = prepare_dir(opt.out_dir);
  const auto scenario = load_scenario(rc.scenario);
  const std::vector<std::uint64_t> seeds = opt.seeds.empty() ? std::vector<std::uint64_t>{0} : opt.seeds;
  echo_config(rc, out);
  for (const auto seed : seeds) {
    const auto dir = seeds.size() == 1 ? out : prepare_dir((out / ("seed_" + std::to_string(seed))).string());
    nn::PolicyParams params(rc.net, caps_for(rc.scenario), derive_seed(rc.init_seed, seed));
    auto curves = open_out(dir / "curves.jsonl");
    TrainOutputs to;
    to.curves = &curves;
    to.checkpoint_path = (dir / "checkpoint.bin").string();
    const auto result = train(params, rc.train, scenario, rc.rewards, seed, to);
    double dn = 0.0;
    const auto tail = std::min<std::size_t>(result.curves.size(), 10);
    for (std::size_t i = result.curves.size() - tail; i < result.curves.size(); ++i) {
      dn += result.curves[i].dn;
    }
    log << "seed " << seed << ": " << result.curves.size() << " episodes, " << result.updates
        << " updates";
    if (tail > 0) log << ", mean DN over last " << tail << " episodes " << format_double(dn / tail);
    log << ", checkpoint " << to.checkpoint_path << "\n";
  }
  return kOk;
}

int cmd_evaluate(const Options& opt, std::ostream& log) {
  const auto rc = resolve_config(opt);
  if (opt.policies.empty()) throw ConfigError("--policy: required for evaluate");
  auto handles = make_policies(opt.policies, rc);
  const auto out = prepare_dir(opt.out_dir);
  const auto scenario = std::make_shared<const Scenario>(load_scenario(rc.scenario));
  const auto seeds = eval_seeds(opt, rc);
  echo_config(rc, out);

  auto csv = open_out(out / "evaluate.csv");
  csv << "kind,policy,seed,pn,dn,dn_uav,dn_carrier,et_s,pn_std,dn_std,et_std\n";
  for (auto& h : handles) {
    const auto results = evaluate_policy(h, scenario, seeds, opt, out);
    double uav = 0, carrier = 0;
    for (const auto& r : results) {
      const auto& m = r.metrics;
      uav += m.dn_uav;
      carrier += m.dn_carrier;
      csv << "seed," << csv_label(h.label) << ',' << r.seed << ',' << m.pn << ',' << m.dn << ','
          << m.dn_uav << ',' << m.dn_carrier << ',' << format_double(m.mean_et) << ",,,\n";
    }
    const auto s = summarize(results);
    const auto n = static_cast<double>(std::max<std::size_t>(results.size(), 1));
    csv << "summary," << csv_label(h.label) << ",," << format_double(s.pn_mean) << ','
        << format_double(s.dn_mean) << ',' << format_double(uav / n) << ','
        << format_double(carrier / n) << ',' << format_double(s.et_mean) << ','
        << format_double(s.pn_std) << ',' << format_double(s.dn_std) << ','
        << format_double(s.et_std) << '\n';
    log << std::fixed << std::setprecision(2) << h.label << " over " << results.size()
        << " seeds: PN " << s.pn_mean << " +- " << s.pn_std << ", DN " << s.dn_mean << " +- "
        << s.dn_std << " (UAV " << uav / n << ", carrier " << carrier / n << "), ET "
        << std::setprecision(6) << s.et_mean << " s\n";
    log.unsetf(std::ios::floatfield);
  }
  return kOk;
}

int cmd_compare(const Options& opt, std::ostream& log) {
  const auto rc = resolve_config(opt);
  const auto policies = opt.policies.empty() ? rc.compare_policies : opt.policies;
  if (policies.empty()) throw ConfigError("--policy: no policies to compare");
  auto handles = make_policies(policies, rc);
  const auto out = prepare_dir(opt.out_dir);
  const auto scenario = std::make_shared<const Scenario>(load_scenario(rc.scenario));
  const auto seeds = eval_seeds(opt, rc);
  echo_config(rc, out);

  auto csv = open_out(out / "compare.csv");
  csv << "policy,pn_mean,pn_std,dn_mean,dn_std,et_mean,et_std\n";
  log << std::left << std::setw(12) << "policy" << std::setw(18) << "PN" << std::setw(18) << "DN"
      << "ET (s)\n";
  for (auto& h : handles) {
    const auto s = summarize(evaluate_policy(h, scenario, seeds, opt, out));
    csv << csv_label(h.label) << ',' << format_double(s.pn_mean) << ',' << format_double(s.pn_std)
        << ',' << format_double(s.dn_mean) << ',' << format_double(s.dn_std) << ','
        << format_double(s.et_mean) << ',' << format_double(s.et_std) << '\n';
    std::ostringstream pn, dn, et;
    pn << std::fixed << std::setprecision(2) << s.pn_mean << " +- " << s.pn_std;
    dn << std::fixed << std::setprecision(2) << s.dn_mean << " +- " << s.dn_std;
    et << std::scientific << std::setprecision(3) << s.et_mean << " +- " << s.et_std;
    log << std::setw(12) << h.label << std::setw(18) << pn.str() << std::setw(18) << dn.str()
        << et.str() << "\n";
  }
  return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cooperative UAV and ground-carrier dispatch: simulation, training, evaluation"};
  app.require_subcommand(1);
  Options opt;
  std::string mode;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "Config file (defaults apply when omitted)");
    sub->add_option("--seed", opt.seeds, "Seed or comma-separated seeds")->delimiter(',');
    sub->add_option("--out", opt.out_dir, "Output directory");
    sub->add_option("--mode", mode, "mixed | uav_only | carrier_only");
    sub->add_flag("--no-hierarchy", opt.no_hierarchy, "Flat scorer without manager goals");
    sub->add_flag("--no-intrinsic", opt.no_intrinsic, "Drop the intrinsic reward (alpha = 0)");
    sub->add_flag("--no-shaping", opt.no_shaping, "Extrinsic reward is lambda_d * deliveries only");
    sub->add_flag("--no-timing", opt.no_timing, "Record ET as 0 for byte-stable outputs");
    sub->add_flag("--no-trace", opt.no_trace, "Skip per-episode JSONL traces");
  };
  auto* gen = app.add_subcommand("generate", "Write a seeded scenario instance as CSV files");
  auto* trn = app.add_subcommand("train", "Train the hierarchical policy");
  auto* evl = app.add_subcommand("evaluate", "Run policies over seeds and report metrics");
  auto* cmp = app.add_subcommand("compare", "Side-by-side PN / DN / ET table");
  for (auto* s : {gen, trn, evl, cmp}) common(s);
  for (auto* s : {evl, cmp}) {
    s->add_option("--policy", opt.policies, "greedy | exact | random | hrl4ag:CHECKPOINT")
        ->delimiter(',');
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (!mode.empty()) opt.mode = parse_fleet_mode(mode);
    if (gen->parsed()) return cmd_generate(opt, out);
    if (trn->parsed()) return cmd_train(opt, out);
    if (evl->parsed()) return cmd_evaluate(opt, out);
    return cmd_compare(opt, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace airground::cli
