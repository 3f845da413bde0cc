#include "airground/config.hpp"

#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "airground/errors.hpp"

namespace airground {

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
  throw ConfigError("line " + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_bare_key(std::string_view s) {
  if (s.empty()) return false;
  for (const char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  }
  return true;
}

/// Cursor over one value's text.
struct ValueParser {
  std::string_view s;
  std::size_t pos = 0;
  int line = 0;

  void skip_ws() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }

  ConfigValue parse() {
    skip_ws();
    if (pos >= s.size()) fail(line, "missing value");
    const char c = s[pos];
    if (c == '"') return {parse_string(), line};
    if (c == '[') return {parse_array(), line};
    return parse_scalar();
  }

  std::string parse_string() {
    ++pos;
    std::string out;
    while (pos < s.size() && s[pos] != '"') {
      char c = s[pos++];
      if (c == '\\') {
        if (pos >= s.size()) fail(line, "unterminated escape");
        const char e = s[pos++];
        switch (e) {
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          default: fail(line, std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos >= s.size()) fail(line, "unterminated string");
    ++pos;
    return out;
  }

  ConfigValue::Array parse_array() {
    ++pos;
    ConfigValue::Array out;
    skip_ws();
    if (pos < s.size() && s[pos] == ']') {
      ++pos;
      return out;
    }
    while (true) {
      out.push_back(parse());
      skip_ws();
      if (pos >= s.size()) fail(line, "unterminated array");
      if (s[pos] == ',') {
        ++pos;
        skip_ws();
        if (pos < s.size() && s[pos] == ']') {
          ++pos;
          return out;
        }
        continue;
      }
      if (s[pos] == ']') {
        ++pos;
        return out;
      }
      fail(line, "expected ',' or ']' in array");
    }
  }

  ConfigValue parse_scalar() {
    std::size_t end = pos;
    while (end < s.size() && s[end] != ',' && s[end] != ']' &&
           !std::isspace(static_cast<unsigned char>(s[end]))) {
      ++end;
    }
    const auto tok = s.substr(pos, end - pos);
    pos = end;
    if (tok == "true") return {true, line};
    if (tok == "false") return {false, line};
    std::string clean;
    for (const char c : tok) {
      if (c != '_') clean.push_back(c);
    }
    const bool floaty = clean.find_first_of(".eE") != std::string::npos || clean == "inf" ||
                        clean == "+inf" || clean == "-inf" || clean == "nan";
    const char* b = clean.data();
    const char* e = clean.data() + clean.size();
    if (!clean.empty() && *b == '+') ++b;
    if (!floaty) {
      std::int64_t v = 0;
      const auto r = std::from_chars(b, e, v);
      if (r.ec == std::errc() && r.ptr == e) return {v, line};
    } else {
      double v = 0.0;
      const auto r = std::from_chars(b, e, v);
      if (r.ec == std::errc() && r.ptr == e) return {v, line};
    }
    fail(line, "cannot parse value '" + std::string(tok) + "'");
  }
};

std::string strip_comment(std::string_view line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '\\' && in_str) {
      ++i;
    } else if (c == '"') {
      in_str = !in_str;
    } else if (c == '#' && !in_str) {
      return std::string(line.substr(0, i));
    }
  }
  return std::string(line);
}

}  // namespace

ConfigDocument ConfigDocument::parse(std::string_view text) {
  ConfigDocument doc;
  std::string table;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string stripped = strip_comment(raw);
    const auto line = trim(stripped);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) fail(line_no, "malformed table header");
      const auto name = trim(line.substr(1, line.size() - 2));
      std::string_view rest = name;
      while (true) {
        const auto dot = rest.find('.');
        if (!is_bare_key(trim(rest.substr(0, dot)))) fail(line_no, "malformed table name");
        if (dot == std::string_view::npos) break;
        rest = rest.substr(dot + 1);
      }
      table = std::string(name);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    if (!is_bare_key(key)) fail(line_no, "malformed key '" + std::string(key) + "'");
    ValueParser p{line.substr(eq + 1), 0, line_no};
    ConfigValue v = p.parse();
    p.skip_ws();
    if (p.pos != p.s.size()) fail(line_no, "trailing characters after value");
    const std::string full = table.empty() ? std::string(key) : table + "." + std::string(key);
    if (doc.values_.count(full)) fail(line_no, "duplicate key '" + full + "'");
    doc.values_.emplace(full, std::move(v));
  }
  return doc;
}

const ConfigValue* ConfigDocument::find(const std::string& key) const {
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::vector<std::string> ConfigDocument::unused() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (!used_.count(k)) out.push_back(k);
  }
  return out;
}

// ---- Reading --------------------------------------------------------------

namespace {

class Reader {
 public:
  Reader(const ConfigDocument& doc, std::string base) : doc_(doc), base_(std::move(base)) {}

  void get(const std::string& key, bool& out) const {
    if (const auto* v = take(key)) out = as<bool>(key, *v, "a boolean");
  }

  void get(const std::string& key, int& out) const {
    if (const auto* v = take(key)) {
      const auto x = as<std::int64_t>(key, *v, "an integer");
      if (x < INT32_MIN || x > INT32_MAX) bad(key, "is out of range");
      out = static_cast<int>(x);
    }
  }

  void get(const std::string& key, std::uint64_t& out) const {
    if (const auto* v = take(key)) {
      const auto x = as<std::int64_t>(key, *v, "an integer");
      if (x < 0) bad(key, "must be >= 0");
      out = static_cast<std::uint64_t>(x);
    }
  }

  void get(const std::string& key, double& out) const {
    if (const auto* v = take(key)) out = number(key, *v);
  }

  void get(const std::string& key, std::string& out) const {
    if (const auto* v = take(key)) out = as<std::string>(key, *v, "a string");
  }

  void path(const std::string& key, std::string& out) const {
    std::string p;
    get(key, p);
    if (p.empty()) return;
    std::filesystem::path fp(p);
    if (fp.is_relative() && !base_.empty()) fp = std::filesystem::path(base_) / fp;
    out = fp.lexically_normal().string();
  }

  void get(const std::string& key, std::vector<std::uint64_t>& out) const {
    if (const auto* v = take(key)) {
      const auto& arr = as<ConfigValue::Array>(key, *v, "an array of integers");
      out.clear();
      for (const auto& e : arr) {
        const auto x = as<std::int64_t>(key, e, "an array of integers");
        if (x < 0) bad(key, "entries must be >= 0");
        out.push_back(static_cast<std::uint64_t>(x));
      }
    }
  }

  void get(const std::string& key, std::vector<std::string>& out) const {
    if (const auto* v = take(key)) {
      const auto& arr = as<ConfigValue::Array>(key, *v, "an array of strings");
      out.clear();
      for (const auto& e : arr) out.push_back(as<std::string>(key, e, "an array of strings"));
    }
  }

  const ConfigValue* take(const std::string& key) const {
    const auto* v = doc_.find(key);
    if (v) doc_.mark(key);
    return v;
  }

  [[noreturn]] static void bad(const std::string& key, const std::string& what) {
    throw ConfigError(key + ": " + what);
  }

 private:
  template <typename T>
  static const T& as(const std::string& key, const ConfigValue& v, const char* what) {
    const auto* p = std::get_if<T>(&v.v);
    if (!p) bad(key, std::string("expected ") + what + " (line " + std::to_string(v.line) + ")");
    return *p;
  }

  static double number(const std::string& key, const ConfigValue& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v.v)) return static_cast<double>(*i);
    return as<double>(key, v, "a number");
  }

  const ConfigDocument& doc_;
  std::string base_;
};

}  // namespace

RunConfig read_run_config(const ConfigDocument& doc, const std::string& base_dir) {
  RunConfig rc;
  const Reader r(doc, base_dir);
  auto& sc = rc.scenario;

  r.get("scenario.t_max", sc.t_max);
  r.get("scenario.n_max", sc.n_max);
  std::string mode = std::string(to_string(sc.mode));
  r.get("scenario.mode", mode);
  sc.mode = parse_fleet_mode(mode);

  r.path("network.nodes", sc.network.nodes_path);
  r.path("network.edges", sc.network.edges_path);
  auto& g = sc.network.grid;
  r.get("network.grid.rows", g.rows);
  r.get("network.grid.cols", g.cols);
  r.get("network.grid.spacing_km", g.spacing_km);
  r.get("network.grid.tortuosity_max", g.tortuosity_max);
  r.get("network.grid.seed", g.seed);

  auto& og = sc.orders.generator;
  r.path("orders.path", sc.orders.path);
  r.get("orders.arrival_rate", og.arrival_rate);
  r.get("orders.demand_ratio", og.demand_ratio);
  if (doc.has("orders.count")) {
    int count = 0;
    r.get("orders.count", count);
    og.count = count;
  }
  r.get("orders.deadline_min", og.deadline_min);
  r.get("orders.deadline_max", og.deadline_max);
  r.get("orders.distinct_endpoints", og.distinct_endpoints);

  r.path("stations.path", sc.stations.path);
  r.get("stations.grid_rows", sc.stations.grid_rows);
  r.get("stations.grid_cols", sc.stations.grid_cols);

  r.get("fleet.n_uav", sc.fleet.n_uav);
  r.get("fleet.n_carrier", sc.fleet.n_carrier);
  r.get("fleet.uav_speed_kmh", sc.fleet.uav_speed_kmh);
  r.get("fleet.carrier_speed_kmh", sc.fleet.carrier_speed_kmh);
  r.get("fleet.uav_capacity_kwh", sc.fleet.uav_capacity_kwh);

  r.get("energy.eta_kwh_per_km", sc.energy.eta_kwh_per_km);
  r.get("energy.charge_threshold", sc.energy.charge_threshold);
  r.get("energy.recharge_rate", sc.energy.recharge_rate);

  auto& w = rc.rewards;
  r.get("rewards.lambda_m", w.lambda_m);
  r.get("rewards.lambda_p", w.lambda_p);
  r.get("rewards.lambda_d", w.lambda_d);
  r.get("rewards.lambda_t", w.lambda_t);
  r.get("rewards.lambda_r", w.lambda_r);
  r.get("rewards.alpha", w.alpha);
  r.get("rewards.gamma", w.gamma);
  r.get("rewards.shaping", w.shaping);
  r.get("rewards.normalize_intrinsic", w.normalize_intrinsic);

  auto& n = rc.net;
  r.get("model.hidden", n.hidden);
  r.get("model.heads", n.heads);
  r.get("model.hierarchy", n.hierarchy);
  r.get("model.strict_goal_mask", n.strict_goal_mask);
  r.get("model.critic_pair_features", n.critic_pair_features);
  r.get("model.critic_hidden", n.critic_hidden);
  r.get("model.init_seed", rc.init_seed);

  auto& t = rc.train;
  r.get("training.batch_size", t.batch_size);
  r.get("training.lr_actor", t.lr_actor);
  r.get("training.lr_critic", t.lr_critic);
  r.get("training.tau", t.tau);
  r.get("training.buffer_capacity", t.buffer_capacity);
  r.get("training.episodes", t.episodes);
  r.get("training.warmup", t.warmup);
  r.get("training.update_every", t.update_every);
  r.get("training.noise_start", t.noise_start);
  r.get("training.noise_end", t.noise_end);
  r.get("training.noise_decay_episodes", t.noise_decay_episodes);
  std::string opt = t.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
  r.get("training.optimizer", opt);
  if (opt == "sgd") {
    t.optimizer = OptimizerKind::Sgd;
  } else if (opt == "adam") {
    t.optimizer = OptimizerKind::Adam;
  } else {
    Reader::bad("training.optimizer", "expected \"sgd\" or \"adam\"");
  }
  r.get("training.grad_clip", t.grad_clip);
  r.get("training.reward_scale", t.reward_scale);
  r.get("training.preact_decay", t.preact_decay);
  r.get("training.checkpoint_every", t.checkpoint_every);

  r.get("evaluation.seeds", rc.eval_seeds);
  r.get("evaluation.policies", rc.compare_policies);

  const auto unknown = doc.unused();
  if (!unknown.empty()) throw ConfigError(unknown.front() + ": unknown key");

  sc.validate();
  rc.rewards.validate();
  rc.net.validate();
  rc.train.validate();
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    const auto doc = ConfigDocument::parse(ss.str());
    return read_run_config(doc, std::filesystem::path(path).parent_path().string());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// ---- Rendering ------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, r.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    if (c == '\t') {
      out += "\\t";
      continue;
    }
    out.push_back(c);
  }
  return out + "\"";
}

std::string b(bool v) { return v ? "true" : "false"; }

}  // namespace

std::string render_run_config(const RunConfig& rc) {
  const auto& sc = rc.scenario;
  std::ostringstream o;
  o << "[scenario]\n"
    << "t_max = " << sc.t_max << "\n"
    << "n_max = " << sc.n_max << "\n"
    << "mode = " << quote(std::string(to_string(sc.mode))) << "\n\n";

  o << "[network]\n";
  if (sc.network.from_files()) {
    o << "nodes = " << quote(sc.network.nodes_path) << "\n"
      << "edges = " << quote(sc.network.edges_path) << "\n";
  }
  const auto& g = sc.network.grid;
  o << "\n[network.grid]\n"
    << "rows = " << g.rows << "\n"
    << "cols = " << g.cols << "\n"
    << "spacing_km = " << fmt(g.spacing_km) << "\n"
    << "tortuosity_max = " << fmt(g.tortuosity_max) << "\n"
    << "seed = " << g.seed << "\n\n";

  const auto& og = sc.orders.generator;
  o << "[orders]\n";
  if (sc.orders.from_file()) o << "path = " << quote(sc.orders.path) << "\n";
  o << "arrival_rate = " << fmt(og.arrival_rate) << "\n"
    << "demand_ratio = " << fmt(og.demand_ratio) << "\n";
  if (og.count) o << "count = " << *og.count << "\n";
  o << "deadline_min = " << og.deadline_min << "\n"
    << "deadline_max = " << og.deadline_max << "\n"
    << "distinct_endpoints = " << b(og.distinct_endpoints) << "\n\n";

  o << "[stations]\n";
  if (sc.stations.from_file()) o << "path = " << quote(sc.stations.path) << "\n";
  o << "grid_rows = " << sc.stations.grid_rows << "\n"
    << "grid_cols = " << sc.stations.grid_cols << "\n\n";

  o << "[fleet]\n"
    << "n_uav = " << sc.fleet.n_uav << "\n"
    << "n_carrier = " << sc.fleet.n_carrier << "\n"
    << "uav_speed_kmh = " << fmt(sc.fleet.uav_speed_kmh) << "\n"
    << "carrier_speed_kmh = " << fmt(sc.fleet.carrier_speed_kmh) << "\n"
    << "uav_capacity_kwh = " << fmt(sc.fleet.uav_capacity_kwh) << "\n\n";

  o << "[energy]\n"
    << "eta_kwh_per_km = " << fmt(sc.energy.eta_kwh_per_km) << "\n"
    << "charge_threshold = " << fmt(sc.energy.charge_threshold) << "\n"
    << "recharge_rate = " << fmt(sc.energy.recharge_rate) << "\n\n";

  const auto& w = rc.rewards;
  o << "[rewards]\n"
    << "lambda_m = " << fmt(w.lambda_m) << "\n"
    << "lambda_p = " << fmt(w.lambda_p) << "\n"
    << "lambda_d = " << fmt(w.lambda_d) << "\n"
    << "lambda_t = " << fmt(w.lambda_t) << "\n"
    << "lambda_r = " << fmt(w.lambda_r) << "\n"
    << "alpha = " << fmt(w.alpha) << "\n"
    << "gamma = " << fmt(w.gamma) << "\n"
    << "shaping = " << b(w.shaping) << "\n"
    << "normalize_intrinsic = " << b(w.normalize_intrinsic) << "\n\n";

  const auto& n = rc.net;
  o << "[model]\n"
    << "hidden = " << n.hidden << "\n"
    << "heads = " << n.heads << "\n"
    << "hierarchy = " << b(n.hierarchy) << "\n"
    << "strict_goal_mask = " << b(n.strict_goal_mask) << "\n"
    << "critic_pair_features = " << b(n.critic_pair_features) << "\n"
    << "critic_hidden = " << n.critic_hidden << "\n"
    << "init_seed = " << rc.init_seed << "\n\n";

  const auto& t = rc.train;
  o << "[training]\n"
    << "batch_size = " << t.batch_size << "\n"
    << "lr_actor = " << fmt(t.lr_actor) << "\n"
    << "lr_critic = " << fmt(t.lr_critic) << "\n"
    << "tau = " << fmt(t.tau) << "\n"
    << "buffer_capacity = " << t.buffer_capacity << "\n"
    << "episodes = " << t.episodes << "\n"
    << "warmup = " << t.warmup << "\n"
    << "update_every = " << t.update_every << "\n"
    << "noise_start = " << fmt(t.noise_start) << "\n"
    << "noise_end = " << fmt(t.noise_end) << "\n"
    << "noise_decay_episodes = " << t.noise_decay_episodes << "\n"
    << "optimizer = " << quote(t.optimizer == OptimizerKind::Adam ? "adam" : "sgd") << "\n"
    << "grad_clip = " << fmt(t.grad_clip) << "\n"
    << "reward_scale = " << fmt(t.reward_scale) << "\n"
    << "preact_decay = " << fmt(t.preact_decay) << "\n"
    << "checkpoint_every = " << t.checkpoint_every << "\n\n";

  o << "[evaluation]\nseeds = [";
  for (std::size_t i = 0; i < rc.eval_seeds.size(); ++i) o << (i ? ", " : "") << rc.eval_seeds[i];
  o << "]\npolicies = [";
  for (std::size_t i = 0; i < rc.compare_policies.size(); ++i) {
    o << (i ? ", " : "") << quote(rc.compare_policies[i]);
  }
  o << "]\n";
  return o.str();
}

}  // namespace airground
