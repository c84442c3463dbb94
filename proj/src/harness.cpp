#include "polopt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <toml.hpp>

#include "polopt/parallel.hpp"
#include "polopt/pda.hpp"
#include "polopt/pmd.hpp"

namespace polopt {

using json = nlohmann::json;

namespace {

const std::set<std::string> kAlgorithms = {"pmd-exact", "pmd-fa", "pda-exact", "pda-fa", "policy-iteration",
                                           "value-iteration"};
const std::set<std::string> kEnvKinds = {"random-tabular", "tabular-json", "gridworld", "lqr", "pendulum"};
const std::set<std::string> kGeometries = {"entropy", "euclidean", "tsallis"};
const std::set<std::string> kRegularizers = {"none", "kl", "quadratic", "entropy-bonus"};
const std::set<std::string> kPmdSchedules = {"geometric", "constant", "nonconvex", "sqrt-horizon", "inverse-t",
                                             "inverse-t-weighted", "continuous-nonconvex"};
const std::set<std::string> kPdaSchedules = {"geometric", "linear-const", "linear-poly", "nonconvex"};
const std::set<std::string> kWeightings = {"auto", "stationary", "uniform", "reset"};

std::string join(const std::set<std::string>& s) {
  std::string out;
  for (const auto& x : s) out += (out.empty() ? "" : ", ") + x;
  return out;
}

// Reads typed fields out of a JSON tree, collecting problems instead of
// stopping at the first one.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  void keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) {
      errors_.push_back(path + ": expected a table");
      return;
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || it.key() == a;
      if (!ok) errors_.push_back(prefix(path) + it.key() + ": unknown key");
    }
  }

  template <class T>
  void get(const json& obj, const std::string& path, const char* key, T& out) {
    if (!obj.is_object() || !obj.contains(key)) return;
    const json& v = obj.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("bool");
        out = v.get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.get<long long>() < 0) throw std::invalid_argument("nonnegative integer");
        }
        out = v.get<T>();
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("number");
        out = v.get<T>();
      } else {
        if (!v.is_string()) throw std::invalid_argument("string");
        out = v.get<std::string>();
      }
    } catch (const std::exception& e) {
      errors_.push_back(prefix(path) + key + ": expected " + e.what());
    }
  }

  void one_of(const std::string& value, const std::string& path, const std::set<std::string>& allowed) {
    if (!allowed.count(value)) errors_.push_back(path + ": '" + value + "' is not one of {" + join(allowed) + "}");
  }

 private:
  static std::string prefix(const std::string& path) { return path.empty() ? "" : path + "."; }
  std::vector<std::string>& errors_;
};

}  // namespace

RunConfig parse_config(const json& doc) {
  std::vector<std::string> err;
  Reader rd(err);
  RunConfig c;
  rd.keys(doc, "", {"algorithm", "environment", "geometry", "regularizer", "schedule", "eval", "scoring",
                    "exploration", "k_max", "eval_every", "n_probes", "seeds", "output", "grid"});
  rd.get(doc, "", "algorithm", c.algorithm);
  rd.get(doc, "", "exploration", c.exploration);
  rd.get(doc, "", "k_max", c.k_max);
  rd.get(doc, "", "eval_every", c.eval_every);
  rd.get(doc, "", "n_probes", c.n_probes);
  rd.get(doc, "", "output", c.output);
  if (doc.contains("seeds")) {
    const json& s = doc.at("seeds");
    if (s.is_string()) {
      try {
        c.seeds = parse_seeds(s.get<std::string>());
      } catch (const std::exception& e) {
        err.push_back(std::string("seeds: ") + e.what());
      }
    } else if (s.is_array()) {
      c.seeds.clear();
      for (const auto& x : s) {
        if (!x.is_number_integer() || x.get<long long>() < 0) {
          err.push_back("seeds: entries must be nonnegative integers");
          break;
        }
        c.seeds.push_back(x.get<std::uint64_t>());
      }
    } else {
      err.push_back("seeds: expected a list or a range string");
    }
  }
  if (doc.contains("grid")) {
    if (doc.at("grid").is_object()) c.grid = doc.at("grid");
    else err.push_back("grid: expected a table");
  }

  if (doc.contains("environment")) {
    const json& e = doc.at("environment");
    EnvConfig& ec = c.environment;
    rd.keys(e, "environment",
            {"kind", "gamma", "n_states", "n_actions", "sparsity", "seed", "path", "width", "height", "n_traps",
             "step_cost", "trap_cost", "episode_cap", "position_weight", "cost_cap", "action_bound", "torque_limit", "init_noise",
             "fall_cost", "step_cap", "dt"});
    rd.get(e, "environment", "kind", ec.kind);
    rd.get(e, "environment", "gamma", ec.gamma);
    rd.get(e, "environment", "n_states", ec.n_states);
    rd.get(e, "environment", "n_actions", ec.n_actions);
    rd.get(e, "environment", "sparsity", ec.sparsity);
    if (e.is_object() && e.contains("seed")) {
      std::uint64_t s = 0;
      rd.get(e, "environment", "seed", s);
      ec.seed = s;
    }
    rd.get(e, "environment", "path", ec.path);
    rd.get(e, "environment", "width", ec.grid.width);
    rd.get(e, "environment", "height", ec.grid.height);
    rd.get(e, "environment", "n_traps", ec.grid.n_traps);
    rd.get(e, "environment", "step_cost", ec.grid.step_cost);
    rd.get(e, "environment", "trap_cost", ec.grid.trap_cost);
    rd.get(e, "environment", "episode_cap", ec.grid.episode_cap);
    rd.get(e, "environment", "position_weight", ec.grid.position_weight);
    rd.get(e, "environment", "cost_cap", ec.lqr_cost_cap);
    rd.get(e, "environment", "action_bound", ec.lqr_action_bound);
    rd.get(e, "environment", "torque_limit", ec.pendulum.torque_limit);
    rd.get(e, "environment", "init_noise", ec.pendulum.init_noise);
    rd.get(e, "environment", "fall_cost", ec.pendulum.fall_cost);
    rd.get(e, "environment", "step_cap", ec.pendulum.step_cap);
    rd.get(e, "environment", "dt", ec.pendulum.dt);
  }
  if (doc.contains("geometry")) {
    const json& g = doc.at("geometry");
    if (g.is_string()) {
      c.geometry.kind = g.get<std::string>();
    } else {
      rd.keys(g, "geometry", {"kind", "q"});
      rd.get(g, "geometry", "kind", c.geometry.kind);
      rd.get(g, "geometry", "q", c.geometry.q);
    }
  }
  if (doc.contains("regularizer")) {
    const json& r = doc.at("regularizer");
    rd.keys(r, "regularizer", {"kind", "weight"});
    rd.get(r, "regularizer", "kind", c.regularizer.kind);
    rd.get(r, "regularizer", "weight", c.regularizer.weight);
  }
  if (doc.contains("schedule")) {
    const json& s = doc.at("schedule");
    ScheduleConfig& sc = c.schedule;
    rd.keys(s, "schedule", {"kind", "eta", "lambda", "mu_Q", "D0", "sigma2", "M_h"});
    rd.get(s, "schedule", "kind", sc.kind);
    rd.get(s, "schedule", "eta", sc.eta);
    rd.get(s, "schedule", "lambda", sc.lambda);
    rd.get(s, "schedule", "mu_Q", sc.mu_Q);
    rd.get(s, "schedule", "D0", sc.D0);
    rd.get(s, "schedule", "sigma2", sc.sigma2);
    rd.get(s, "schedule", "M_h", sc.M_h);
  }
  if (doc.contains("eval")) {
    const json& e = doc.at("eval");
    EvalConfig& ev = c.eval;
    rd.keys(e, "eval", {"targets", "n_samples", "burn_in", "truncation", "ridge_lambda", "error_refits", "features",
                        "n_anchors", "n_frequencies", "bandwidth", "action_scale", "anchors"});
    std::string targets = "sampled", features = "kernel";
    rd.get(e, "eval", "targets", targets);
    rd.one_of(targets, "eval.targets", {"sampled", "exact"});
    ev.targets = targets == "exact" ? EvalConfig::Targets::Exact : EvalConfig::Targets::Sampled;
    rd.get(e, "eval", "features", features);
    rd.one_of(features, "eval.features", {"kernel", "tabular"});
    ev.features.kind = features == "tabular" ? FeatureSpec::Kind::Tabular : FeatureSpec::Kind::Kernel;
    rd.get(e, "eval", "n_samples", ev.sampling.n_samples);
    rd.get(e, "eval", "burn_in", ev.sampling.burn_in);
    rd.get(e, "eval", "truncation", ev.sampling.truncation);
    rd.get(e, "eval", "ridge_lambda", ev.ridge_lambda);
    rd.get(e, "eval", "error_refits", ev.error_refits);
    std::string anchors = "data";
    rd.get(e, "eval", "anchors", anchors);
    rd.one_of(anchors, "eval.anchors", {"data", "reset"});
    ev.features.anchors = anchors == "reset" ? FeatureSpec::Anchors::Reset : FeatureSpec::Anchors::Data;
    rd.get(e, "eval", "n_anchors", ev.features.n_anchors);
    rd.get(e, "eval", "n_frequencies", ev.features.n_frequencies);
    rd.get(e, "eval", "bandwidth", ev.features.bandwidth);
    rd.get(e, "eval", "action_scale", ev.features.action_scale);
  }
  if (doc.contains("scoring")) {
    const json& s = doc.at("scoring");
    rd.keys(s, "scoring", {"weighting", "oracle", "mc_episodes", "mc_horizon"});
    rd.get(s, "scoring", "weighting", c.scoring.weighting);
    rd.get(s, "scoring", "oracle", c.scoring.oracle);
    rd.get(s, "scoring", "mc_episodes", c.scoring.mc_episodes);
    rd.get(s, "scoring", "mc_horizon", c.scoring.mc_horizon);
  }
  if (!err.empty()) throw ConfigError(err);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file " + path});
  std::stringstream buf;
  buf << in.rdbuf();
  json doc;
  const bool is_toml = std::filesystem::path(path).extension() == ".toml";
  try {
    if (is_toml) {
      toml::table tbl = toml::parse(buf.str(), path);
      std::stringstream js;
      js << toml::json_formatter{tbl};
      doc = json::parse(js.str());
    } else {
      doc = json::parse(buf.str());
    }
  } catch (const std::exception& e) {
    throw ConfigError({std::string("cannot parse ") + path + ": " + e.what()});
  }
  return parse_config(doc);
}

json config_to_json(const RunConfig& c) {
  json j;
  j["algorithm"] = c.algorithm;
  j["k_max"] = c.k_max;
  j["eval_every"] = c.eval_every;
  j["n_probes"] = c.n_probes;
  j["exploration"] = c.exploration;
  j["seeds"] = c.seeds;
  j["output"] = c.output;
  const EnvConfig& e = c.environment;
  json env = {{"kind", e.kind}, {"gamma", e.gamma}};
  if (e.seed) env["seed"] = *e.seed;
  if (e.kind == "random-tabular") {
    env["n_states"] = e.n_states;
    env["n_actions"] = e.n_actions;
    env["sparsity"] = e.sparsity;
  } else if (e.kind == "tabular-json") {
    env["path"] = e.path;
  } else if (e.kind == "gridworld") {
    env["width"] = e.grid.width;
    env["height"] = e.grid.height;
    env["n_traps"] = e.grid.n_traps;
    env["step_cost"] = e.grid.step_cost;
    env["trap_cost"] = e.grid.trap_cost;
    env["episode_cap"] = e.grid.episode_cap;
    env["position_weight"] = e.grid.position_weight;
  } else if (e.kind == "lqr") {
    env["cost_cap"] = e.lqr_cost_cap;
    env["action_bound"] = e.lqr_action_bound;
  } else if (e.kind == "pendulum") {
    env["torque_limit"] = e.pendulum.torque_limit;
    env["init_noise"] = e.pendulum.init_noise;
    env["fall_cost"] = e.pendulum.fall_cost;
    env["step_cap"] = e.pendulum.step_cap;
    env["dt"] = e.pendulum.dt;
  }
  j["environment"] = env;
  j["geometry"] = {{"kind", c.geometry.kind}, {"q", c.geometry.q}};
  j["regularizer"] = {{"kind", c.regularizer.kind}, {"weight", c.regularizer.weight}};
  const ScheduleConfig& s = c.schedule;
  j["schedule"] = {{"kind", s.kind}, {"eta", s.eta},       {"lambda", s.lambda}, {"mu_Q", s.mu_Q},
                   {"D0", s.D0},     {"sigma2", s.sigma2}, {"M_h", s.M_h}};
  const EvalConfig& ev = c.eval;
  j["eval"] = {{"targets", ev.targets == EvalConfig::Targets::Exact ? "exact" : "sampled"},
               {"n_samples", ev.sampling.n_samples},
               {"burn_in", ev.sampling.burn_in},
               {"truncation", ev.sampling.truncation},
               {"ridge_lambda", ev.ridge_lambda},
               {"error_refits", ev.error_refits},
               {"features", ev.features.kind == FeatureSpec::Kind::Tabular ? "tabular" : "kernel"},
               {"n_anchors", ev.features.n_anchors},
               {"n_frequencies", ev.features.n_frequencies},
               {"bandwidth", ev.features.bandwidth},
               {"action_scale", ev.features.action_scale},
               {"anchors", ev.features.anchors == FeatureSpec::Anchors::Reset ? "reset" : "data"}};
  j["scoring"] = {{"weighting", c.scoring.weighting},
                  {"oracle", c.scoring.oracle},
                  {"mc_episodes", c.scoring.mc_episodes},
                  {"mc_horizon", c.scoring.mc_horizon}};
  if (!c.grid.empty()) j["grid"] = c.grid;
  return j;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  auto num = [&](const std::string& s) {
    std::size_t pos = 0;
    unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size() || s.empty() || s[0] == '-') throw InvalidInput("bad seed '" + s + "'");
    return static_cast<std::uint64_t>(v);
  };
  try {
    auto dots = text.find("..");
    if (dots != std::string::npos) {
      std::uint64_t a = num(text.substr(0, dots)), b = num(text.substr(dots + 2));
      if (b < a) throw InvalidInput("seed range '" + text + "' is empty");
      for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
    } else {
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(num(item));
    }
  } catch (const std::logic_error&) {
    throw InvalidInput("cannot parse seeds '" + text + "'");
  }
  if (out.empty()) throw InvalidInput("no seeds given");
  return out;
}

// ---------------------------------------------------------------- instances

namespace {

bool is_continuous(const EnvConfig& e) { return e.kind == "lqr" || e.kind == "pendulum"; }
bool is_pmd(const std::string& a) { return a.rfind("pmd", 0) == 0; }
bool is_exact_alg(const std::string& a) {
  return a == "pmd-exact" || a == "pda-exact" || a == "policy-iteration" || a == "value-iteration";
}

}  // namespace

void validate(const RunConfig& c) {
  std::vector<std::string> err;
  Reader rd(err);
  rd.one_of(c.algorithm, "algorithm", kAlgorithms);
  rd.one_of(c.environment.kind, "environment.kind", kEnvKinds);
  rd.one_of(c.geometry.kind, "geometry.kind", kGeometries);
  rd.one_of(c.regularizer.kind, "regularizer.kind", kRegularizers);
  rd.one_of(c.scoring.weighting, "scoring.weighting", kWeightings);
  if (kAlgorithms.count(c.algorithm) && c.algorithm != "policy-iteration" && c.algorithm != "value-iteration")
    rd.one_of(c.schedule.kind, "schedule.kind", is_pmd(c.algorithm) ? kPmdSchedules : kPdaSchedules);
  const EnvConfig& e = c.environment;
  if (!(e.gamma > 0 && e.gamma < 1)) err.push_back("environment.gamma must lie in (0, 1)");
  if (e.kind == "random-tabular") {
    if (e.n_states < 1) err.push_back("environment.n_states must be positive");
    if (e.n_actions < 2) err.push_back("environment.n_actions must be at least 2");
    if (e.sparsity < 0 || e.sparsity >= 1) err.push_back("environment.sparsity must lie in [0, 1)");
  }
  if (e.kind == "tabular-json" && e.path.empty()) err.push_back("environment.path is required for tabular-json");
  if (e.kind == "gridworld") {
    if (e.grid.width < 2 || e.grid.height < 2) err.push_back("gridworld needs width and height of at least 2");
    if (e.grid.n_traps < 0 || e.grid.n_traps > e.grid.width * e.grid.height - 2)
      err.push_back("gridworld n_traps must leave at least two free cells");
  }
  if (is_continuous(e)) {
    if (c.geometry.kind != "euclidean")
      err.push_back("geometry '" + c.geometry.kind + "' needs a simplex action set; " + e.kind +
                    " has box actions (use euclidean)");
    if (is_exact_alg(c.algorithm)) err.push_back("algorithm " + c.algorithm + " needs a tabular environment");
    if (c.regularizer.kind == "kl" || c.regularizer.kind == "entropy-bonus")
      err.push_back("regularizer '" + c.regularizer.kind + "' needs a simplex action set");
    if (c.eval.features.kind == FeatureSpec::Kind::Tabular) err.push_back("tabular features need a tabular environment");
    if (c.eval.targets == EvalConfig::Targets::Exact) err.push_back("exact targets need a tabular environment");
    if (c.scoring.weighting == "stationary" || c.scoring.weighting == "uniform")
      err.push_back("scoring.weighting '" + c.scoring.weighting + "' needs a tabular environment");
  }
  if (c.geometry.kind == "tsallis" && !((c.geometry.q > 0 && c.geometry.q < 1) || (c.geometry.q > 1 && c.geometry.q <= 2)))
    err.push_back("geometry.q must lie in (0, 1) or (1, 2]");
  if (c.regularizer.kind != "none" && !(c.regularizer.weight > 0))
    err.push_back("regularizer.weight must be positive");
  if (c.k_max < 0) err.push_back("k_max must be nonnegative");
  if (c.eval_every < 1) err.push_back("eval_every must be at least 1");
  if (c.seeds.empty()) err.push_back("seeds must not be empty");
  if (c.exploration < 0) err.push_back("exploration must be nonnegative");
  const EvalConfig& ev = c.eval;
  if (ev.sampling.n_samples < 1) err.push_back("eval.n_samples must be positive");
  if (ev.sampling.burn_in < 0) err.push_back("eval.burn_in must be nonnegative");
  if (ev.sampling.truncation < 1) err.push_back("eval.truncation must be positive");
  if (ev.features.n_anchors < 1 || ev.features.n_frequencies < 1)
    err.push_back("eval.n_anchors and eval.n_frequencies must be positive");
  if (ev.error_refits == 1 || ev.error_refits < 0) err.push_back("eval.error_refits must be 0 or at least 2");
  if (c.scoring.mc_episodes < 1 || c.scoring.mc_horizon < 1)
    err.push_back("scoring.mc_episodes and scoring.mc_horizon must be positive");
  if (c.n_probes < 0) err.push_back("n_probes must be nonnegative");
  if (!c.grid.is_object()) err.push_back("grid must be a table");
  if (!err.empty()) throw ConfigError(err);

  // Schedules are checked by constructing them on the first seed.
  if (c.algorithm == "policy-iteration" || c.algorithm == "value-iteration") return;
  try {
    RunConfig probe = c;
    probe.scoring.oracle = false;
    Instance inst = build_instance(probe, c.seeds.front());
    if (is_pmd(c.algorithm)) build_pmd_schedule(c, inst);
    else build_pda_schedule(c, inst);
  } catch (const ScheduleError& e) {
    throw ConfigError({std::string("schedule: ") + e.what()});
  } catch (const InvalidInput& e) {
    throw ConfigError({e.what()});
  }
}

Instance build_instance(const RunConfig& c, std::uint64_t seed) {
  Instance inst;
  const EnvConfig& e = c.environment;
  const std::uint64_t env_seed = e.seed ? *e.seed : seed;
  if (e.kind == "random-tabular") {
    inst.mdp = std::make_shared<const TabularMdp>(random_tabular(e.n_states, e.n_actions, e.gamma, e.sparsity, env_seed));
    inst.env = std::make_unique<TabularEnv>(inst.mdp);
  } else if (e.kind == "tabular-json") {
    std::ifstream in(e.path);
    if (!in) throw InvalidInput("cannot open MDP file " + e.path);
    std::stringstream buf;
    buf << in.rdbuf();
    inst.mdp = std::make_shared<const TabularMdp>(TabularMdp::from_json(buf.str()));
    inst.env = std::make_unique<TabularEnv>(inst.mdp);
  } else if (e.kind == "gridworld") {
    GridWorldSpec g = e.grid;
    g.env_seed = env_seed;
    auto gw = std::make_unique<GridWorld>(g, e.gamma);
    inst.env = std::move(gw);
  } else if (e.kind == "lqr") {
    LqrSpec s = default_lqr();
    s.gamma = e.gamma;
    s.cost_cap = e.lqr_cost_cap;
    s.action_bound = e.lqr_action_bound;
    inst.env = std::make_unique<LqrEnv>(s);
  } else if (e.kind == "pendulum") {
    PendulumSpec s = e.pendulum;
    s.gamma = e.gamma;
    inst.env = std::make_unique<PendulumEnv>(s);
  } else {
    throw InvalidInput("unknown environment kind " + e.kind);
  }
  const ActionSet& set = inst.env->action_set();
  const int n = set.dim();
  if (c.geometry.kind == "entropy") inst.geom = BregmanGeometry::entropy(n);
  else if (c.geometry.kind == "tsallis") inst.geom = BregmanGeometry::tsallis(n, c.geometry.q);
  else inst.geom = BregmanGeometry::euclidean(n);

  const double w = c.regularizer.weight;
  if (c.regularizer.kind == "kl") inst.reg = Regularizer::kl_to_anchor(w, set.center().transpose());
  else if (c.regularizer.kind == "quadratic") inst.reg = Regularizer::quadratic(w, set.center().transpose());
  else if (c.regularizer.kind == "entropy-bonus") inst.reg = Regularizer::entropy_bonus(w);

  const TabularMdp* tab = inst.env->tabular();
  if (tab && c.scoring.oracle) inst.oracle = value_iteration(*tab, inst.reg, 1e-10);
  std::string weighting = c.scoring.weighting;
  if (weighting == "auto") {
    if (!tab) weighting = "reset";
    else if (is_exact_alg(c.algorithm)) weighting = inst.oracle ? "stationary" : "uniform";
    else weighting = "reset";
  }
  if (tab) {
    if (weighting == "stationary") {
      if (!inst.oracle) throw InvalidInput("stationary weighting needs the oracle");
      inst.weighting = stationary_distribution(*tab, inst.oracle->pi);
    } else if (weighting == "uniform") {
      inst.weighting = Vec::Constant(tab->n_states(), 1.0 / tab->n_states());
    } else {
      inst.weighting = inst.env->reset_distribution();
    }
  }
  return inst;
}

namespace {

double cost_bound(const Instance& inst) {
  if (const TabularMdp* tab = inst.env->tabular()) return tab->cost_bound(inst.reg);
  return inst.env->cost_bound() + std::max(0.0, inst.reg.upper_bound(inst.env->action_set()));
}

int horizon(const RunConfig& c) { return std::max(1, c.k_max); }

}  // namespace

PmdSchedule build_pmd_schedule(const RunConfig& c, const Instance& inst) {
  const ScheduleConfig& s = c.schedule;
  const double mu_h = inst.reg.mu_h();
  const double mu_d = mu_h - s.mu_Q;
  const double gamma = inst.env->gamma();
  const int H = horizon(c);
  if (s.kind == "geometric") return PmdSchedule::geometric(gamma, mu_d, H);
  if (s.kind == "constant") return PmdSchedule::constant(s.eta, mu_d, H);
  if (s.kind == "nonconvex") return PmdSchedule::nonconvex(mu_d, H);
  if (s.kind == "sqrt-horizon")
    return PmdSchedule::sqrt_horizon(s.D0, cost_bound(inst), gamma, s.M_h, s.sigma2, mu_d, mu_h, H);
  if (s.kind == "inverse-t") return PmdSchedule::inverse_t(mu_h, mu_d, H);
  if (s.kind == "inverse-t-weighted") return PmdSchedule::inverse_t_weighted(mu_h, mu_d, H);
  if (s.kind == "continuous-nonconvex") return PmdSchedule::continuous_nonconvex(mu_d, H);
  throw InvalidInput("unknown PMD schedule " + s.kind);
}

PdaSchedule build_pda_schedule(const RunConfig& c, const Instance& inst) {
  const ScheduleConfig& s = c.schedule;
  const double mu_h = inst.reg.mu_h();
  const double mu_d = mu_h - s.mu_Q;
  const int H = horizon(c);
  if (s.kind == "geometric") return PdaSchedule::geometric(inst.env->gamma(), s.lambda, mu_d, mu_h, H);
  if (s.kind == "linear-const") return PdaSchedule::linear_const(s.lambda > 0 ? s.lambda : mu_h, mu_d, mu_h, H);
  if (s.kind == "linear-poly") return PdaSchedule::linear_poly(s.lambda, mu_d, mu_h, H);
  if (s.kind == "nonconvex") return PdaSchedule::nonconvex(mu_d, mu_h, H);
  throw InvalidInput("unknown PDA schedule " + s.kind);
}

// ---------------------------------------------------------------- runs

SeedResult run_seed(const RunConfig& c, std::uint64_t seed) {
  Instance inst = build_instance(c, seed);
  SeedResult res;
  res.seed = seed;
  const Environment& env = *inst.env;
  const TabularMdp* tab = env.tabular();
  const OptimalSolution* oracle = inst.oracle ? &*inst.oracle : nullptr;

  if (c.algorithm == "value-iteration") {
    require(tab != nullptr, "value iteration needs a tabular environment");
    OptimalSolution sol = oracle ? *oracle : value_iteration(*tab, inst.reg, 1e-10);
    TraceRow row;
    row.iteration = sol.iterations;
    row.f = inst.weighting.dot(sol.V);
    row.gap = 0.0;
    row.D_to_opt = 0.0;
    row.episode_score = row.f;
    res.rows.push_back(row);
    res.meta.emplace_back("bellman_residual", format_number(sol.residual));
    return res;
  }
  if (c.algorithm == "policy-iteration") {
    require(tab != nullptr, "policy iteration needs a tabular environment");
    PolicyTable pi = PolicyTable::uniform(tab->n_states(), tab->n_actions());
    for (int k = 0;; ++k) {
      ValueFunctions vals = evaluate_exact(*tab, pi, inst.reg);
      TraceRow row;
      row.iteration = k;
      row.f = inst.weighting.dot(vals.V);
      row.episode_score = row.f;
      if (oracle) row.gap = row.f - inst.weighting.dot(oracle->V);
      res.rows.push_back(row);
      if (k == c.k_max) break;
      PolicyTable next = policy_iteration_step(*tab, pi, inst.reg);
      if ((next.rows() - pi.rows()).cwiseAbs().maxCoeff() == 0.0) break;
      pi = std::move(next);
    }
    return res;
  }
  if (c.algorithm == "pmd-exact" || c.algorithm == "pda-exact") {
    require(tab != nullptr, c.algorithm + " needs a tabular environment");
    ExactOptions opt;
    opt.weighting = inst.weighting;
    opt.oracle = oracle;
    opt.keep_history = false;
    PolicyTable pi0 = PolicyTable::uniform(tab->n_states(), tab->n_actions());
    ExactTrace tr = c.algorithm == "pmd-exact"
                        ? pmd_run_exact(*tab, pi0, inst.geom, inst.reg, build_pmd_schedule(c, inst), c.k_max, opt)
                        : pda_run_exact(*tab, pi0, inst.geom, inst.reg, build_pda_schedule(c, inst), c.k_max, opt);
    res.rows = std::move(tr.rows);
    res.meta.emplace_back("max_value_increase", format_number(tr.max_value_increase));
    return res;
  }

  FaProblem prob;
  prob.env = &env;
  prob.reg = inst.reg;
  prob.weighting = inst.weighting;
  prob.oracle = oracle;
  prob.eval_every = c.eval_every;
  prob.mc_episodes = c.scoring.mc_episodes;
  prob.mc_horizon = c.scoring.mc_horizon;
  prob.mc_seed = Rng(seed, 0x73636f7265ull)();
  if (!tab && c.n_probes > 0) {
    Rng pr(seed, 0x70726f6265ull);
    for (int i = 0; i < c.n_probes; ++i) prob.probes.push_back(env.reset(pr));
  }
  Rng rng(seed, 0x72756eull);
  const bool finite = env.action_set().kind() == ActionSet::Kind::Simplex;
  FaTrace tr;
  if (c.algorithm == "pmd-fa") {
    Vec a0 = env.action_set().center();
    StatePolicy pi0 = [a0](const Vec&) { return a0; };
    PmdSchedule sch = build_pmd_schedule(c, inst);
    tr = finite ? pmd_run_finite_fa(prob, pi0, inst.geom, sch, c.eval, c.k_max, rng)
                : pmd_run_continuous(prob, pi0, inst.geom, sch, c.eval, c.k_max, ExplorationNoise{c.exploration}, rng);
  } else {
    PdaSchedule sch = build_pda_schedule(c, inst);
    tr = finite ? pda_run_finite_fa(prob, inst.geom, sch, c.eval, c.k_max, rng)
                : pda_run_continuous(prob, inst.geom, sch, c.eval, c.k_max, ExplorationNoise{c.exploration}, rng);
  }
  res.rows = std::move(tr.rows);
  res.checkpoint = std::move(tr.checkpoint);
  res.meta.emplace_back("env_steps", std::to_string(tr.env_steps));
  return res;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"f_hat",      "gap",        "D_to_opt",      "min_neg_psi",
                                                 "varsigma_hat", "sigma2_hat", "episode_score", "wall_ms"};
  return names;
}

std::vector<double> metric_values(const TraceRow& r) {
  return {r.f, r.gap, r.D_to_opt, r.min_neg_psi, r.varsigma_hat, r.sigma2_hat, r.episode_score, r.wall_ms};
}

std::vector<AggregateRow> aggregate(const std::vector<SeedResult>& seeds) {
  std::vector<AggregateRow> out;
  if (seeds.empty()) return out;
  // Iterations present in every seed, in the order of the first.
  for (const auto& row : seeds.front().rows) {
    std::vector<std::vector<double>> vals;
    for (const auto& s : seeds) {
      auto it = std::find_if(s.rows.begin(), s.rows.end(), [&](const TraceRow& r) { return r.iteration == row.iteration; });
      if (it == s.rows.end()) break;
      vals.push_back(metric_values(*it));
    }
    if (vals.size() != seeds.size()) continue;
    AggregateRow a;
    a.iteration = row.iteration;
    a.n = static_cast<int>(vals.size());
    const std::size_t m = metric_names().size();
    for (std::size_t j = 0; j < m; ++j) {
      double mean = 0.0;
      for (const auto& v : vals) mean += v[j];
      mean /= a.n;
      double var = 0.0;
      for (const auto& v : vals) var += (v[j] - mean) * (v[j] - mean);
      const double half = a.n > 1 ? 1.96 * std::sqrt(var / (a.n - 1)) / std::sqrt(static_cast<double>(a.n)) : 0.0;
      a.mean.push_back(mean);
      a.lo.push_back(mean - half);
      a.hi.push_back(mean + half);
    }
    out.push_back(std::move(a));
  }
  return out;
}

namespace {

void write_header(std::ostream& out, const RunConfig& c) {
  out << "# polopt metrics\n";
  out << "# config: " << config_to_json(c).dump() << '\n';
}

}  // namespace

void write_seed_csv(const std::string& path, const RunConfig& c, const SeedResult& res) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_header(out, c);
  out << "# seed: " << res.seed << '\n';
  for (const auto& [k, v] : res.meta) out << "# " << k << ": " << v << '\n';
  out << "seed,iteration";
  for (const auto& n : metric_names()) out << ',' << n;
  out << ",env_steps\n";
  for (const auto& r : res.rows) {
    out << res.seed << ',' << r.iteration;
    for (double v : metric_values(r)) out << ',' << format_number(v);
    out << ',' << r.env_steps << '\n';
  }
}

void write_aggregate_csv(const std::string& path, const RunConfig& c, const std::vector<AggregateRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_header(out, c);
  out << "# band: mean +- 1.96 sd / sqrt(n)\n";
  out << "iteration,n";
  for (const auto& n : metric_names()) out << ',' << n << "_mean," << n << "_lo," << n << "_hi";
  out << '\n';
  for (const auto& a : rows) {
    out << a.iteration << ',' << a.n;
    for (std::size_t j = 0; j < a.mean.size(); ++j)
      out << ',' << format_number(a.mean[j]) << ',' << format_number(a.lo[j]) << ',' << format_number(a.hi[j]);
    out << '\n';
  }
}

SeedResult read_seed_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  SeedResult res;
  std::string line;
  bool header = false;
  auto parse = [](const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::stod(s);
  };
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    require(cells.size() == metric_names().size() + 3, "metrics row has the wrong number of columns");
    res.seed = std::stoull(cells[0]);
    TraceRow r;
    r.iteration = std::stoi(cells[1]);
    r.f = parse(cells[2]);
    r.gap = parse(cells[3]);
    r.D_to_opt = parse(cells[4]);
    r.min_neg_psi = parse(cells[5]);
    r.varsigma_hat = parse(cells[6]);
    r.sigma2_hat = parse(cells[7]);
    r.episode_score = parse(cells[8]);
    r.wall_ms = parse(cells[9]);
    r.env_steps = std::stoll(cells[10]);
    res.rows.push_back(r);
  }
  return res;
}

RunSummary run(const RunConfig& c, bool write) {
  validate(c);
  RunSummary sum;
  sum.seeds.resize(c.seeds.size());
  parallel_for(c.seeds.size(), [&](std::size_t i) { sum.seeds[i] = run_seed(c, c.seeds[i]); });
  sum.aggregate = aggregate(sum.seeds);
  if (write) {
    namespace fs = std::filesystem;
    fs::create_directories(c.output);
    for (const auto& s : sum.seeds) {
      write_seed_csv((fs::path(c.output) / ("seed_" + std::to_string(s.seed) + ".csv")).string(), c, s);
      if (!s.checkpoint.empty()) {
        std::ofstream ck(fs::path(c.output) / ("checkpoint_" + std::to_string(s.seed) + ".json"));
        ck << s.checkpoint << '\n';
      }
    }
    write_aggregate_csv((fs::path(c.output) / "aggregate.csv").string(), c, sum.aggregate);
    std::ofstream cj(fs::path(c.output) / "config.json");
    cj << config_to_json(c).dump(2) << '\n';
  }
  return sum;
}

// ---------------------------------------------------------------- grid search

namespace {

void set_dotted(json& doc, const std::string& key, const json& value) {
  json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  require(!parts.empty(), "empty grid key");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object()) (*node)[parts[i]] = json::object();
    node = &(*node)[parts[i]];
  }
  (*node)[parts.back()] = value;
}

}  // namespace

GridResult gridsearch(const RunConfig& c, bool write) {
  std::vector<std::string> err;
  std::vector<std::string> keys;
  for (auto it = c.grid.begin(); it != c.grid.end(); ++it) {
    keys.push_back(it.key());
    if (!it->is_array() || it->empty()) err.push_back("grid." + it.key() + ": expected a non-empty list");
  }
  if (keys.empty()) err.push_back("grid: no parameters to search");
  if (!err.empty()) throw ConfigError(err);
  std::sort(keys.begin(), keys.end());

  json base = config_to_json(c);
  base.erase("grid");
  std::vector<std::size_t> idx(keys.size(), 0);
  GridResult res;
  std::vector<RunConfig> configs;
  for (;;) {
    json doc = base;
    json point = json::object();
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const json& v = c.grid.at(keys[i]).at(idx[i]);
      set_dotted(doc, keys[i], v);
      point[keys[i]] = v;
    }
    RunConfig cfg = parse_config(doc);
    RunSummary s = run(cfg, false);
    GridPoint gp;
    gp.values = point;
    gp.final_f = s.aggregate.empty() ? std::numeric_limits<double>::quiet_NaN() : s.aggregate.back().mean[0];
    res.table.push_back(gp);
    configs.push_back(cfg);
    std::size_t i = keys.size();
    while (i > 0) {
      --i;
      if (++idx[i] < c.grid.at(keys[i]).size()) break;
      idx[i] = 0;
      if (i == 0) {
        i = keys.size() + 1;
        break;
      }
    }
    if (i == keys.size() + 1) break;
  }
  auto point_less = [&](const GridPoint& a, const GridPoint& b) {
    for (const auto& k : keys) {
      if (a.values.at(k) < b.values.at(k)) return true;
      if (b.values.at(k) < a.values.at(k)) return false;
    }
    return false;
  };
  for (std::size_t i = 1; i < res.table.size(); ++i) {
    const GridPoint& cur = res.table[i];
    const GridPoint& best = res.table[res.best];
    if (std::isnan(cur.final_f)) continue;
    if (std::isnan(best.final_f) || cur.final_f < best.final_f ||
        (cur.final_f == best.final_f && point_less(cur, best)))
      res.best = i;
  }
  res.best_config = configs[res.best];
  if (write) {
    namespace fs = std::filesystem;
    fs::create_directories(c.output);
    std::ofstream out(fs::path(c.output) / "gridsearch.csv");
    out << "# polopt gridsearch\n# config: " << base.dump() << '\n';
    for (const auto& k : keys) out << k << ',';
    out << "final_f_mean\n";
    for (const auto& gp : res.table) {
      for (const auto& k : keys) {
        const json& v = gp.values.at(k);
        out << (v.is_string() ? v.get<std::string>() : v.dump()) << ',';
      }
      out << format_number(gp.final_f) << '\n';
    }
    std::ofstream bj(fs::path(c.output) / "best_config.json");
    bj << config_to_json(res.best_config).dump(2) << '\n';
  }
  return res;
}

}  // namespace polopt
