#include "polopt/trace.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "polopt/parallel.hpp"

namespace polopt {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << "iteration,f,gap,D_to_opt,min_neg_psi,varsigma_hat,sigma2_hat,wall_ms\n";
  for (const auto& r : rows) {
    out << r.iteration << ',' << format_number(r.f) << ',' << format_number(r.gap) << ',' << format_number(r.D_to_opt)
        << ',' << format_number(r.min_neg_psi) << ',' << format_number(r.varsigma_hat) << ','
        << format_number(r.sigma2_hat) << ',' << format_number(r.wall_ms) << '\n';
  }
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trace file " + path);
  write_trace_csv(out, rows);
}

double ExplorationNoise::std_at(int t) const {
  if (scale <= 0) return 0.0;
  return scale * std::pow(std::max(t, 1), -0.25);
}

PolicyTable materialize(const Environment& env, const StatePolicy& pi) {
  const TabularMdp* tab = env.tabular();
  require(tab != nullptr, "materialize: environment has no tabular export");
  Mat rows(tab->n_states(), tab->n_actions());
  parallel_for(static_cast<std::size_t>(tab->n_states()), [&](std::size_t s) {
    rows.row(static_cast<Eigen::Index>(s)) = pi(env.state_from_index(static_cast<int>(s))).transpose();
  });
  return PolicyTable(std::move(rows));
}

EvalDataset exact_dataset(const Environment& env, const StatePolicy& pi, const Regularizer& reg) {
  const TabularMdp* tab = env.tabular();
  require(tab != nullptr, "exact targets need a tabular export");
  PolicyTable P = materialize(env, pi);
  ValueFunctions vals = evaluate_exact(*tab, P, reg);
  EvalDataset d;
  d.policy_id = "exact";
  const int nA = tab->n_actions();
  for (int s = 0; s < tab->n_states(); ++s) {
    Vec state = env.state_from_index(s);
    StatePoint pt = state_point(env, state);
    for (int i = 0; i < nA; ++i) {
      Sample smp;
      smp.state = state;
      smp.point = pt;
      smp.action = Vec::Zero(nA);
      smp.action[i] = 1.0;
      smp.y = vals.Q(s, i);
      d.samples.push_back(std::move(smp));
    }
  }
  return d;
}

PolicyScore score_policy(const FaProblem& problem, const StatePolicy& pi, const BregmanGeometry& geom) {
  const Environment& env = *problem.env;
  PolicyScore out;
  if (const TabularMdp* tab = env.tabular()) {
    PolicyTable P = materialize(env, pi);
    Vec V = evaluate_exact(*tab, P, problem.reg).V;
    Vec w = problem.weighting.size() ? problem.weighting : env.reset_distribution();
    out.f = w.dot(V);
    out.episode_score = out.f;
    if (problem.oracle) {
      out.gap = out.f - w.dot(problem.oracle->V);
      Vec wd = problem.oracle_weighting.size() ? problem.oracle_weighting : w;
      try {
        out.D_to_opt = expected_divergence(geom, P, problem.oracle->pi, wd);
      } catch (const InvalidInput&) {
        out.D_to_opt = std::numeric_limits<double>::infinity();
      }
    }
    return out;
  }
  const int E = problem.mc_episodes;
  int H = problem.mc_horizon;
  if (env.episode_cap() > 0) H = std::min(H, env.episode_cap());
  require(E >= 1 && H >= 1, "Monte Carlo scoring needs episodes and a horizon");
  const bool finite = env.action_set().kind() == ActionSet::Kind::Simplex;
  const double gamma = env.gamma();
  std::vector<double> cost(static_cast<std::size_t>(E)), score(static_cast<std::size_t>(E));
  Rng base(problem.mc_seed, 0x6d6f6e7465ull);
  parallel_for(static_cast<std::size_t>(E), [&](std::size_t e) {
    Rng r = base.substream(e);
    Vec s = env.reset(r);
    double total = 0.0, disc = 1.0;
    int alive = 0;
    for (int t = 0; t < H; ++t) {
      Vec a = pi(s);
      if (finite) a = sample_vertex(a, r);
      Transition tr = env.step(s, a, r);
      double h = problem.reg.kind() == Regularizer::Kind::Null ? 0.0 : problem.reg.value(std::max(0, env.state_index(s)), pi(s));
      total += disc * (tr.cost + h);
      disc *= gamma;
      if (tr.absorbed) {
        total += disc * env.absorbing_cost(tr.next) / (1.0 - gamma);
        break;
      }
      ++alive;
      s = tr.next;
    }
    cost[e] = total;
    score[e] = env.episode_score(total, alive);
  });
  double f = 0.0, sc = 0.0;
  for (int e = 0; e < E; ++e) {
    f += cost[static_cast<std::size_t>(e)];
    sc += score[static_cast<std::size_t>(e)];
  }
  out.f = f / E;
  out.episode_score = sc / E;
  return out;
}

}  // namespace polopt
