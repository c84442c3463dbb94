#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "polopt/geometry.hpp"
#include "polopt/mdp.hpp"
#include "polopt/rng.hpp"

namespace polopt {

struct Transition {
  Vec next;
  double cost = 0.0;
  // The next state is absorbing: from here on the stage cost is constant.
  bool absorbed = false;
};

// Simulator interface shared by tabular and continuous-state problems.
// Implementations are immutable; randomness comes in through the Rng.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::string name() const = 0;
  virtual int state_dim() const = 0;
  virtual const ActionSet& action_set() const = 0;
  virtual double gamma() const = 0;
  virtual Vec reset(Rng& rng) const = 0;
  // For simplex action sets `a` must be a vertex; see sample_vertex.
  virtual Transition step(const Vec& s, const Vec& a, Rng& rng) const = 0;
  // Bound on the stage cost.
  virtual double cost_bound() const = 0;
  // Embedding used by kernel features.
  virtual Vec features(const Vec& s) const { return s; }
  virtual bool is_absorbing(const Vec&) const { return false; }
  // Stage cost paid forever once absorbed.
  virtual double absorbing_cost(const Vec&) const { return 0.0; }
  // Rollouts are cut here; 0 means no cap.
  virtual int episode_cap() const { return 0; }
  // Index into the tabular export, or -1 when there is none.
  virtual int state_index(const Vec&) const { return -1; }
  virtual const TabularMdp* tabular() const { return nullptr; }
  // Reset distribution over tabular indices when tabular() is available.
  virtual Vec reset_distribution() const { return Vec(); }
  virtual Vec state_from_index(int) const { throw InvalidInput(name() + " has no tabular states"); }
  // Environment-native episode score; by default the discounted cost.
  virtual double episode_score(double discounted_cost, int /*steps_alive*/) const { return discounted_cost; }
};

// Draws a vertex of the simplex with probabilities p.
Vec sample_vertex(const Vec& p, Rng& rng);

// ---------------------------------------------------------------- tabular

class TabularEnv : public Environment {
 public:
  explicit TabularEnv(std::shared_ptr<const TabularMdp> mdp, Vec initial = Vec());
  std::string name() const override { return "tabular"; }
  int state_dim() const override { return 1; }
  const ActionSet& action_set() const override { return actions_; }
  double gamma() const override { return mdp_->gamma(); }
  Vec reset(Rng& rng) const override;
  Transition step(const Vec& s, const Vec& a, Rng& rng) const override;
  double cost_bound() const override { return mdp_->cost_bound(); }
  Vec features(const Vec& s) const override;
  int state_index(const Vec& s) const override { return static_cast<int>(s[0]); }
  const TabularMdp* tabular() const override { return mdp_.get(); }
  Vec reset_distribution() const override { return initial_; }
  Vec state_from_index(int i) const override { return Vec::Constant(1, i); }

 private:
  std::shared_ptr<const TabularMdp> mdp_;
  Vec initial_;
  ActionSet actions_;
};

TabularMdp random_tabular(int n_states, int n_actions, double gamma, double sparsity, std::uint64_t seed);

// ---------------------------------------------------------------- grid world

struct GridWorldSpec {
  int width = 10;
  int height = 10;
  int n_traps = 10;
  double step_cost = 1.0;
  double trap_cost = 5.0;
  std::uint64_t env_seed = 0;
  int episode_cap = 1000;
  // Weight of the absolute agent position in the feature embedding,
  // relative to the offset to the target.
  double position_weight = 1.0;
};

class GridWorld : public Environment {
 public:
  GridWorld(GridWorldSpec spec, double gamma);
  std::string name() const override { return "gridworld"; }
  int state_dim() const override { return 4; }
  const ActionSet& action_set() const override { return actions_; }
  double gamma() const override { return gamma_; }
  // Target uniform over trap-free cells, agent uniform over the other cells.
  Vec reset(Rng& rng) const override;
  Transition step(const Vec& s, const Vec& a, Rng& rng) const override;
  double cost_bound() const override { return spec_.step_cost + spec_.trap_cost; }
  // Offset to the target plus absolute position, scaled to the unit box.
  Vec features(const Vec& s) const override;
  bool is_absorbing(const Vec& s) const override;
  int episode_cap() const override { return spec_.episode_cap; }
  int state_index(const Vec& s) const override;
  const TabularMdp* tabular() const override;
  Vec reset_distribution() const override;
  Vec state_from_index(int i) const override { return state_of(i); }

  const GridWorldSpec& spec() const { return spec_; }
  const std::vector<bool>& traps() const { return trap_; }
  int cell(int x, int y) const { return x * spec_.height + y; }
  Vec state_of(int index) const;

 private:
  // Next cell for one of the four moves: 0 up, 1 down, 2 left, 3 right.
  int move(int cell, int action) const;
  double landing_cost(int next_cell, int target_cell) const;
  friend TabularMdp gridworld_to_tabular(const GridWorldSpec& spec, double gamma);

  GridWorldSpec spec_;
  double gamma_;
  std::vector<bool> trap_;
  ActionSet actions_;
  mutable std::shared_ptr<const TabularMdp> tabular_;
};

// States enumerate (agent cell, target cell) pairs: index = agent * cells + target.
TabularMdp gridworld_to_tabular(const GridWorldSpec& spec, double gamma);

// ---------------------------------------------------------------- LQR

struct LqrSpec {
  Mat A, B, Qc, Rc, noise_cov;
  double gamma = 0.9;
  double cost_cap = 1e3;
  double action_bound = 5.0;
  double init_scale = 1.0;
};

// A slightly unstable 4-state, 2-input plant.
LqrSpec default_lqr();

struct LqrOutcome {
  Vec next;
  double cost;
};
LqrOutcome lqr_step(const LqrSpec& spec, const Vec& x, const Vec& u, Rng& rng);

class LqrEnv : public Environment {
 public:
  explicit LqrEnv(LqrSpec spec);
  std::string name() const override { return "lqr"; }
  int state_dim() const override { return static_cast<int>(spec_.A.rows()); }
  const ActionSet& action_set() const override { return actions_; }
  double gamma() const override { return spec_.gamma; }
  Vec reset(Rng& rng) const override;
  Transition step(const Vec& s, const Vec& a, Rng& rng) const override;
  double cost_bound() const override { return spec_.cost_cap; }
  const LqrSpec& spec() const { return spec_; }

 private:
  LqrSpec spec_;
  Mat noise_chol_;
  ActionSet actions_;
};

// ---------------------------------------------------------------- pendulum

struct PendulumSpec {
  double mass = 1.0;
  double length = 1.0;
  double gravity = 9.81;
  double dt = 0.02;
  double torque_limit = 3.0;
  double init_noise = 0.05;
  double gamma = 0.99;
  int step_cap = 1000;
  // Stage cost once fallen; zero while balanced.
  double fall_cost = 2.0;
};

struct PendulumOutcome {
  Vec next;
  double cost;
  bool fallen;
};
// State (theta, theta_dot). Fallen states are absorbing.
PendulumOutcome pendulum_step(const PendulumSpec& spec, const Vec& state, const Vec& u, Rng& rng);

class PendulumEnv : public Environment {
 public:
  explicit PendulumEnv(PendulumSpec spec);
  std::string name() const override { return "pendulum"; }
  int state_dim() const override { return 2; }
  const ActionSet& action_set() const override { return actions_; }
  double gamma() const override { return spec_.gamma; }
  Vec reset(Rng& rng) const override;
  Transition step(const Vec& s, const Vec& a, Rng& rng) const override;
  double cost_bound() const override { return spec_.fall_cost; }
  bool is_absorbing(const Vec& s) const override;
  double absorbing_cost(const Vec& s) const override;
  int episode_cap() const override { return spec_.step_cap; }
  // Score: minus the number of balanced steps.
  double episode_score(double, int steps_alive) const override { return -steps_alive; }
  const PendulumSpec& spec() const { return spec_; }

 private:
  PendulumSpec spec_;
  ActionSet actions_;
};

}  // namespace polopt
