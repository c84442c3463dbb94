#pragma once

#include <functional>
#include <span>
#include <string>

#include "polopt/common.hpp"
#include "polopt/rng.hpp"

namespace polopt {

class ActionSet {
 public:
  enum class Kind { Simplex, Box, Polyhedral };

  static ActionSet simplex(int n);
  static ActionSet box(Vec lower, Vec upper);
  // {a : A a <= b}
  static ActionSet polyhedral(Mat A, Vec b);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  const Mat& A() const { return A_; }
  const Vec& b() const { return b_; }

  bool contains(const Vec& a, double tol = 1e-12) const;
  // Euclidean projection.
  Vec project(const Vec& y) const;
  // Uniform over vertices for the simplex, uniform over the box otherwise.
  Vec sample(Rng& rng) const;
  // Some point in the set: barycenter for the simplex, midpoint for a box.
  Vec center() const;

 private:
  Kind kind_ = Kind::Simplex;
  int dim_ = 0;
  Vec lower_, upper_;
  Mat A_;
  Vec b_;
};

Vec project_simplex(const Vec& y);
// Projection onto {x : A x <= b} by Hildreth's dual coordinate ascent.
Vec project_polyhedron(const Mat& A, const Vec& b, const Vec& y, double tol = 1e-13);

class BregmanGeometry {
 public:
  enum class Kind { Entropy, Euclidean, NegTsallis };

  static BregmanGeometry entropy(int n) { return {Kind::Entropy, n, 0.0}; }
  static BregmanGeometry euclidean(int n) { return {Kind::Euclidean, n, 0.0}; }
  static BregmanGeometry tsallis(int n, double q);

  Kind kind() const { return kind_; }
  int action_dim() const { return dim_; }
  double q() const { return q_; }
  std::string name() const;

  // omega(a) = sum a ln a (entropy), ||a||^2/2, or (sum a^q - 1)/(q - 1).
  double omega(const Vec& a) const;
  Vec grad_omega(const Vec& a) const;
  // D(a_ref, a) = omega(a) - omega(a_ref) - <grad omega(a_ref), a - a_ref>.
  double divergence(const Vec& a_ref, const Vec& a) const;

  // argmin_{a in set} <v, a> + W omega(a), W > 0.
  Vec mirror_minimize(const ActionSet& set, const Vec& v, double W) const;

  // Largest divergence between two points of the set. Entropy and Tsallis
  // with q < 1 are unbounded on the simplex, so the set is clamped to
  // components >= interior first.
  double diameter(const ActionSet& set, double interior = 1e-6) const;

 private:
  BregmanGeometry(Kind k, int n, double q) : kind_(k), dim_(n), q_(q) {}
  void check(const Vec& a) const;

  Kind kind_;
  int dim_;
  double q_;
};

double divergence(const BregmanGeometry& geom, const Vec& a_ref, const Vec& a);

// Smallest simplex component used before taking logarithms.
inline constexpr double kLogFloor = 1e-300;

class Regularizer {
 public:
  enum class Kind { Null, KlToAnchor, Quadratic, EntropyBonus };

  static Regularizer none() { return Regularizer(Kind::Null, 0.0, Mat()); }
  // weight * KL(a || anchor(s)). anchor has one row per state, or one row
  // shared by all states.
  static Regularizer kl_to_anchor(double weight, Mat anchor);
  // weight/2 * ||a - anchor(s)||^2.
  static Regularizer quadratic(double weight, Mat anchor);
  // weight * (Shannon entropy of a). Concave, so the strong convexity
  // modulus is -weight: this is the weakly convex case.
  static Regularizer entropy_bonus(double weight);

  Kind kind() const { return kind_; }
  double weight() const { return weight_; }
  const Mat& anchors() const { return anchor_; }
  Vec anchor(int state) const;
  std::string name() const;

  double mu_h() const;
  // Lipschitz constant in the geometry's norm over the set; +inf where the
  // gradient blows up at the simplex boundary.
  double lipschitz(const ActionSet& set) const;
  // max_a h^a(s) over the set, used for the cost bound.
  double upper_bound(const ActionSet& set) const;

  double value(int state, const Vec& a) const;
  Vec gradient(int state, const Vec& a) const;

  // Splits h^a(s) = coef * omega(a) + <lin, a> + const when that is possible
  // for the given geometry. Returns false otherwise.
  bool mirror_form(const BregmanGeometry& geom, int state, double& coef, Vec& lin) const;

 private:
  Regularizer(Kind k, double w, Mat anchor) : kind_(k), weight_(w), anchor_(std::move(anchor)) {}
  Kind kind_;
  double weight_;
  Mat anchor_;
};

struct BregmanTerm {
  double weight;
  Vec center;
};

// argmin_a <linear, a> + reg_scale * h^a(state) + sum_j w_j D(center_j, a).
// Solved in closed form (entropy), by bisection (Tsallis) or by projection
// (Euclidean). Throws if the combined objective is not strongly convex.
Vec solve_prox(const BregmanGeometry& geom, const ActionSet& set, const Regularizer& reg,
               int state, const Vec& linear, double reg_scale,
               std::span<const BregmanTerm> terms);

// argmin_{a in simplex} <g, a> + h^a(s) + (1/eta) KL(a || a_ref).
Vec prox_simplex_entropy(const Vec& g, const Regularizer& reg, int state, double eta,
                         const Vec& a_ref);

struct SmoothObjective {
  // Returns the value; writes the gradient when grad is non-null.
  std::function<double(const Vec& a, Vec* grad)> eval;
  double modulus = 0.0;
};

struct ProxOptions {
  double tol = 1e-9;
  int max_iter = 100000;
};

// Accelerated projected gradient with backtracking for strongly convex
// objectives. Stops when the projected-gradient mapping is below tol.
Vec prox_generic(const SmoothObjective& obj, const ActionSet& set, const Vec& x0,
                 const ProxOptions& opt = {});

// Norm of the projected-gradient mapping (x - P(x - t g)) / t.
double gradient_mapping_norm(const ActionSet& set, const Vec& x, const Vec& g, double t = 1.0);

}  // namespace polopt
