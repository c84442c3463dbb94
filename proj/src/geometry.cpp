#include "polopt/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace polopt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_log(double x) { return std::log(std::max(x, kLogFloor)); }

Vec softmax_from_logits(const Vec& logits) {
  double m = logits.maxCoeff();
  require(std::isfinite(m), "softmax: no finite logit");
  Vec out(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    out[i] = std::isfinite(logits[i]) ? std::exp(logits[i] - m) : 0.0;
  }
  return out / out.sum();
}
}  // namespace

// ---------------------------------------------------------------- ActionSet

ActionSet ActionSet::simplex(int n) {
  require(n >= 1, "simplex dimension must be positive");
  ActionSet s;
  s.kind_ = Kind::Simplex;
  s.dim_ = n;
  return s;
}

ActionSet ActionSet::box(Vec lower, Vec upper) {
  require(lower.size() == upper.size() && lower.size() >= 1, "box bounds must have equal positive size");
  require((lower.array() <= upper.array()).all(), "box requires lower <= upper");
  ActionSet s;
  s.kind_ = Kind::Box;
  s.dim_ = static_cast<int>(lower.size());
  s.lower_ = std::move(lower);
  s.upper_ = std::move(upper);
  return s;
}

ActionSet ActionSet::polyhedral(Mat A, Vec b) {
  require(A.rows() == b.size() && A.cols() >= 1, "polyhedral set: A and b shapes disagree");
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    require(A.row(i).squaredNorm() > 0, "polyhedral set: zero constraint row");
  }
  ActionSet s;
  s.kind_ = Kind::Polyhedral;
  s.dim_ = static_cast<int>(A.cols());
  s.A_ = std::move(A);
  s.b_ = std::move(b);
  return s;
}

bool ActionSet::contains(const Vec& a, double tol) const {
  if (a.size() != dim_ || !a.allFinite()) return false;
  switch (kind_) {
    case Kind::Simplex:
      return a.minCoeff() >= -tol && std::abs(a.sum() - 1.0) <= tol;
    case Kind::Box:
      return (a.array() >= lower_.array() - tol).all() && (a.array() <= upper_.array() + tol).all();
    case Kind::Polyhedral:
      return ((A_ * a - b_).array() <= tol).all();
  }
  return false;
}

Vec ActionSet::project(const Vec& y) const {
  require(y.size() == dim_, "projection: dimension mismatch");
  switch (kind_) {
    case Kind::Simplex:
      return project_simplex(y);
    case Kind::Box:
      return y.cwiseMax(lower_).cwiseMin(upper_);
    case Kind::Polyhedral:
      return project_polyhedron(A_, b_, y);
  }
  return y;
}

Vec ActionSet::sample(Rng& rng) const {
  switch (kind_) {
    case Kind::Simplex: {
      Vec e = Vec::Zero(dim_);
      e[static_cast<Eigen::Index>(rng.below(dim_))] = 1.0;
      return e;
    }
    case Kind::Box: {
      Vec a(dim_);
      for (int i = 0; i < dim_; ++i) a[i] = rng.uniform(lower_[i], upper_[i]);
      return a;
    }
    case Kind::Polyhedral:
      break;
  }
  throw InvalidInput("uniform sampling is not available for polyhedral action sets");
}

Vec ActionSet::center() const {
  switch (kind_) {
    case Kind::Simplex:
      return Vec::Constant(dim_, 1.0 / dim_);
    case Kind::Box:
      return 0.5 * (lower_ + upper_);
    case Kind::Polyhedral:
      return project(Vec::Zero(dim_));
  }
  return Vec();
}

Vec project_simplex(const Vec& y) {
  const Eigen::Index n = y.size();
  std::vector<double> u(y.data(), y.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, tau = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cum += u[j];
    double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0) tau = t;
  }
  return (y.array() - tau).cwiseMax(0.0);
}

Vec project_polyhedron(const Mat& A, const Vec& b, const Vec& y, double tol) {
  const Eigen::Index m = A.rows();
  Vec lambda = Vec::Zero(m);
  Vec x = y;
  Vec row_norm2 = A.rowwise().squaredNorm();
  constexpr int kMaxSweeps = 1000000;
  double viol = kInf;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double change = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      double r = A.row(i).dot(x) - b[i];
      double li = std::max(0.0, lambda[i] + r / row_norm2[i]);
      double d = li - lambda[i];
      if (d != 0.0) {
        x.noalias() -= d * A.row(i).transpose();
        lambda[i] = li;
        change = std::max(change, std::abs(d) * std::sqrt(row_norm2[i]));
      }
    }
    viol = ((A * x - b).array()).maxCoeff();
    if (viol <= tol && change <= tol) return x;
  }
  throw ConvergenceFailure("polyhedral projection did not converge", x, viol);
}

// ---------------------------------------------------------- BregmanGeometry

BregmanGeometry BregmanGeometry::tsallis(int n, double q) {
  require(q > 0 && q != 1.0 && q <= 2.0, "Tsallis index q must lie in (0,1) or (1,2]");
  return {Kind::NegTsallis, n, q};
}

std::string BregmanGeometry::name() const {
  switch (kind_) {
    case Kind::Entropy:
      return "entropy";
    case Kind::Euclidean:
      return "euclidean";
    case Kind::NegTsallis:
      return "tsallis(q=" + std::to_string(q_) + ")";
  }
  return "?";
}

void BregmanGeometry::check(const Vec& a) const {
  require(a.size() == dim_, "action dimension does not match geometry");
  require(a.allFinite(), "action has non-finite components");
  if (kind_ != Kind::Euclidean) {
    require(a.minCoeff() >= 0.0, "negative simplex component outside the geometry's domain");
  }
}

double BregmanGeometry::omega(const Vec& a) const {
  check(a);
  switch (kind_) {
    case Kind::Entropy: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < a.size(); ++i)
        if (a[i] > 0) s += a[i] * std::log(a[i]);
      return s;
    }
    case Kind::Euclidean:
      return 0.5 * a.squaredNorm();
    case Kind::NegTsallis:
      return (a.array().pow(q_).sum() - 1.0) / (q_ - 1.0);
  }
  return 0.0;
}

Vec BregmanGeometry::grad_omega(const Vec& a) const {
  check(a);
  switch (kind_) {
    case Kind::Entropy:
      return a.unaryExpr([](double x) { return safe_log(x) + 1.0; });
    case Kind::Euclidean:
      return a;
    case Kind::NegTsallis: {
      double q = q_;
      return a.unaryExpr([q](double x) {
        return q * std::pow(std::max(x, kLogFloor), q - 1.0) / (q - 1.0);
      });
    }
  }
  return a;
}

double BregmanGeometry::divergence(const Vec& a_ref, const Vec& a) const {
  check(a_ref);
  check(a);
  switch (kind_) {
    case Kind::Entropy: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a[i] <= 0) continue;
        if (a_ref[i] <= 0) throw InvalidInput("KL divergence is infinite: reference has a zero component");
        s += a[i] * std::log(a[i] / a_ref[i]);
      }
      // Generalized KL; the mass terms cancel on the simplex.
      s += a_ref.sum() - a.sum();
      return std::max(s, 0.0);
    }
    case Kind::Euclidean:
      return 0.5 * (a - a_ref).squaredNorm();
    case Kind::NegTsallis: {
      if (q_ < 1.0 && a_ref.minCoeff() <= 0)
        throw InvalidInput("Tsallis divergence is infinite: reference has a zero component");
      double d = omega(a) - omega(a_ref) - grad_omega(a_ref).dot(a - a_ref);
      return std::max(d, 0.0);
    }
  }
  return 0.0;
}

double divergence(const BregmanGeometry& geom, const Vec& a_ref, const Vec& a) {
  return geom.divergence(a_ref, a);
}

namespace {

// argmin over the simplex of <v,a> + W (sum a^q - 1)/(q - 1).
Vec tsallis_simplex(const Vec& v, double W, double q) {
  const Eigen::Index n = v.size();
  const double vmin = v.minCoeff();
  auto point = [&](double nu) {
    Vec a(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (q > 1.0) {
        double base = (q - 1.0) / (W * q) * std::max(0.0, -nu - v[i]);
        a[i] = std::pow(base, 1.0 / (q - 1.0));
      } else {
        double base = (1.0 - q) / (W * q) * (nu + v[i]);
        a[i] = base > 0 ? std::pow(base, -1.0 / (1.0 - q)) : kInf;
      }
    }
    return a;
  };
  double lo, hi;
  if (q > 1.0) {
    lo = -vmin - W * q / (q - 1.0);
    hi = -vmin;
  } else {
    lo = -vmin;
    hi = -vmin + W * q * std::pow(static_cast<double>(n), 1.0 - q) / (1.0 - q);
  }
  // Sum of a(nu) is decreasing in nu.
  Vec a;
  for (int it = 0; it < 400; ++it) {
    double mid = 0.5 * (lo + hi);
    a = point(mid);
    double s = a.sum();
    if (std::abs(s - 1.0) <= 1e-12) break;
    if (s > 1.0) lo = mid; else hi = mid;
    if (hi - lo <= 1e-15 * std::max(1.0, std::abs(mid))) break;
  }
  if (!a.allFinite() || a.sum() <= 0) a = point(hi);
  return a / a.sum();
}

}  // namespace

Vec BregmanGeometry::mirror_minimize(const ActionSet& set, const Vec& v, double W) const {
  require(W > 0, "mirror step requires a positive weight on omega");
  require(v.size() == set.dim(), "mirror step: dimension mismatch");
  switch (kind_) {
    case Kind::Entropy:
      require(set.kind() == ActionSet::Kind::Simplex, "entropy geometry needs a simplex action set");
      return softmax_from_logits(-v / W);
    case Kind::Euclidean:
      return set.project(-v / W);
    case Kind::NegTsallis:
      require(set.kind() == ActionSet::Kind::Simplex, "Tsallis geometry needs a simplex action set");
      return tsallis_simplex(v, W, q_);
  }
  return v;
}

double BregmanGeometry::diameter(const ActionSet& set, double interior) const {
  if (kind_ == Kind::Euclidean) {
    switch (set.kind()) {
      case ActionSet::Kind::Box:
        return 0.5 * (set.upper() - set.lower()).squaredNorm();
      case ActionSet::Kind::Simplex:
        return 1.0;
      case ActionSet::Kind::Polyhedral:
        return kInf;
    }
  }
  require(set.kind() == ActionSet::Kind::Simplex, "diameter: simplex action set expected");
  const int n = set.dim();
  if (n == 1) return 0.0;
  auto vertex = [&](int i) {
    Vec e = Vec::Constant(n, interior);
    e[i] = 1.0 - (n - 1) * interior;
    return e;
  };
  double best = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) best = std::max(best, divergence(vertex(i), vertex(j)));
  return best;
}

// -------------------------------------------------------------- Regularizer

Regularizer Regularizer::kl_to_anchor(double weight, Mat anchor) {
  require(weight >= 0, "regularizer weight must be nonnegative");
  require(anchor.rows() >= 1 && anchor.cols() >= 1, "KL regularizer needs an anchor policy");
  for (Eigen::Index s = 0; s < anchor.rows(); ++s) {
    require(anchor.row(s).minCoeff() >= 0 && std::abs(anchor.row(s).sum() - 1.0) <= 1e-12,
            "KL anchor rows must be simplex points");
  }
  return Regularizer(Kind::KlToAnchor, weight, std::move(anchor));
}

Regularizer Regularizer::quadratic(double weight, Mat anchor) {
  require(weight >= 0, "regularizer weight must be nonnegative");
  require(anchor.rows() >= 1 && anchor.cols() >= 1, "quadratic regularizer needs an anchor point");
  return Regularizer(Kind::Quadratic, weight, std::move(anchor));
}

Regularizer Regularizer::entropy_bonus(double weight) {
  require(weight >= 0, "regularizer weight must be nonnegative");
  return Regularizer(Kind::EntropyBonus, weight, Mat());
}

Vec Regularizer::anchor(int state) const {
  if (anchor_.rows() == 1) return anchor_.row(0).transpose();
  require(state >= 0 && state < anchor_.rows(), "regularizer anchor: state out of range");
  return anchor_.row(state).transpose();
}

std::string Regularizer::name() const {
  switch (kind_) {
    case Kind::Null:
      return "null";
    case Kind::KlToAnchor:
      return "kl";
    case Kind::Quadratic:
      return "quadratic";
    case Kind::EntropyBonus:
      return "entropy-bonus";
  }
  return "?";
}

double Regularizer::mu_h() const {
  switch (kind_) {
    case Kind::Null:
      return 0.0;
    case Kind::KlToAnchor:
    case Kind::Quadratic:
      return weight_;
    case Kind::EntropyBonus:
      return -weight_;
  }
  return 0.0;
}

double Regularizer::lipschitz(const ActionSet& set) const {
  switch (kind_) {
    case Kind::Null:
      return 0.0;
    case Kind::Quadratic: {
      Vec c = anchor(0);
      if (set.kind() == ActionSet::Kind::Box) {
        Vec far = ((set.upper() - c).cwiseAbs()).cwiseMax((set.lower() - c).cwiseAbs());
        return weight_ * far.norm();
      }
      if (set.kind() == ActionSet::Kind::Simplex) {
        double best = 0.0;
        for (int i = 0; i < set.dim(); ++i) {
          Vec e = Vec::Zero(set.dim());
          e[i] = 1.0;
          best = std::max(best, (e - c).norm());
        }
        return weight_ * best;
      }
      return kInf;
    }
    case Kind::KlToAnchor:
    case Kind::EntropyBonus:
      return weight_ == 0.0 ? 0.0 : kInf;
  }
  return kInf;
}

double Regularizer::upper_bound(const ActionSet& set) const {
  switch (kind_) {
    case Kind::Null:
      return 0.0;
    case Kind::KlToAnchor: {
      double m = anchor_.minCoeff();
      return m > 0 ? weight_ * std::log(1.0 / m) : kInf;
    }
    case Kind::Quadratic: {
      double l = lipschitz(set);
      return weight_ > 0 ? 0.5 * l * l / weight_ : 0.0;
    }
    case Kind::EntropyBonus:
      return weight_ * std::log(static_cast<double>(set.dim()));
  }
  return kInf;
}

double Regularizer::value(int state, const Vec& a) const {
  switch (kind_) {
    case Kind::Null:
      return 0.0;
    case Kind::KlToAnchor: {
      Vec p = anchor(state);
      double s = 0.0;
      for (Eigen::Index i = 0; i < a.size(); ++i)
        if (a[i] > 0) s += a[i] * (std::log(a[i]) - safe_log(p[i]));
      return weight_ * s;
    }
    case Kind::Quadratic:
      return 0.5 * weight_ * (a - anchor(state)).squaredNorm();
    case Kind::EntropyBonus: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < a.size(); ++i)
        if (a[i] > 0) s -= a[i] * std::log(a[i]);
      return weight_ * s;
    }
  }
  return 0.0;
}

Vec Regularizer::gradient(int state, const Vec& a) const {
  switch (kind_) {
    case Kind::Null:
      return Vec::Zero(a.size());
    case Kind::KlToAnchor: {
      Vec p = anchor(state);
      Vec g(a.size());
      for (Eigen::Index i = 0; i < a.size(); ++i) g[i] = weight_ * (safe_log(a[i]) - safe_log(p[i]) + 1.0);
      return g;
    }
    case Kind::Quadratic:
      return weight_ * (a - anchor(state));
    case Kind::EntropyBonus:
      return a.unaryExpr([w = weight_](double x) { return -w * (safe_log(x) + 1.0); });
  }
  return Vec::Zero(a.size());
}

bool Regularizer::mirror_form(const BregmanGeometry& geom, int state, double& coef, Vec& lin) const {
  const int n = geom.action_dim();
  switch (kind_) {
    case Kind::Null:
      coef = 0.0;
      lin = Vec::Zero(n);
      return true;
    case Kind::KlToAnchor:
      if (geom.kind() != BregmanGeometry::Kind::Entropy) return false;
      coef = weight_;
      lin = -weight_ * anchor(state).unaryExpr([](double x) { return safe_log(x); });
      return true;
    case Kind::EntropyBonus:
      if (geom.kind() != BregmanGeometry::Kind::Entropy) return false;
      coef = -weight_;
      lin = Vec::Zero(n);
      return true;
    case Kind::Quadratic:
      if (geom.kind() != BregmanGeometry::Kind::Euclidean) return false;
      coef = weight_;
      lin = -weight_ * anchor(state);
      return true;
  }
  return false;
}

// ------------------------------------------------------------- subproblems

Vec solve_prox(const BregmanGeometry& geom, const ActionSet& set, const Regularizer& reg,
               int state, const Vec& linear, double reg_scale, std::span<const BregmanTerm> terms) {
  require(linear.size() == set.dim() && geom.action_dim() == set.dim(),
          "prox: dimensions of geometry, action set and linear term disagree");
  require(linear.allFinite(), "prox: linear term must be finite");
  double coef = 0.0;
  Vec lin;
  if (!reg.mirror_form(geom, state, coef, lin)) {
    require(geom.kind() == BregmanGeometry::Kind::Euclidean,
            "regularizer " + reg.name() + " is not supported with " + geom.name() + " geometry");
    // Euclidean geometry: fall back to the generic solver.
    double mod = reg_scale * reg.mu_h();
    for (const auto& t : terms) mod += t.weight;
    require(mod > 0, "prox subproblem is not strongly convex");
    SmoothObjective obj;
    obj.modulus = mod;
    obj.eval = [&](const Vec& a, Vec* g) {
      double f = linear.dot(a) + reg_scale * reg.value(state, a);
      if (g) *g = linear + reg_scale * reg.gradient(state, a);
      for (const auto& t : terms) {
        f += t.weight * 0.5 * (a - t.center).squaredNorm();
        if (g) *g += t.weight * (a - t.center);
      }
      return f;
    };
    return prox_generic(obj, set, set.center());
  }
  double W = reg_scale * coef;
  for (const auto& t : terms) {
    require(t.weight >= 0, "prox: Bregman weights must be nonnegative");
    W += t.weight;
  }
  require(W > 0, "prox subproblem is not strongly convex (total weight on omega is " +
                     std::to_string(W) + ")");
  if (geom.kind() == BregmanGeometry::Kind::Entropy) {
    require(set.kind() == ActionSet::Kind::Simplex, "entropy geometry needs a simplex action set");
    // Logits assembled directly so that small W does not cost precision.
    Vec logits = -(linear + reg_scale * lin) / W;
    for (const auto& t : terms) {
      if (t.weight == 0) continue;
      logits += (t.weight / W) * t.center.unaryExpr([](double x) { return safe_log(x); });
    }
    return softmax_from_logits(logits);
  }
  Vec v = linear + reg_scale * lin;
  for (const auto& t : terms) {
    if (t.weight != 0) v -= t.weight * geom.grad_omega(t.center);
  }
  return geom.mirror_minimize(set, v, W);
}

Vec prox_simplex_entropy(const Vec& g, const Regularizer& reg, int state, double eta, const Vec& a_ref) {
  require(eta > 0, "prox_simplex_entropy: eta must be positive");
  require(reg.kind() == Regularizer::Kind::Null || reg.kind() == Regularizer::Kind::KlToAnchor ||
              reg.kind() == Regularizer::Kind::EntropyBonus,
          "prox_simplex_entropy: regularizer must be null, KL or entropy bonus");
  const int n = static_cast<int>(g.size());
  BregmanTerm t{1.0 / eta, a_ref};
  return solve_prox(BregmanGeometry::entropy(n), ActionSet::simplex(n), reg, state, g, 1.0,
                    std::span<const BregmanTerm>(&t, 1));
}

double gradient_mapping_norm(const ActionSet& set, const Vec& x, const Vec& g, double t) {
  return (x - set.project(x - t * g)).norm() / t;
}

Vec prox_generic(const SmoothObjective& obj, const ActionSet& set, const Vec& x0, const ProxOptions& opt) {
  require(obj.modulus > 0, "prox_generic requires a positive strong convexity modulus");
  require(x0.size() == set.dim(), "prox_generic: start point dimension mismatch");
  Vec x = set.project(x0);
  Vec gx;
  double fx = obj.eval(x, &gx);
  double L = std::max(obj.modulus, 1.0);
  Vec y = x;
  Vec gy = gx;
  double fy = fx;
  Vec best = x;
  double best_res = gradient_mapping_norm(set, x, gx, 1.0 / L);
  if (best_res <= opt.tol) return x;

  for (int it = 0; it < opt.max_iter; ++it) {
    // Backtracking on the local Lipschitz estimate.
    Vec z;
    double fz;
    Vec gz;
    for (;;) {
      z = set.project(y - gy / L);
      Vec d = z - y;
      fz = obj.eval(z, &gz);
      if (fz <= fy + gy.dot(d) + 0.5 * L * d.squaredNorm() + 1e-14 * std::abs(fy)) break;
      L *= 2.0;
      if (!std::isfinite(L) || L > 1e300) throw ConvergenceFailure("prox_generic: step size collapsed", best, best_res);
    }
    double res = gradient_mapping_norm(set, z, gz, 1.0 / L);
    if (res < best_res) {
      best_res = res;
      best = z;
    }
    if (res <= opt.tol) return z;
    double q = std::min(obj.modulus / L, 1.0);
    double mom = (1.0 - std::sqrt(q)) / (1.0 + std::sqrt(q));
    // Function-value restart keeps the method monotone on hard instances.
    if (fz > fx) {
      y = x;
      gy = gx;
      fy = fx;
      continue;
    }
    Vec y_next = z + mom * (z - x);
    y_next = set.project(y_next);
    x = z;
    fx = fz;
    gx = gz;
    y = y_next;
    fy = obj.eval(y, &gy);
    L = std::max(obj.modulus, 0.9 * L);
  }
  throw ConvergenceFailure("prox_generic: iteration cap reached", best, best_res);
}

}  // namespace polopt
