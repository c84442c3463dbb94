#include "polopt/policy_eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <numbers>
#include <sstream>

#include "polopt/parallel.hpp"

namespace polopt {

StatePoint state_point(const Environment& env, const Vec& s) { return {env.features(s), env.state_index(s)}; }

// ---------------------------------------------------------------- FeatureMap

FeatureMap FeatureMap::kernel(Mat anchors, int n_frequencies, double bandwidth, std::uint64_t seed,
                              double action_scale, int action_dim, Phase phase) {
  require(anchors.rows() >= 1 && anchors.cols() >= 1, "kernel features need at least one anchor");
  require(n_frequencies >= 1, "kernel features need at least one frequency");
  require(bandwidth > 0 && std::isfinite(bandwidth), "kernel bandwidth must be positive");
  require(action_dim >= 0 && action_dim <= anchors.cols(), "action dimension exceeds the input dimension");
  FeatureMap f;
  f.kind_ = Kind::KernelAnchors;
  f.phase_ = phase;
  f.n_freq_ = n_frequencies;
  f.bandwidth_ = bandwidth;
  f.seed_ = seed;
  f.action_scale_ = action_scale;
  f.action_dim_ = action_dim;
  f.anchors_ = std::move(anchors);
  f.draw();
  return f;
}

FeatureMap FeatureMap::tabular(int n_states, int n_actions) {
  require(n_states >= 1 && n_actions >= 0, "tabular features need a positive state count");
  FeatureMap f;
  f.kind_ = Kind::TabularOneHot;
  f.n_states_ = n_states;
  f.n_actions_ = n_actions;
  f.action_dim_ = n_actions;
  return f;
}

void FeatureMap::draw() {
  const auto dim = anchors_.cols();
  Rng rng(seed_, 0x66656174ull);
  omega_.resize(n_freq_, dim);
  for (int j = 0; j < n_freq_; ++j)
    for (Eigen::Index k = 0; k < dim; ++k) omega_(j, k) = rng.normal() / bandwidth_;
  phase_b_.resize(n_freq_);
  for (int j = 0; j < n_freq_; ++j) phase_b_[j] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  anchor_phi_.resize(phase_ == Phase::CosSin ? 2 * n_freq_ : n_freq_, anchors_.rows());
  for (Eigen::Index i = 0; i < anchors_.rows(); ++i) anchor_phi_.col(i) = phi(anchors_.row(i).transpose());
}

int FeatureMap::size() const {
  if (kind_ == Kind::TabularOneHot) return n_states_ * std::max(1, n_actions_);
  return static_cast<int>(anchors_.rows());
}

Vec FeatureMap::phi(const Vec& z) const {
  Vec t = omega_ * z;
  if (phase_ == Phase::CosSin) {
    Vec out(2 * n_freq_);
    out.head(n_freq_) = t.array().cos();
    out.tail(n_freq_) = t.array().sin();
    return out;
  }
  return std::sqrt(2.0) * (t + phase_b_).array().cos();
}

Vec FeatureMap::input(const StatePoint& s, const Vec& action) const {
  require(action.size() == action_dim_, "feature input: action dimension mismatch");
  Vec z(s.embed.size() + action.size());
  z << s.embed, action_scale_ * action;
  return z;
}

Vec FeatureMap::features(const StatePoint& s, const Vec& action) const {
  if (kind_ == Kind::TabularOneHot) {
    require(s.index >= 0 && s.index < n_states_, "tabular features: state index out of range");
    Vec f = Vec::Zero(size());
    if (n_actions_ == 0) {
      f[s.index] = 1.0;
    } else {
      require(action.size() == n_actions_, "tabular features: action dimension mismatch");
      f.segment(static_cast<Eigen::Index>(s.index) * n_actions_, n_actions_) = action;
    }
    return f;
  }
  Vec z = input(s, action);
  require(z.size() == anchors_.cols(), "kernel features: input dimension mismatch");
  return anchor_phi_.transpose() * phi(z) / n_freq_;
}

Mat FeatureMap::features_batch(const std::vector<StatePoint>& states, const std::vector<Vec>& actions) const {
  require(states.size() == actions.size(), "feature batch: states and actions differ in count");
  const auto n = static_cast<Eigen::Index>(states.size());
  if (kind_ == Kind::TabularOneHot) {
    Mat F(n, size());
    for (Eigen::Index i = 0; i < n; ++i) F.row(i) = features(states[i], actions[i]).transpose();
    return F;
  }
  Mat P(n, anchor_phi_.rows());
  for (Eigen::Index i = 0; i < n; ++i) P.row(i) = phi(input(states[i], actions[i])).transpose();
  return P * anchor_phi_ / n_freq_;
}

Vec FeatureMap::lift(const Vec& theta) const {
  if (kind_ == Kind::TabularOneHot) return theta;
  require(theta.size() == anchors_.rows(), "lift: weight vector has the wrong length");
  return anchor_phi_ * theta / n_freq_;
}

Mat FeatureMap::lift(const Mat& theta) const {
  if (kind_ == Kind::TabularOneHot) return theta;
  return anchor_phi_ * theta / n_freq_;
}

double FeatureMap::eval_lifted(const Vec& w, const Vec& z) const { return w.dot(phi(z)); }

Vec FeatureMap::eval_lifted(const Mat& w, const Vec& z) const { return w.transpose() * phi(z); }

Vec FeatureMap::action_gradient_lifted(const Vec& w, const Vec& z) const {
  Vec t = omega_ * z;
  Vec inner(n_freq_);
  if (phase_ == Phase::CosSin) {
    inner = -w.head(n_freq_).cwiseProduct(Vec(t.array().sin())) + w.tail(n_freq_).cwiseProduct(Vec(t.array().cos()));
  } else {
    inner = -std::sqrt(2.0) * w.cwiseProduct(Vec((t + phase_b_).array().sin()));
  }
  Vec gz = omega_.transpose() * inner;
  return action_scale_ * gz.tail(action_dim_);
}

std::string FeatureMap::to_json() const {
  nlohmann::ordered_json j;
  if (kind_ == Kind::TabularOneHot) {
    j["kind"] = "tabular";
    j["n_states"] = n_states_;
    j["n_actions"] = n_actions_;
    return j.dump();
  }
  j["kind"] = "kernel";
  j["phase"] = phase_ == Phase::CosSin ? "cos-sin" : "random-phase";
  j["seed"] = seed_;
  j["n_frequencies"] = n_freq_;
  j["bandwidth"] = bandwidth_;
  j["action_scale"] = action_scale_;
  j["action_dim"] = action_dim_;
  j["anchor_rows"] = anchors_.rows();
  j["anchor_cols"] = anchors_.cols();
  std::vector<double> a;
  for (Eigen::Index r = 0; r < anchors_.rows(); ++r)
    for (Eigen::Index c = 0; c < anchors_.cols(); ++c) a.push_back(anchors_(r, c));
  j["anchors"] = a;
  return j.dump();
}

FeatureMap FeatureMap::from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    if (j.at("kind") == "tabular") return tabular(j.at("n_states").get<int>(), j.at("n_actions").get<int>());
    auto rows = j.at("anchor_rows").get<Eigen::Index>();
    auto cols = j.at("anchor_cols").get<Eigen::Index>();
    auto a = j.at("anchors").get<std::vector<double>>();
    require(static_cast<Eigen::Index>(a.size()) == rows * cols, "feature map JSON: anchor array has the wrong size");
    Mat anchors(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) anchors(r, c) = a[static_cast<std::size_t>(r * cols + c)];
    Phase ph = j.at("phase") == "cos-sin" ? Phase::CosSin : Phase::RandomPhase;
    return kernel(std::move(anchors), j.at("n_frequencies").get<int>(), j.at("bandwidth").get<double>(),
                  j.at("seed").get<std::uint64_t>(), j.at("action_scale").get<double>(), j.at("action_dim").get<int>(),
                  ph);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("feature map JSON: ") + e.what());
  }
}

double FeatureMap::median_bandwidth(const Mat& points) {
  const Eigen::Index n = std::min<Eigen::Index>(points.rows(), 256);
  std::vector<double> d;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double v = (points.row(i) - points.row(j)).norm();
      if (v > 0) d.push_back(v);
    }
  if (d.empty()) return 1.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

// ---------------------------------------------------------------- datasets

void EvalDataset::dump_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset file " + path);
  out << "# policy_id=" << policy_id << " burn_in=" << burn_in << " truncation=" << truncation
      << " n_samples=" << samples.size() << " env_steps=" << env_steps << "\n";
  const auto ds = samples.empty() ? 0 : samples[0].state.size();
  const auto da = samples.empty() ? 0 : samples[0].action.size();
  for (Eigen::Index i = 0; i < ds; ++i) out << "s" << i << ",";
  for (Eigen::Index i = 0; i < da; ++i) out << "a" << i << ",";
  out << "y\n";
  out << std::setprecision(17);
  for (const auto& smp : samples) {
    for (Eigen::Index i = 0; i < smp.state.size(); ++i) out << smp.state[i] << ",";
    for (Eigen::Index i = 0; i < smp.action.size(); ++i) out << smp.action[i] << ",";
    out << smp.y << "\n";
  }
}

EvalDataset EvalDataset::load_csv(const std::string& path, const Environment* env) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read dataset file " + path);
  EvalDataset d;
  std::string line;
  std::getline(in, line);
  require(line.rfind("# ", 0) == 0, "dataset file lacks its metadata line");
  {
    std::istringstream meta(line.substr(2));
    std::string kv;
    while (meta >> kv) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) continue;
      auto k = kv.substr(0, eq), v = kv.substr(eq + 1);
      if (k == "policy_id") d.policy_id = v;
      else if (k == "burn_in") d.burn_in = std::stoi(v);
      else if (k == "truncation") d.truncation = std::stoi(v);
      else if (k == "env_steps") d.env_steps = std::stoll(v);
    }
  }
  std::getline(in, line);
  int ds = 0, da = 0;
  {
    std::istringstream hdr(line);
    std::string col;
    while (std::getline(hdr, col, ',')) {
      if (col[0] == 's') ++ds;
      else if (col[0] == 'a') ++da;
    }
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(row, cell, ',')) v.push_back(std::stod(cell));
    require(static_cast<int>(v.size()) == ds + da + 1, "dataset row has the wrong number of columns");
    Sample s;
    s.state = Eigen::Map<Vec>(v.data(), ds);
    s.action = Eigen::Map<Vec>(v.data() + ds, da);
    s.y = v.back();
    s.point = env ? state_point(*env, s.state) : StatePoint{s.state, -1};
    d.samples.push_back(std::move(s));
  }
  return d;
}

EvalDataset sample_dataset(const Environment& env, const StatePolicy& pi, const Regularizer& reg,
                           const SamplingOptions& opt, const ValueEstimate& bootstrap, const Rng& rng) {
  require(opt.n_samples >= 1 && opt.burn_in >= 0 && opt.truncation >= 1, "sampling options out of range");
  const ActionSet& set = env.action_set();
  const bool finite = set.kind() == ActionSet::Kind::Simplex;
  const double gamma = env.gamma();
  EvalDataset data;
  data.burn_in = opt.burn_in;
  data.truncation = opt.truncation;
  data.policy_id = opt.policy_id;
  data.samples.resize(static_cast<std::size_t>(opt.n_samples));
  std::vector<long long> steps(static_cast<std::size_t>(opt.n_samples), 0);

  auto reg_index = [&](const Vec& s) { return std::max(0, env.state_index(s)); };

  parallel_for(static_cast<std::size_t>(opt.n_samples), [&](std::size_t i) {
    Rng r = rng.substream(i);
    auto behave = [&](const Vec& s, Vec* target) {
      Vec a = pi(s);
      if (target) *target = a;
      if (finite) return sample_vertex(a, r);
      if (opt.noise_std > 0) {
        for (Eigen::Index k = 0; k < a.size(); ++k) a[k] += opt.noise_std * r.normal();
        a = set.project(a);
      }
      return a;
    };
    long long n_steps = 0;
    Vec s = env.reset(r);
    for (int b = 0; b < opt.burn_in; ++b) {
      Transition tr = env.step(s, behave(s, nullptr), r);
      ++n_steps;
      s = (tr.absorbed || env.is_absorbing(tr.next)) ? env.reset(r) : tr.next;
    }
    Sample& out = data.samples[i];
    out.state = s;
    out.point = state_point(env, s);
    out.action = set.sample(r);

    double y = 0.0, disc = 1.0;
    Vec cur = s, act = out.action;
    bool done = false;
    for (int t = 0; t < opt.truncation; ++t) {
      double h = 0.0;
      if (reg.kind() != Regularizer::Kind::Null) h = reg.value(reg_index(cur), pi(cur));
      Transition tr = env.step(cur, act, r);
      ++n_steps;
      y += disc * (tr.cost + h);
      disc *= gamma;
      if (tr.absorbed) {
        y += disc * env.absorbing_cost(tr.next) / (1.0 - gamma);
        done = true;
        break;
      }
      cur = tr.next;
      if (env.episode_cap() > 0 && t + 1 >= env.episode_cap()) break;
      act = behave(cur, nullptr);
    }
    if (!done && bootstrap) y += disc * bootstrap(cur);
    out.y = y;
    steps[i] = n_steps;
  });
  for (auto n : steps) data.env_steps += n;
  return data;
}

// ---------------------------------------------------------------- models

QModel::QModel(std::shared_ptr<const FeatureMap> f, Vec th) : fmap(std::move(f)), theta(std::move(th)) {
  require(fmap != nullptr, "model needs a feature map");
  require(theta.size() == fmap->size(), "model weights do not match the feature map");
  cache();
}

void QModel::cache() {
  if (fmap && fmap->kind() == FeatureMap::Kind::KernelAnchors) lifted_ = fmap->lift(theta);
  if (state_map && state_map->kind() == FeatureMap::Kind::KernelAnchors) lifted_grad_ = state_map->lift(grad_theta);
}

double QModel::value(const StatePoint& s, const Vec& a) const {
  if (fmap->kind() == FeatureMap::Kind::TabularOneHot) return fmap->features(s, a).dot(theta);
  return fmap->eval_lifted(lifted_, fmap->input(s, a));
}

Vec QModel::q0(const StatePoint& s, int n_actions) const {
  if (fmap->kind() == FeatureMap::Kind::TabularOneHot) {
    require(s.index >= 0, "tabular model needs a state index");
    return theta.segment(static_cast<Eigen::Index>(s.index) * n_actions, n_actions);
  }
  Vec out(n_actions);
  Vec e = Vec::Zero(n_actions);
  for (int i = 0; i < n_actions; ++i) {
    e[i] = 1.0;
    out[i] = fmap->eval_lifted(lifted_, fmap->input(s, e));
    e[i] = 0.0;
  }
  return out;
}

Vec QModel::action_gradient(const StatePoint& s, const Vec& a) const {
  if (fmap->kind() == FeatureMap::Kind::TabularOneHot)
    return theta.segment(static_cast<Eigen::Index>(s.index) * a.size(), a.size());
  return fmap->action_gradient_lifted(lifted_, fmap->input(s, a));
}

Vec QModel::grad_omega(const StatePoint& s) const {
  require(target == Target::AugmentedL && state_map, "model has no omega-gradient part");
  if (state_map->kind() == FeatureMap::Kind::TabularOneHot) return grad_theta.row(s.index).transpose();
  return state_map->eval_lifted(lifted_grad_, s.embed);
}

double evaluate_model(const QModel& model, const StatePoint& s, const Vec& a) {
  double v = model.value(s, a);
  // L = Q - <grad omega(pi_k(s)) / eta_k, a>: the linear part of the
  // Bregman term moved into the target.
  if (model.target == QModel::Target::AugmentedL) v -= model.grad_omega(s).dot(a);
  return v;
}

Mat ridge_solve(const Mat& Phi, const Mat& Y, double lambda) {
  require(lambda > 0, "ridge lambda must be positive");
  require(Phi.rows() == Y.rows(), "ridge: design and targets differ in rows");
  const Eigen::Index n = Phi.rows(), p = Phi.cols();
  const bool primal = p <= n;
  Mat G = primal ? Mat(Phi.transpose() * Phi) : Mat(Phi * Phi.transpose());
  Mat rhs = primal ? Mat(Phi.transpose() * Y) : Y;
  double shift = lambda;
  for (int attempt = 0; attempt < 20; ++attempt) {
    Mat K = G;
    K.diagonal().array() += shift;
    Eigen::LLT<Mat> llt(K);
    if (llt.info() == Eigen::Success) {
      Mat X = llt.solve(rhs);
      Mat r = rhs - K * X;
      X += llt.solve(r);
      return primal ? X : Mat(Phi.transpose() * X);
    }
    shift *= 10.0;
  }
  throw Error("ridge regression: Gram matrix could not be factored");
}

QModel fit_ridge(const EvalDataset& data, std::shared_ptr<const FeatureMap> fmap, double ridge_lambda) {
  require(fmap != nullptr, "fit_ridge needs a feature map");
  require(ridge_lambda > 0, "ridge lambda must be positive");
  require(!data.samples.empty(), "fit_ridge: empty dataset");
  const auto n = static_cast<Eigen::Index>(data.samples.size());
  if (fmap->kind() == FeatureMap::Kind::TabularOneHot) {
    // Indicator features at vertices give a diagonal Gram matrix.
    bool vertices = true;
    for (const auto& s : data.samples)
      if (s.action.size() > 0 && (s.action.maxCoeff() != 1.0 || s.action.sum() != 1.0)) vertices = false;
    if (vertices) {
      Vec num = Vec::Zero(fmap->size()), den = Vec::Zero(fmap->size());
      for (const auto& s : data.samples) {
        Eigen::Index j;
        if (s.action.size() > 0) {
          s.action.maxCoeff(&j);
          j += static_cast<Eigen::Index>(s.point.index) * s.action.size();
        } else {
          j = s.point.index;
        }
        num[j] += s.y;
        den[j] += 1.0;
      }
      return QModel(fmap, Vec(num.array() / (den.array() + ridge_lambda)));
    }
  }
  std::vector<StatePoint> pts;
  std::vector<Vec> acts;
  Vec y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    pts.push_back(data.samples[static_cast<std::size_t>(i)].point);
    acts.push_back(data.samples[static_cast<std::size_t>(i)].action);
    y[i] = data.samples[static_cast<std::size_t>(i)].y;
  }
  Mat Phi = fmap->features_batch(pts, acts);
  Vec theta = ridge_solve(Phi, y, ridge_lambda).col(0);
  return QModel(fmap, std::move(theta));
}

QModel make_augmented(std::shared_ptr<const FeatureMap> fmap, Vec theta, std::shared_ptr<const FeatureMap> state_map,
                      Mat grad_theta, double eta) {
  QModel m(std::move(fmap), std::move(theta));
  require(state_map != nullptr, "augmented model needs a state feature map");
  require(grad_theta.rows() == state_map->size(), "omega-gradient weights do not match the state map");
  m.target = QModel::Target::AugmentedL;
  m.state_map = std::move(state_map);
  m.grad_theta = std::move(grad_theta);
  m.eta = eta;
  m.cache();
  return m;
}

QModel fit_augmented_L(const EvalDataset& data, const StatePolicy& pi_k, const BregmanGeometry& geom, double eta_k,
                       std::shared_ptr<const FeatureMap> fmap, std::shared_ptr<const FeatureMap> state_map,
                       double ridge_lambda) {
  require(eta_k > 0, "fit_augmented_L: eta must be positive");
  QModel q = fit_ridge(data, fmap, ridge_lambda);
  const auto n = static_cast<Eigen::Index>(data.samples.size());
  const int m = geom.action_dim();
  Mat Y(n, m);
  std::vector<StatePoint> pts;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = data.samples[static_cast<std::size_t>(i)];
    Y.row(i) = (geom.grad_omega(pi_k(s.state)) / eta_k).transpose();
    pts.push_back(s.point);
  }
  Mat grad_theta;
  if (state_map->kind() == FeatureMap::Kind::TabularOneHot) {
    // Per-state averages of exact targets.
    Mat num = Mat::Zero(state_map->size(), m);
    Vec den = Vec::Zero(state_map->size());
    for (Eigen::Index i = 0; i < n; ++i) {
      num.row(pts[static_cast<std::size_t>(i)].index) += Y.row(i);
      den[pts[static_cast<std::size_t>(i)].index] += 1.0;
    }
    grad_theta = num.array().colwise() / (den.array() + ridge_lambda);
  } else {
    std::vector<Vec> none(pts.size(), Vec());
    grad_theta = ridge_solve(state_map->features_batch(pts, none), Y, ridge_lambda);
  }
  return make_augmented(q.fmap, q.theta, std::move(state_map), std::move(grad_theta), eta_k);
}

std::shared_ptr<const FeatureMap> kernel_map_from_data(const EvalDataset& data, int n_anchors, int n_frequencies,
                                                       double bandwidth, std::uint64_t seed, double action_scale) {
  require(!data.samples.empty(), "kernel map: empty dataset");
  const int m = static_cast<int>(data.samples[0].action.size());
  const auto N = std::min<Eigen::Index>(n_anchors, static_cast<Eigen::Index>(data.samples.size()));
  const auto dim = data.samples[0].point.embed.size() + m;
  Mat Z(static_cast<Eigen::Index>(data.samples.size()), dim);
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const auto& s = data.samples[i];
    Z.row(static_cast<Eigen::Index>(i)) << s.point.embed.transpose(), action_scale * s.action.transpose();
  }
  if (bandwidth <= 0) bandwidth = FeatureMap::median_bandwidth(Z);
  return std::make_shared<const FeatureMap>(
      FeatureMap::kernel(Z.topRows(N), n_frequencies, bandwidth, seed, action_scale, m));
}

std::shared_ptr<const FeatureMap> kernel_state_map_from_data(const EvalDataset& data, int n_anchors,
                                                             int n_frequencies, double bandwidth, std::uint64_t seed) {
  require(!data.samples.empty(), "kernel map: empty dataset");
  const auto dim = data.samples[0].point.embed.size();
  Mat Z(static_cast<Eigen::Index>(data.samples.size()), dim);
  for (std::size_t i = 0; i < data.samples.size(); ++i) Z.row(static_cast<Eigen::Index>(i)) = data.samples[i].point.embed.transpose();
  const auto N = std::min<Eigen::Index>(n_anchors, Z.rows());
  if (bandwidth <= 0) bandwidth = FeatureMap::median_bandwidth(Z);
  return std::make_shared<const FeatureMap>(FeatureMap::kernel(Z.topRows(N), n_frequencies, bandwidth, seed, 1.0, 0));
}

// ---------------------------------------------------------------- diagnostics

ErrorReport diagnose_errors(const std::function<QModel(int)>& refit, int R, const ErrorProbe& probe,
                            const std::optional<QModel>& best_in_class) {
  require(R >= 2, "error diagnosis needs at least two refits");
  const auto P = static_cast<Eigen::Index>(probe.states.size());
  require(P >= 1 && probe.weights.size() == P && probe.exact_q0.rows() == P, "error probe is malformed");
  const int nA = static_cast<int>(probe.exact_q0.cols());
  const Vec w = probe.weights / probe.weights.sum();
  std::vector<Mat> fits;
  fits.reserve(static_cast<std::size_t>(R));
  Mat mean = Mat::Zero(P, nA);
  for (int r = 0; r < R; ++r) {
    QModel m = refit(r);
    Mat q(P, nA);
    for (Eigen::Index p = 0; p < P; ++p) q.row(p) = m.q0(probe.states[static_cast<std::size_t>(p)], nA).transpose();
    mean += q / R;
    fits.push_back(std::move(q));
  }
  ErrorReport rep;
  rep.refits = R;
  for (Eigen::Index p = 0; p < P; ++p) rep.varsigma += w[p] * (mean.row(p) - probe.exact_q0.row(p)).lpNorm<Eigen::Infinity>();
  for (const auto& q : fits)
    for (Eigen::Index p = 0; p < P; ++p) {
      double d = (q.row(p) - mean.row(p)).lpNorm<Eigen::Infinity>();
      rep.sigma2 += w[p] * d * d / R;
    }
  if (best_in_class) {
    rep.app = 0.0;
    rep.bia = 0.0;
    for (Eigen::Index p = 0; p < P; ++p) {
      Vec b = best_in_class->q0(probe.states[static_cast<std::size_t>(p)], nA);
      rep.app += w[p] * (b.transpose() - probe.exact_q0.row(p)).lpNorm<Eigen::Infinity>();
      rep.bia += w[p] * (mean.row(p) - b.transpose()).lpNorm<Eigen::Infinity>();
    }
  }
  return rep;
}

}  // namespace polopt
