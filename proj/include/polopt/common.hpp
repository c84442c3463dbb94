#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace polopt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or out-of-domain arguments.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// An iterative solver hit its cap. Carries the best iterate seen.
class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, Vec best, double residual)
      : Error(what), best_(std::move(best)), residual_(residual) {}
  const Vec& best() const { return best_; }
  double residual() const { return residual_; }

 private:
  Vec best_;
  double residual_;
};

// Configuration problems, collected rather than reported one at a time.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "invalid configuration:";
    for (const auto& s : v) out += "\n  - " + s;
    return out;
  }
  std::vector<std::string> violations_;
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidInput(msg);
}

}  // namespace polopt
