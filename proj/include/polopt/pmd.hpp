#pragma once

#include "polopt/schedule.hpp"
#include "polopt/trace.hpp"

namespace polopt {

// pi_{k+1}(s) = argmin_a <Q_0(s), a> + h^a(s) + (1/eta_k) D(pi_k(s), a).
PolicyTable pmd_step_exact(const TabularMdp& mdp, const PolicyTable& pi_k, const ValueFunctions& vals,
                           const BregmanGeometry& geom, const Regularizer& reg, double eta_k);

ExactTrace pmd_run_exact(const TabularMdp& mdp, const PolicyTable& pi_0, const BregmanGeometry& geom,
                         const Regularizer& reg, const PmdSchedule& schedule, int k_max,
                         const ExactOptions& options = {});

// argmin over the simplex of <L_0(s), a> + h^a(s) + (1/eta_k) omega(a), with L_0
// the augmented model at the vertices.
Vec pmd_step_finite_fa(const QModel& model, const BregmanGeometry& geom, const Regularizer& reg, double eta_k,
                       const StatePoint& s);

// argmin over the action set of L(s, a) + h^a(s) + (1/eta_k) omega(a).
Vec pmd_step_continuous_fa(const QModel& model, const BregmanGeometry& geom, const Regularizer& reg, double eta_k,
                           const StatePoint& s, const ActionSet& set);

// Algorithm with function approximation over a finite action set. Each
// iteration fits the augmented value on a fresh dataset; the next policy is
// defined by that fit alone.
FaTrace pmd_run_finite_fa(const FaProblem& problem, const StatePolicy& pi_0, const BregmanGeometry& geom,
                          const PmdSchedule& schedule, const EvalConfig& eval, int k_max, const Rng& rng);

FaTrace pmd_run_continuous(const FaProblem& problem, const StatePolicy& pi_0, const BregmanGeometry& geom,
                           const PmdSchedule& schedule, const EvalConfig& eval, int k_max,
                           const ExplorationNoise& noise, const Rng& rng);

}  // namespace polopt
