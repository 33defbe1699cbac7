#ifndef DYNBN_FILTER_HPP
#define DYNBN_FILTER_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dynbn/dglm.hpp"
#include "dynbn/divergence.hpp"
#include "dynbn/gauss.hpp"
#include "dynbn/graph.hpp"
#include "dynbn/oracle.hpp"

namespace dynbn::filter {

/// child = coeffs * stacked(parents) + intercept + noise.  A conditional with
/// no parents declares a root prior N(intercept, noise_cov).
struct LinearGaussianConditional {
  std::string child;
  std::vector<std::string> parents;
  Eigen::MatrixXd coeffs;     // child_dim x total parent dim
  Eigen::VectorXd intercept;  // child_dim
  Eigen::MatrixXd noise_cov;  // child_dim x child_dim
};

/// One observation: family, optional variance parameter, design coefficients
/// per variable (all of which must lie in a single clique) and the value.
struct Observation {
  dglm::Family family = dglm::Family::Normal;
  double V = 1.0;
  std::map<std::string, Eigen::VectorXd> design;
  double y = 0.0;
  std::optional<int> clique_hint;
};

struct ScenarioStep {
  graph::Dag dag;
  std::vector<LinearGaussianConditional> conditionals;
  std::vector<Observation> observations;
  std::vector<std::string> frontier;  // carried to the next step
};

struct Scenario {
  int version = 1;
  std::vector<ScenarioStep> steps;
};

/// Joint Gaussian over the variables inherited from the previous step.
struct FrontierPrior {
  std::vector<std::string> variables;  // previous step's frontier, in its order
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

struct DiagnosticsReport {
  double dH_lambda = 0.0;
  double dV_lower = 0.0;
  double dV_upper = 0.0;
  bool dh_converged = true;
  std::optional<divergence::ErrorBoundReport> error_bound;  // Poisson only
};

struct ObservationRecord {
  int clique_index = -1;
  dglm::Family family = dglm::Family::Normal;
  double y = 0.0;
  gauss::LambdaBelief prior;
  gauss::LambdaBelief posterior;
  double gain = 0.0;
  bool skipped = false;
  std::string note;
  std::optional<DiagnosticsReport> diagnostics;
};

struct StepRecord {
  gauss::TreeBelief posterior;
  std::vector<ObservationRecord> observations;
};

struct Trajectory {
  std::vector<StepRecord> steps;
};

enum class ErrorPolicy { Abort, SkipAndFlag };

struct RunOptions {
  bool diagnostics = true;
  ErrorPolicy error_policy = ErrorPolicy::Abort;
  int grid_cap = 1 << 18;  // max quadrature grid points for diagnostics
  int root = 0;            // propagation root clique
};

/// Full validation: schema-level invariants, junction-tree containment of
/// frontiers and observation designs, acyclic conditionals.  Returns one
/// junction tree per step (inherited frontiers forced into one clique).
/// Throws ScenarioError with the offending step in the message.
std::vector<graph::JunctionTree> validate_scenario(const Scenario& scenario);

/// Gaussian joint implied by a frontier prior plus linear-Gaussian
/// conditionals, composed in topological order.
void compose_joint(const ScenarioStep& step, const std::optional<FrontierPrior>& frontier,
                   std::vector<std::string>* order, Eigen::VectorXd* mean,
                   Eigen::MatrixXd* cov);

/// Tree belief whose clique marginals (and separator stores) are the
/// marginals of the implied joint.
gauss::TreeBelief init_step(const ScenarioStep& step,
                            const std::optional<FrontierPrior>& frontier_prior);

/// Per observed clique: lambda prior, family update, clique conditioning;
/// then one collect/distribute pass.  Observations listed for the same clique
/// chain on its evolving belief.
std::pair<gauss::TreeBelief, std::vector<ObservationRecord>> assimilate(
    const gauss::TreeBelief& tree_belief, const std::vector<Observation>& observations,
    const RunOptions& options = {});

/// Extract the calibrated frontier marginal and open the next step with it.
gauss::TreeBelief evolve(const gauss::TreeBelief& tree_belief,
                         const std::vector<std::string>& frontier,
                         const ScenarioStep& next_step);

Trajectory run(const Scenario& scenario, const RunOptions& options = {});

}  // namespace dynbn::filter

#endif  // DYNBN_FILTER_HPP
