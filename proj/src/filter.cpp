#include "dynbn/filter.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>

#include "dynbn/errors.hpp"
#include "dynbn/logging.hpp"

namespace dynbn::filter {

namespace {

std::string step_tag(int step) {
  return "step " + std::to_string(step + 1);
}

// Variables defined by a conditional vs inherited through the frontier.
struct StepLayout {
  std::map<std::string, int> dims;
  std::set<std::string> conditioned;  // defined by a conditional in this step
  std::set<std::string> inherited;    // everything else (must match prior frontier)
};

StepLayout layout_of(const ScenarioStep& step) {
  StepLayout lay;
  for (const auto& v : step.dag.variables) lay.dims[v.id] = v.dim;
  for (const auto& c : step.conditionals) lay.conditioned.insert(c.child);
  for (const auto& v : step.dag.variables)
    if (!lay.conditioned.count(v.id)) lay.inherited.insert(v.id);
  return lay;
}

void validate_step_schema(const ScenarioStep& step, int step_index,
                          const std::vector<std::string>& prev_frontier) {
  const std::string tag = step_tag(step_index);
  try {
    step.dag.validate();
  } catch (const StructuralError& e) {
    throw ScenarioError(tag + ": " + e.what());
  }
  const StepLayout lay = layout_of(step);

  std::set<std::string> defined;
  for (const auto& c : step.conditionals) {
    if (!lay.dims.count(c.child))
      throw ScenarioError(tag + ": conditional for undeclared variable '" + c.child + "'");
    if (!defined.insert(c.child).second)
      throw ScenarioError(tag + ": variable '" + c.child + "' has two conditionals");
    const int child_dim = lay.dims.at(c.child);
    int parent_dim = 0;
    for (const auto& p : c.parents) {
      if (!lay.dims.count(p))
        throw ScenarioError(tag + ": conditional parent '" + p + "' not declared");
      parent_dim += lay.dims.at(p);
    }
    if (c.intercept.size() != child_dim)
      throw ScenarioError(tag + ": intercept dimension mismatch for '" + c.child + "'");
    if (c.coeffs.rows() != child_dim || c.coeffs.cols() != parent_dim)
      throw ScenarioError(tag + ": coefficient shape mismatch for '" + c.child + "'");
    if (c.noise_cov.rows() != child_dim || c.noise_cov.cols() != child_dim)
      throw ScenarioError(tag + ": noise covariance shape mismatch for '" + c.child + "'");
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (c.noise_cov + c.noise_cov.transpose()));
    if (llt.info() != Eigen::Success)
      throw ScenarioError(tag + ": noise covariance for '" + c.child +
                          "' is not positive definite");
  }

  // Edges must mirror the conditional structure exactly.
  std::set<std::pair<std::string, std::string>> expected;
  for (const auto& c : step.conditionals)
    for (const auto& p : c.parents) expected.insert({p, c.child});
  std::set<std::pair<std::string, std::string>> declared(step.dag.edges.begin(),
                                                         step.dag.edges.end());
  if (declared != expected)
    throw ScenarioError(tag + ": dag edges must match the conditional parent lists");

  // Inherited variables are exactly the previous frontier.
  const std::set<std::string> prev(prev_frontier.begin(), prev_frontier.end());
  if (lay.inherited != prev) {
    if (step_index == 0)
      throw ScenarioError(tag + ": every first-step variable needs a conditional");
    throw ScenarioError(tag + ": inherited variables must match the previous frontier");
  }

  for (const auto& f : step.frontier)
    if (!lay.dims.count(f))
      throw ScenarioError(tag + ": frontier variable '" + f + "' not declared");
  if (!step.frontier.empty()) {
    std::set<std::string> uniq(step.frontier.begin(), step.frontier.end());
    if (uniq.size() != step.frontier.size())
      throw ScenarioError(tag + ": duplicate frontier variable");
  }

  for (std::size_t i = 0; i < step.observations.size(); ++i) {
    const auto& obs = step.observations[i];
    const std::string otag = tag + ", observation " + std::to_string(i + 1);
    if (obs.design.empty()) throw ScenarioError(otag + ": empty design vector");
    bool any_nonzero = false;
    for (const auto& [var, coeffs] : obs.design) {
      if (!lay.dims.count(var))
        throw ScenarioError(otag + ": design references undeclared variable '" + var + "'");
      if (coeffs.size() != lay.dims.at(var))
        throw ScenarioError(otag + ": design block for '" + var + "' has wrong dimension");
      if (coeffs.cwiseAbs().maxCoeff() > 0.0) any_nonzero = true;
    }
    if (!any_nonzero) throw ScenarioError(otag + ": design vector is identically zero");
    if (obs.family != dglm::Family::Poisson && !(obs.V > 0.0))
      throw ScenarioError(otag + ": variance parameter must be positive");
    if (obs.family == dglm::Family::Poisson &&
        (obs.y < 0.0 || obs.y != std::floor(obs.y)))
      throw ScenarioError(otag + ": Poisson observation must be a nonnegative integer");
  }
}

std::vector<std::string> design_support(const Observation& obs) {
  std::vector<std::string> vars;
  for (const auto& [var, coeffs] : obs.design) vars.push_back(var);
  return vars;
}

graph::JunctionTree build_step_tree(const ScenarioStep& step,
                                    const std::vector<std::string>& prev_frontier) {
  std::vector<std::vector<std::string>> extra;
  if (prev_frontier.size() > 1) extra.push_back(prev_frontier);
  return graph::build_junction_tree(step.dag, extra);
}

}  // namespace

std::vector<graph::JunctionTree> validate_scenario(const Scenario& scenario) {
  if (scenario.version != 1)
    throw ScenarioError("unsupported scenario version " + std::to_string(scenario.version));
  if (scenario.steps.empty()) throw ScenarioError("scenario has no steps");

  std::vector<graph::JunctionTree> trees;
  std::vector<std::string> prev_frontier;
  for (int s = 0; s < static_cast<int>(scenario.steps.size()); ++s) {
    const auto& step = scenario.steps[s];
    validate_step_schema(step, s, prev_frontier);
    graph::JunctionTree tree = build_step_tree(step, prev_frontier);

    for (std::size_t i = 0; i < step.observations.size(); ++i) {
      const auto& obs = step.observations[i];
      const std::string otag = step_tag(s) + ", observation " + std::to_string(i + 1);
      const int clique = tree.containing_clique(design_support(obs));
      if (clique < 0)
        throw ScenarioError(otag + ": design variables do not lie in a single clique");
      if (obs.clique_hint) {
        const int hint = *obs.clique_hint;
        if (hint < 0 || hint >= static_cast<int>(tree.cliques.size()))
          throw ScenarioError(otag + ": clique hint out of range");
        const auto& members = tree.cliques[hint].members;
        for (const auto& var : design_support(obs))
          if (!std::binary_search(members.begin(), members.end(), var))
            throw ScenarioError(otag + ": hinted clique does not contain '" + var + "'");
      }
    }
    const bool last = s + 1 == static_cast<int>(scenario.steps.size());
    if (!last) {
      if (step.frontier.empty())
        throw ScenarioError(step_tag(s) + ": a non-final step needs a nonempty frontier");
      std::vector<std::string> f = step.frontier;
      std::sort(f.begin(), f.end());
      if (tree.containing_clique(f) < 0)
        throw ScenarioError(step_tag(s) +
                            ": frontier does not lie in a single clique of the junction tree");
    }
    trees.push_back(std::move(tree));
    prev_frontier = step.frontier;
  }
  return trees;
}

void compose_joint(const ScenarioStep& step, const std::optional<FrontierPrior>& frontier,
                   std::vector<std::string>* order, Eigen::VectorXd* mean,
                   Eigen::MatrixXd* cov) {
  std::map<std::string, int> dims;
  for (const auto& v : step.dag.variables) dims[v.id] = v.dim;

  // Declaration-order layout of the full state vector.
  order->clear();
  std::map<std::string, int> offset;
  int total = 0;
  for (const auto& v : step.dag.variables) {
    order->push_back(v.id);
    offset[v.id] = total;
    total += v.dim;
  }
  mean->setZero(total);
  cov->setZero(total, total);

  std::set<std::string> placed;
  if (frontier) {
    int fdim = 0;
    for (const auto& id : frontier->variables) {
      if (!dims.count(id))
        throw ScenarioError("inherited variable '" + id + "' missing from the step dag");
      fdim += dims.at(id);
    }
    if (frontier->mean.size() != fdim)
      throw ScenarioError("frontier prior dimension mismatch");
    // Scatter the frontier joint into the step layout.
    std::vector<int> target;
    for (const auto& id : frontier->variables)
      for (int k = 0; k < dims.at(id); ++k) target.push_back(offset.at(id) + k);
    for (int i = 0; i < fdim; ++i) {
      (*mean)[target[i]] = frontier->mean[i];
      for (int j = 0; j < fdim; ++j) (*cov)(target[i], target[j]) = frontier->cov(i, j);
    }
    for (const auto& id : frontier->variables) placed.insert(id);
  }

  // Topological sweep over the conditionals.
  std::deque<const LinearGaussianConditional*> pending;
  for (const auto& c : step.conditionals) pending.push_back(&c);
  std::size_t stall = 0;
  while (!pending.empty()) {
    const LinearGaussianConditional* c = pending.front();
    pending.pop_front();
    bool ready = true;
    for (const auto& p : c->parents)
      if (!placed.count(p)) {
        ready = false;
        break;
      }
    if (!ready) {
      pending.push_back(c);
      if (++stall > pending.size())
        throw ScenarioError("conditionals for step are not acyclic/resolvable");
      continue;
    }
    stall = 0;

    std::vector<int> par;
    for (const auto& p : c->parents)
      for (int k = 0; k < dims.at(p); ++k) par.push_back(offset.at(p) + k);
    const int child_off = offset.at(c->child);
    const int child_dim = dims.at(c->child);
    const int pdim = static_cast<int>(par.size());

    Eigen::VectorXd mu_par(pdim);
    for (int i = 0; i < pdim; ++i) mu_par[i] = (*mean)[par[i]];
    const Eigen::VectorXd mu_child = c->coeffs * mu_par + c->intercept;
    for (int i = 0; i < child_dim; ++i) (*mean)[child_off + i] = mu_child[i];

    // Cross covariance with everything placed so far, then own block.
    Eigen::MatrixXd cov_par_all(pdim, total);
    for (int i = 0; i < pdim; ++i) cov_par_all.row(i) = cov->row(par[i]);
    const Eigen::MatrixXd cross = c->coeffs * cov_par_all;  // child_dim x total
    for (int i = 0; i < child_dim; ++i) {
      cov->row(child_off + i) = cross.row(i);
      cov->col(child_off + i) = cross.row(i).transpose();
    }
    Eigen::MatrixXd cov_par(pdim, pdim);
    for (int i = 0; i < pdim; ++i)
      for (int j = 0; j < pdim; ++j) cov_par(i, j) = (*cov)(par[i], par[j]);
    const Eigen::MatrixXd own =
        c->coeffs * cov_par * c->coeffs.transpose() + c->noise_cov;
    for (int i = 0; i < child_dim; ++i)
      for (int j = 0; j < child_dim; ++j)
        (*cov)(child_off + i, child_off + j) = own(i, j);

    placed.insert(c->child);
  }
  *cov = gauss::symmetrized(*cov);
  for (const auto& [id, d] : dims)
    if (!placed.count(id))
      throw ScenarioError("variable '" + id + "' has neither a conditional nor a frontier prior");
}

namespace {

gauss::TreeBelief beliefs_from_joint(const graph::JunctionTree& tree,
                                     const std::vector<std::string>& order,
                                     const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  std::map<std::string, int> offset;
  std::map<std::string, int> dims;
  int total = 0;
  for (const auto& v : tree.variables) dims[v.id] = v.dim;
  for (const auto& id : order) {
    offset[id] = total;
    total += dims.at(id);
  }

  auto extract = [&](const std::vector<std::string>& members, Eigen::VectorXd* mu,
                     Eigen::MatrixXd* sigma, std::vector<int>* block_dims) {
    std::vector<int> sel;
    if (block_dims != nullptr) block_dims->clear();
    for (const auto& id : members) {
      for (int k = 0; k < dims.at(id); ++k) sel.push_back(offset.at(id) + k);
      if (block_dims != nullptr) block_dims->push_back(dims.at(id));
    }
    mu->resize(sel.size());
    sigma->resize(sel.size(), sel.size());
    for (std::size_t i = 0; i < sel.size(); ++i) {
      (*mu)[i] = mean[sel[i]];
      for (std::size_t j = 0; j < sel.size(); ++j) (*sigma)(i, j) = cov(sel[i], sel[j]);
    }
  };

  gauss::TreeBelief tb;
  tb.tree = tree;
  for (const auto& clique : tree.cliques) {
    gauss::CliqueBelief belief;
    belief.clique = clique;
    extract(clique.members, &belief.mean, &belief.cov, &belief.dims);
    belief.validate();
    tb.beliefs.push_back(std::move(belief));
  }
  for (std::size_t i = 0; i < tree.cliques.size(); ++i) {
    gauss::SeparatorBelief sep;
    sep.members = tree.separators[i];
    if (!sep.members.empty()) extract(sep.members, &sep.mean, &sep.cov, nullptr);
    tb.separators.push_back(std::move(sep));
  }
  return tb;
}

}  // namespace

gauss::TreeBelief init_step(const ScenarioStep& step,
                            const std::optional<FrontierPrior>& frontier_prior) {
  std::vector<std::string> prev;
  if (frontier_prior) prev = frontier_prior->variables;
  const graph::JunctionTree tree = build_step_tree(step, prev);

  std::vector<std::string> order;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  compose_joint(step, frontier_prior, &order, &mean, &cov);
  try {
    gauss::check_psd(cov, "implied joint");
  } catch (const ConditioningError& e) {
    throw ScenarioError(std::string("implied joint covariance invalid: ") + e.what());
  }
  return beliefs_from_joint(tree, order, mean, cov);
}

namespace {

DiagnosticsReport make_diagnostics(const Observation& obs, const gauss::LambdaBelief& prior,
                                   const dglm::DglmPosterior& post, const RunOptions& options) {
  DiagnosticsReport diag;
  switch (obs.family) {
    case dglm::Family::Normal: {
      // Exact case: the conjugate Normal posterior is the DGLM posterior.
      diag.dH_lambda = 0.0;
      break;
    }
    case dglm::Family::Poisson:
    case dglm::Family::LogNormal: {
      oracle::GridSpec gspec;
      gspec.max_points = options.grid_cap;
      const oracle::GridPosterior truth = oracle::grid_posterior_lambda(
          prior.m, prior.w2, obs.family, obs.y, obs.V, gspec);
      const divergence::Density1D tab =
          divergence::Density1D::tabulated(truth.grid, truth.density);
      const divergence::Density1D approx =
          divergence::Density1D::normal(post.m_star, post.w2_star);
      const divergence::QuadratureResult q = divergence::quadrature_hellinger(tab, approx);
      diag.dH_lambda = q.value;
      diag.dh_converged = q.converged;
      break;
    }
  }
  const auto [lo, hi] = divergence::variation_bounds(diag.dH_lambda);
  diag.dV_lower = lo;
  diag.dV_upper = hi;
  if (obs.family == dglm::Family::Poisson)
    diag.error_bound =
        divergence::error_bound(prior.m, prior.w2, static_cast<long>(obs.y));
  return diag;
}

}  // namespace

std::pair<gauss::TreeBelief, std::vector<ObservationRecord>> assimilate(
    const gauss::TreeBelief& tree_belief, const std::vector<Observation>& observations,
    const RunOptions& options) {
  gauss::TreeBelief tb = tree_belief;
  std::vector<ObservationRecord> records;
  std::vector<int> updated;

  for (std::size_t i = 0; i < observations.size(); ++i) {
    const Observation& obs = observations[i];
    ObservationRecord rec;
    rec.family = obs.family;
    rec.y = obs.y;

    const std::vector<std::string> support = design_support(obs);
    int clique = obs.clique_hint.value_or(tb.tree.containing_clique(support));
    if (clique < 0 || clique >= static_cast<int>(tb.tree.cliques.size()))
      throw ScenarioError("observation " + std::to_string(i + 1) +
                          ": design variables do not lie in a single clique");
    rec.clique_index = clique;
    gauss::CliqueBelief& belief = tb.beliefs[clique];

    // Stack the per-variable blocks into the clique layout.
    gauss::DesignVector design;
    design.clique_index = clique;
    design.coeffs = Eigen::VectorXd::Zero(belief.dim());
    for (const auto& [var, coeffs] : obs.design) {
      const auto [off, len] = belief.block_of(var);
      design.coeffs.segment(off, len) = coeffs;
    }

    try {
      rec.prior = gauss::lambda_prior(belief, design);
      const dglm::ObservationModel model{obs.family, obs.V, "identity", clique, design};
      const dglm::DglmPosterior post = dglm::update(model, rec.prior.m, rec.prior.w2, obs.y);
      rec.posterior = {post.m_star, post.w2_star};
      rec.gain = post.gain;
      if (options.diagnostics) rec.diagnostics = make_diagnostics(obs, rec.prior, post, options);
      belief = gauss::condition_on_lambda(belief, design, rec.posterior);
      updated.push_back(clique);
    } catch (const DomainError& e) {
      if (options.error_policy == ErrorPolicy::Abort)
        throw ModelMismatchError("observation " + std::to_string(i + 1) + " (" +
                                 dglm::family_name(obs.family) + ", y=" + std::to_string(obs.y) +
                                 "): " + e.what());
      rec.skipped = true;
      rec.note = e.what();
      log::warn("skipping observation " + std::to_string(i + 1) + ": " + e.what());
    }
    records.push_back(std::move(rec));
  }

  gauss::TreeBelief out = gauss::collect_distribute(tb, updated, options.root);
  return {std::move(out), std::move(records)};
}

gauss::TreeBelief evolve(const gauss::TreeBelief& tree_belief,
                         const std::vector<std::string>& frontier,
                         const ScenarioStep& next_step) {
  std::vector<std::string> sorted = frontier;
  std::sort(sorted.begin(), sorted.end());
  const int clique = tree_belief.tree.containing_clique(sorted);
  if (clique < 0)
    throw ScenarioError("frontier does not lie in a single calibrated clique");

  FrontierPrior prior;
  prior.variables = frontier;
  std::tie(prior.mean, prior.cov) = tree_belief.beliefs[clique].marginal(frontier);
  return init_step(next_step, prior);
}

Trajectory run(const Scenario& scenario, const RunOptions& options) {
  validate_scenario(scenario);

  Trajectory traj;
  gauss::TreeBelief prior_tree = init_step(scenario.steps[0], std::nullopt);
  for (int s = 0; s < static_cast<int>(scenario.steps.size()); ++s) {
    const ScenarioStep& step = scenario.steps[s];
    try {
      auto [posterior, records] = assimilate(prior_tree, step.observations, options);
      traj.steps.push_back(StepRecord{posterior, std::move(records)});
      if (s + 1 < static_cast<int>(scenario.steps.size()))
        prior_tree = evolve(traj.steps.back().posterior, step.frontier, scenario.steps[s + 1]);
    } catch (const ModelMismatchError& e) {
      throw ModelMismatchError(step_tag(s) + ": " + e.what());
    } catch (const ScenarioError& e) {
      throw ScenarioError(step_tag(s) + ": " + e.what());
    }
  }
  return traj;
}

}  // namespace dynbn::filter
