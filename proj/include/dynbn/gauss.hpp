#ifndef DYNBN_GAUSS_HPP
#define DYNBN_GAUSS_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "dynbn/graph.hpp"

namespace dynbn::gauss {

/// Gaussian marginal over one clique's stacked state blocks, laid out in
/// clique member order.
struct CliqueBelief {
  graph::Clique clique;
  std::vector<int> dims;  // block size per member, same order
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int dim() const { return static_cast<int>(mean.size()); }
  /// (offset, length) of a member's block.
  std::pair<int, int> block_of(const std::string& member) const;
  /// Marginal over a subset of members, in the order given.
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> marginal(
      const std::vector<std::string>& members) const;
  /// Symmetry and positive-semidefiniteness check; throws ConditioningError.
  void validate() const;
};

/// Gaussian belief over a separator, also used as the per-edge message store
/// during propagation.  Empty members means the tree edge does not exist.
struct SeparatorBelief {
  std::vector<std::string> members;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Beliefs for every clique of a junction tree plus one separator belief per
/// tree edge.  Consistent when each separator belief equals the marginal of
/// both endpoint cliques; the joint density then decomposes as the product of
/// clique densities over the product of separator densities.
struct TreeBelief {
  graph::JunctionTree tree;
  std::vector<CliqueBelief> beliefs;
  std::vector<SeparatorBelief> separators;  // aligned with tree.parent_index

  int total_dim() const;
  /// Offset of a variable's block in the full state vector (declaration order).
  int offset_of(const std::string& id) const;
};

/// Linear functional lambda = F' theta over one clique's state.
struct DesignVector {
  int clique_index = 0;
  Eigen::VectorXd coeffs;
};

/// One-dimensional Gaussian belief on lambda.
struct LambdaBelief {
  double m = 0.0;
  double w2 = 1.0;
};

/// Prior mean F'mu and variance F'Sigma F of the linear combination.
LambdaBelief lambda_prior(const CliqueBelief& belief, const DesignVector& design);

/// Condition the clique on a revised Gaussian belief for lambda:
///   mu* = mu + A(m* - m),  Sigma* = Sigma + A(w*^2 - w^2)A',
/// with gain A = Sigma F (F'Sigma F)^{-1}.
CliqueBelief condition_on_lambda(const CliqueBelief& belief, const DesignVector& design,
                                 const LambdaBelief& posterior);

/// Target adopts the source's separator marginal and shifts the rest through
/// its own conditional:
///   mu''_S = mu_S, Sigma''_S = Sigma_S,
///   mu''_R = mu'_R + A(mu_S - mu'_S),
///   Sigma''_R = Sigma'_R + A(Sigma_S - Sigma'_S)A',
///   Sigma''_RS = A Sigma_S,  A = Sigma'_RS (Sigma'_S)^{-1}.
CliqueBelief absorb(const CliqueBelief& target, const CliqueBelief& source,
                    const std::vector<std::string>& separator);

/// Two-sweep propagation: absorb along paths toward the root, then outward,
/// with per-edge separator stores so several cliques may carry fresh partial
/// marginals in one pass.  Calibrated marginals equal the conditionals given
/// all absorbed evidence; roots of other forest components default to their
/// smallest clique index.
TreeBelief collect_distribute(const TreeBelief& tree_belief,
                              const std::vector<int>& updated_cliques, int root);

/// Log joint density at a full state assignment (declaration-order layout):
/// sum of clique log densities minus separator log densities.
double joint_log_density(const TreeBelief& tree_belief, const Eigen::VectorXd& assignment);

// Shared numeric helpers.

/// Symmetric pseudo-inverse with relative eigenvalue tolerance 1e-10.
Eigen::MatrixXd pinv_spd(const Eigen::MatrixXd& m);

/// (M + M')/2.
Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m);

/// Throws ConditioningError if min eigenvalue < -1e-9 * trace.
void check_psd(const Eigen::MatrixXd& m, const std::string& context);

/// Multivariate normal log density.
double logpdf_mvn(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& cov);

}  // namespace dynbn::gauss

#endif  // DYNBN_GAUSS_HPP
