#include "dynbn/gauss.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dynbn/errors.hpp"

namespace dynbn::gauss {

namespace {
constexpr double kDesignFloor = 1e-12;
constexpr double kPinvRelTol = 1e-10;
constexpr double kPsdRelTol = 1e-9;
}  // namespace

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

Eigen::MatrixXd pinv_spd(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(m));
  if (es.info() != Eigen::Success)
    throw ConditioningError("eigendecomposition failed in pseudo-inverse");
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double max_abs = ev.cwiseAbs().maxCoeff();
  const double cutoff = kPinvRelTol * max_abs;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (int i = 0; i < ev.size(); ++i)
    if (max_abs > 0.0 && std::abs(ev[i]) > cutoff) inv[i] = 1.0 / ev[i];
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

void check_psd(const Eigen::MatrixXd& m, const std::string& context) {
  if (m.size() == 0) return;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(m));
  if (es.info() != Eigen::Success)
    throw ConditioningError(context + ": eigendecomposition failed");
  const double min_ev = es.eigenvalues().minCoeff();
  const double scale = std::max(m.trace(), 1e-300);
  if (min_ev < -kPsdRelTol * scale)
    throw ConditioningError(context + ": covariance lost positive semidefiniteness");
}

double logpdf_mvn(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& cov) {
  const int n = static_cast<int>(x.size());
  Eigen::LLT<Eigen::MatrixXd> llt(symmetrized(cov));
  if (llt.info() != Eigen::Success)
    throw ConditioningError("degenerate covariance in Gaussian density");
  const Eigen::VectorXd d = x - mean;
  const Eigen::VectorXd z = llt.matrixL().solve(d);
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * (n * std::log(2.0 * M_PI) + logdet + z.squaredNorm());
}

std::pair<int, int> CliqueBelief::block_of(const std::string& member) const {
  int offset = 0;
  for (std::size_t i = 0; i < clique.members.size(); ++i) {
    if (clique.members[i] == member) return {offset, dims[i]};
    offset += dims[i];
  }
  throw Error("member '" + member + "' not in clique");
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> CliqueBelief::marginal(
    const std::vector<std::string>& members) const {
  std::vector<int> sel;
  for (const auto& m : members) {
    const auto [off, len] = block_of(m);
    for (int k = 0; k < len; ++k) sel.push_back(off + k);
  }
  const int n = static_cast<int>(sel.size());
  Eigen::VectorXd mu(n);
  Eigen::MatrixXd sigma(n, n);
  for (int i = 0; i < n; ++i) {
    mu[i] = mean[sel[i]];
    for (int j = 0; j < n; ++j) sigma(i, j) = cov(sel[i], sel[j]);
  }
  return {mu, sigma};
}

void CliqueBelief::validate() const {
  if (cov.rows() != dim() || cov.cols() != dim())
    throw Error("clique covariance dimension mismatch");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ConditioningError("clique covariance not symmetric");
  check_psd(cov, "clique belief");
}

int TreeBelief::total_dim() const {
  int n = 0;
  for (const auto& v : tree.variables) n += v.dim;
  return n;
}

int TreeBelief::offset_of(const std::string& id) const {
  int off = 0;
  for (const auto& v : tree.variables) {
    if (v.id == id) return off;
    off += v.dim;
  }
  throw Error("unknown variable '" + id + "'");
}

LambdaBelief lambda_prior(const CliqueBelief& belief, const DesignVector& design) {
  if (design.coeffs.size() != belief.dim())
    throw Error("design vector dimension mismatch");
  const double m = design.coeffs.dot(belief.mean);
  const double w2 = design.coeffs.dot(belief.cov * design.coeffs);
  if (w2 <= kDesignFloor)
    throw DegenerateDesignError("design direction carries no variance (F'SF <= 1e-12)");
  return {m, w2};
}

CliqueBelief condition_on_lambda(const CliqueBelief& belief, const DesignVector& design,
                                 const LambdaBelief& posterior) {
  const LambdaBelief prior = lambda_prior(belief, design);
  const Eigen::VectorXd gain = (belief.cov * design.coeffs) / prior.w2;
  CliqueBelief out = belief;
  out.mean = belief.mean + gain * (posterior.m - prior.m);
  out.cov = symmetrized(belief.cov + (posterior.w2 - prior.w2) * (gain * gain.transpose()));
  check_psd(out.cov, "condition_on_lambda");
  return out;
}

namespace {

std::vector<int> indices_of(const CliqueBelief& belief,
                            const std::vector<std::string>& members) {
  std::vector<int> out;
  for (const auto& m : members) {
    const auto [off, len] = belief.block_of(m);
    for (int k = 0; k < len; ++k) out.push_back(off + k);
  }
  return out;
}

Eigen::MatrixXd slice(const Eigen::MatrixXd& m, const std::vector<int>& rows,
                      const std::vector<int>& cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  return out;
}

Eigen::VectorXd slice(const Eigen::VectorXd& v, const std::vector<int>& ix) {
  Eigen::VectorXd out(ix.size());
  for (std::size_t i = 0; i < ix.size(); ++i) out[i] = v[ix[i]];
  return out;
}

}  // namespace

CliqueBelief absorb(const CliqueBelief& target, const CliqueBelief& source,
                    const std::vector<std::string>& separator) {
  const std::vector<int> sep = indices_of(target, separator);
  std::vector<int> rest;
  {
    std::set<int> sep_set(sep.begin(), sep.end());
    for (int i = 0; i < target.dim(); ++i)
      if (!sep_set.count(i)) rest.push_back(i);
  }
  const auto [mu_s, sigma_s] = source.marginal(separator);

  const Eigen::VectorXd mu_s_old = slice(target.mean, sep);
  const Eigen::MatrixXd sigma_s_old = slice(target.cov, sep, sep);
  const Eigen::MatrixXd sigma_rs_old = slice(target.cov, rest, sep);
  const Eigen::MatrixXd gain = sigma_rs_old * pinv_spd(sigma_s_old);

  const Eigen::VectorXd mu_r =
      slice(target.mean, rest) + gain * (mu_s - mu_s_old);
  const Eigen::MatrixXd sigma_r =
      slice(target.cov, rest, rest) + gain * (sigma_s - sigma_s_old) * gain.transpose();
  const Eigen::MatrixXd sigma_rs = gain * sigma_s;

  CliqueBelief out = target;
  for (std::size_t i = 0; i < sep.size(); ++i) {
    out.mean[sep[i]] = mu_s[i];
    for (std::size_t j = 0; j < sep.size(); ++j) out.cov(sep[i], sep[j]) = sigma_s(i, j);
  }
  for (std::size_t i = 0; i < rest.size(); ++i) {
    out.mean[rest[i]] = mu_r[i];
    for (std::size_t j = 0; j < rest.size(); ++j) out.cov(rest[i], rest[j]) = sigma_r(i, j);
    for (std::size_t j = 0; j < sep.size(); ++j) {
      out.cov(rest[i], sep[j]) = sigma_rs(i, j);
      out.cov(sep[j], rest[i]) = sigma_rs(i, j);
    }
  }
  out.cov = symmetrized(out.cov);
  check_psd(out.cov, "absorb");
  return out;
}

namespace {

struct EdgeUpdate {
  TreeBelief* tb;

  // Multiplies clique `into` by N(x_S; new)/N(x_S; store) in canonical form
  // and advances the edge store.  When the store still equals the target's
  // own separator marginal this is exactly the absorb update above.
  void operator()(int from, int into, int edge_index) const {
    SeparatorBelief& store = tb->separators[edge_index];
    if (store.members.empty()) return;
    auto [mu_new, sigma_new] = tb->beliefs[from].marginal(store.members);
    if (mu_new.size() == store.mean.size() &&
        (mu_new.array() == store.mean.array()).all() &&
        (sigma_new.array() == store.cov.array()).all())
      return;  // nothing new crossed this edge

    CliqueBelief& target = tb->beliefs[into];
    const std::vector<int> sep = indices_of(target, store.members);

    const Eigen::MatrixXd k_target = pinv_spd(target.cov);
    const Eigen::MatrixXd k_new = pinv_spd(sigma_new);
    const Eigen::MatrixXd k_old = pinv_spd(store.cov);

    Eigen::MatrixXd k_post = k_target;
    Eigen::VectorXd h_post = k_target * target.mean;
    const Eigen::MatrixXd dk = k_new - k_old;
    const Eigen::VectorXd dh = k_new * mu_new - k_old * store.mean;
    for (std::size_t i = 0; i < sep.size(); ++i) {
      h_post[sep[i]] += dh[i];
      for (std::size_t j = 0; j < sep.size(); ++j) k_post(sep[i], sep[j]) += dk(i, j);
    }
    target.cov = symmetrized(pinv_spd(k_post));
    target.mean = target.cov * h_post;
    check_psd(target.cov, "collect_distribute");

    store.mean = std::move(mu_new);
    store.cov = std::move(sigma_new);
  }
};

void build_children(const graph::JunctionTree& tree,
                    std::vector<std::vector<int>>* children) {
  children->assign(tree.cliques.size(), {});
  for (std::size_t i = 0; i < tree.cliques.size(); ++i)
    if (tree.parent_index[i] >= 0 && !tree.separators[i].empty())
      (*children)[tree.parent_index[i]].push_back(static_cast<int>(i));
}

// Orient the component containing `root` as a rooted tree over existing
// edges; returns (node, parent, edge_index) in DFS preorder.
struct Oriented {
  int node, parent, edge;
};

void orient_component(const std::vector<std::vector<int>>& children,
                      const std::vector<int>& parent_index, int root,
                      std::vector<Oriented>* order, std::vector<bool>* seen) {
  std::vector<Oriented> stack{{root, -1, -1}};
  while (!stack.empty()) {
    Oriented cur = stack.back();
    stack.pop_back();
    if ((*seen)[cur.node]) continue;
    (*seen)[cur.node] = true;
    order->push_back(cur);
    // Tree neighbours: stored children plus the stored parent.
    for (int c : children[cur.node])
      if (!(*seen)[c]) stack.push_back({c, cur.node, c});
    const int p = parent_index[cur.node];
    if (p >= 0 && !(*seen)[p]) stack.push_back({p, cur.node, cur.node});
  }
}

}  // namespace

TreeBelief collect_distribute(const TreeBelief& tree_belief,
                              const std::vector<int>& updated_cliques, int root) {
  const int n = static_cast<int>(tree_belief.beliefs.size());
  if (n == 0) return tree_belief;
  if (root < 0 || root >= n) throw Error("root clique index out of range");
  if (updated_cliques.empty()) return tree_belief;

  TreeBelief tb = tree_belief;
  std::vector<std::vector<int>> children;
  build_children(tb.tree, &children);
  EdgeUpdate update{&tb};

  std::vector<bool> seen(n, false);
  std::vector<int> roots{root};
  for (int i = 0; i < n; ++i) roots.push_back(i);  // later components

  for (int r : roots) {
    if (seen[r]) continue;
    std::vector<Oriented> order;
    orient_component(children, tb.tree.parent_index, r, &order, &seen);
    // Collect: absorb into each node from its oriented children, deepest first.
    for (auto it = order.rbegin(); it != order.rend(); ++it)
      if (it->parent >= 0) update(it->node, it->parent, it->edge);
    // Distribute: absorb outward from the root.
    for (const auto& o : order)
      if (o.parent >= 0) update(o.parent, o.node, o.edge);
  }
  return tb;
}

double joint_log_density(const TreeBelief& tree_belief, const Eigen::VectorXd& assignment) {
  if (assignment.size() != tree_belief.total_dim())
    throw Error("assignment dimension mismatch");
  auto gather = [&](const std::vector<std::string>& members) {
    std::vector<int> sel;
    for (const auto& id : members) {
      const int off = tree_belief.offset_of(id);
      const int len = tree_belief.tree.dim_of(id);
      for (int k = 0; k < len; ++k) sel.push_back(off + k);
    }
    Eigen::VectorXd out(sel.size());
    for (std::size_t i = 0; i < sel.size(); ++i) out[i] = assignment[sel[i]];
    return out;
  };

  double total = 0.0;
  for (const auto& belief : tree_belief.beliefs)
    total += logpdf_mvn(gather(belief.clique.members), belief.mean, belief.cov);
  for (const auto& sep : tree_belief.separators) {
    if (sep.members.empty()) continue;
    total -= logpdf_mvn(gather(sep.members), sep.mean, sep.cov);
  }
  return total;
}

}  // namespace dynbn::gauss
