#include "dynbn/graph.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include "dynbn/errors.hpp"

namespace dynbn::graph {

namespace {

std::map<std::string, int> index_map(const std::vector<Variable>& vars) {
  std::map<std::string, int> idx;
  for (int i = 0; i < static_cast<int>(vars.size()); ++i) idx[vars[i].id] = i;
  return idx;
}

}  // namespace

void Dag::validate() const {
  std::map<std::string, int> idx;
  for (int i = 0; i < static_cast<int>(variables.size()); ++i) {
    const auto& v = variables[i];
    if (v.dim <= 0)
      throw StructuralError("variable '" + v.id + "' has nonpositive dimension");
    if (!idx.emplace(v.id, i).second)
      throw StructuralError("duplicate variable id '" + v.id + "'");
  }
  std::vector<int> indegree(variables.size(), 0);
  std::vector<std::vector<int>> children(variables.size());
  for (const auto& [p, c] : edges) {
    auto ip = idx.find(p), ic = idx.find(c);
    if (ip == idx.end() || ic == idx.end())
      throw StructuralError("edge (" + p + " -> " + c + ") references an undeclared variable");
    if (ip->second == ic->second)
      throw StructuralError("self-edge on '" + p + "'");
    children[ip->second].push_back(ic->second);
    ++indegree[ic->second];
  }
  // Kahn's algorithm; leftover nodes mean a directed cycle.
  std::deque<int> ready;
  for (int i = 0; i < static_cast<int>(variables.size()); ++i)
    if (indegree[i] == 0) ready.push_back(i);
  std::size_t seen = 0;
  while (!ready.empty()) {
    int v = ready.front();
    ready.pop_front();
    ++seen;
    for (int c : children[v])
      if (--indegree[c] == 0) ready.push_back(c);
  }
  if (seen != variables.size()) throw StructuralError("cycle detected in dag");
}

std::vector<std::string> Dag::parents_of(const std::string& id) const {
  std::vector<std::string> out;
  for (const auto& [p, c] : edges)
    if (c == id) out.push_back(p);
  std::sort(out.begin(), out.end());
  return out;
}

bool UndirectedGraph::has_edge(const std::string& a, const std::string& b) const {
  return adjacent(index_of(a), index_of(b));
}

int UndirectedGraph::index_of(const std::string& id) const {
  auto it = std::find(nodes.begin(), nodes.end(), id);
  if (it == nodes.end()) throw StructuralError("unknown node '" + id + "'");
  return static_cast<int>(it - nodes.begin());
}

UndirectedGraph moralize(const Dag& dag) {
  dag.validate();
  UndirectedGraph g;
  g.nodes.reserve(dag.variables.size());
  for (const auto& v : dag.variables) g.nodes.push_back(v.id);
  const auto idx = index_map(dag.variables);

  std::vector<std::vector<int>> parents(dag.variables.size());
  for (const auto& [p, c] : dag.edges) {
    const int ip = idx.at(p), ic = idx.at(c);
    g.connect(ip, ic);
    parents[ic].push_back(ip);
  }
  // Marry all parents of each child.
  for (const auto& ps : parents)
    for (std::size_t a = 0; a < ps.size(); ++a)
      for (std::size_t b = a + 1; b < ps.size(); ++b) g.connect(ps[a], ps[b]);
  return g;
}

namespace {

// Fill edges required to eliminate `v` from the working adjacency.
std::vector<std::pair<int, int>> fill_edges_for(
    const std::vector<std::set<int>>& adj, int v) {
  std::vector<int> nb(adj[v].begin(), adj[v].end());
  std::vector<std::pair<int, int>> fill;
  for (std::size_t a = 0; a < nb.size(); ++a)
    for (std::size_t b = a + 1; b < nb.size(); ++b)
      if (adj[nb[a]].count(nb[b]) == 0)
        fill.push_back({std::min(nb[a], nb[b]), std::max(nb[a], nb[b])});
  return fill;
}

// Lexicographic comparison of fill-edge sets by node id.
bool fill_less(const std::vector<std::pair<int, int>>& a,
               const std::vector<std::pair<int, int>>& b,
               const std::vector<std::string>& nodes) {
  auto key = [&nodes](const std::pair<int, int>& e) {
    const std::string &x = nodes[e.first], &y = nodes[e.second];
    return x < y ? std::pair<std::string, std::string>(x, y)
                 : std::pair<std::string, std::string>(y, x);
  };
  std::vector<std::pair<std::string, std::string>> ka, kb;
  for (const auto& e : a) ka.push_back(key(e));
  for (const auto& e : b) kb.push_back(key(e));
  std::sort(ka.begin(), ka.end());
  std::sort(kb.begin(), kb.end());
  return ka < kb;
}

}  // namespace

UndirectedGraph triangulate(const UndirectedGraph& g) {
  const int n = static_cast<int>(g.nodes.size());
  std::vector<std::set<int>> adj(n);
  for (const auto& [a, b] : g.edges) {
    adj[a].insert(b);
    adj[b].insert(a);
  }
  UndirectedGraph out = g;

  std::vector<bool> eliminated(n, false);
  for (int round = 0; round < n; ++round) {
    int best = -1;
    std::vector<std::pair<int, int>> best_fill;
    for (int v = 0; v < n; ++v) {
      if (eliminated[v]) continue;
      auto fill = fill_edges_for(adj, v);
      if (best < 0 || fill.size() < best_fill.size() ||
          (fill.size() == best_fill.size() &&
           (fill_less(fill, best_fill, g.nodes) ||
            (!fill_less(best_fill, fill, g.nodes) && g.nodes[v] < g.nodes[best])))) {
        best = v;
        best_fill = std::move(fill);
      }
    }
    for (const auto& [a, b] : best_fill) {
      adj[a].insert(b);
      adj[b].insert(a);
      out.connect(a, b);
    }
    for (int u : adj[best]) adj[u].erase(best);
    adj[best].clear();
    eliminated[best] = true;
  }
  return out;
}

namespace {

// Maximum-cardinality search visit order; ties on the smallest id.
std::vector<int> mcs_order(const UndirectedGraph& g) {
  const int n = static_cast<int>(g.nodes.size());
  std::vector<std::set<int>> adj(n);
  for (const auto& [a, b] : g.edges) {
    adj[a].insert(b);
    adj[b].insert(a);
  }
  std::vector<int> weight(n, 0), order;
  std::vector<bool> visited(n, false);
  order.reserve(n);
  for (int round = 0; round < n; ++round) {
    int best = -1;
    for (int v = 0; v < n; ++v) {
      if (visited[v]) continue;
      if (best < 0 || weight[v] > weight[best] ||
          (weight[v] == weight[best] && g.nodes[v] < g.nodes[best]))
        best = v;
    }
    visited[best] = true;
    order.push_back(best);
    for (int u : adj[best])
      if (!visited[u]) ++weight[u];
  }
  return order;
}

}  // namespace

int JunctionTree::dim_of(const std::string& id) const {
  for (const auto& v : variables)
    if (v.id == id) return v.dim;
  throw StructuralError("unknown variable '" + id + "'");
}

int JunctionTree::containing_clique(const std::vector<std::string>& ids) const {
  for (int i = 0; i < static_cast<int>(cliques.size()); ++i) {
    const auto& m = cliques[i].members;
    bool all = true;
    for (const auto& id : ids)
      if (!std::binary_search(m.begin(), m.end(), id)) {
        all = false;
        break;
      }
    if (all) return i;
  }
  return -1;
}

JunctionTree build_junction_tree(const Dag& dag) {
  return build_junction_tree(dag, {});
}

JunctionTree build_junction_tree(
    const Dag& dag, const std::vector<std::vector<std::string>>& extra_complete_sets) {
  UndirectedGraph moral = moralize(dag);
  for (const auto& group : extra_complete_sets) {
    std::vector<int> ix;
    for (const auto& id : group) ix.push_back(moral.index_of(id));
    for (std::size_t a = 0; a < ix.size(); ++a)
      for (std::size_t b = a + 1; b < ix.size(); ++b) moral.connect(ix[a], ix[b]);
  }
  const UndirectedGraph chordal = triangulate(moral);
  const int n = static_cast<int>(chordal.nodes.size());

  std::vector<std::set<int>> adj(n);
  for (const auto& [a, b] : chordal.edges) {
    adj[a].insert(b);
    adj[b].insert(a);
  }
  const std::vector<int> order = mcs_order(chordal);
  std::vector<int> visit_rank(n, 0);
  for (int i = 0; i < n; ++i) visit_rank[order[i]] = i;

  // Elimination cliques in reverse MCS order: each vertex with its
  // earlier-visited neighbours.  Maximal ones are the cliques of the
  // chordal graph.
  std::vector<std::set<int>> candidates;
  for (int v = 0; v < n; ++v) {
    std::set<int> c{v};
    for (int u : adj[v])
      if (visit_rank[u] < visit_rank[v]) c.insert(u);
    candidates.push_back(std::move(c));
  }
  std::vector<std::set<int>> maximal;
  for (const auto& c : candidates) {
    bool subset = false;
    for (const auto& other : candidates)
      if (&other != &c &&
          (other.size() > c.size() ||
           (other.size() == c.size() && other < c)) &&
          std::includes(other.begin(), other.end(), c.begin(), c.end())) {
        subset = true;
        break;
      }
    if (!subset && std::find(maximal.begin(), maximal.end(), c) == maximal.end())
      maximal.push_back(c);
  }

  // Order cliques by the MCS rank of their last-visited vertex; this makes
  // the sequence satisfy the running intersection property.
  struct Ranked {
    int rank;
    std::vector<std::string> members;
    std::set<int> raw;
  };
  std::vector<Ranked> ranked;
  for (const auto& c : maximal) {
    Ranked r;
    r.rank = 0;
    for (int v : c) r.rank = std::max(r.rank, visit_rank[v]);
    for (int v : c) r.members.push_back(chordal.nodes[v]);
    std::sort(r.members.begin(), r.members.end());
    r.raw = c;
    ranked.push_back(std::move(r));
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.rank != b.rank) return a.rank < b.rank;
    return a.members < b.members;
  });

  JunctionTree tree;
  tree.variables = dag.variables;
  for (auto& r : ranked) tree.cliques.push_back(Clique{std::move(r.members)});
  tree.parent_index.assign(tree.cliques.size(), -1);
  tree.separators.assign(tree.cliques.size(), {});

  std::set<std::string> earlier;
  for (std::size_t i = 0; i < tree.cliques.size(); ++i) {
    const auto& mem = tree.cliques[i].members;
    if (i > 0) {
      std::vector<std::string> sep;
      for (const auto& id : mem)
        if (earlier.count(id)) sep.push_back(id);
      int parent = -1;
      for (std::size_t j = 0; j < i; ++j) {
        const auto& pm = tree.cliques[j].members;
        if (std::includes(pm.begin(), pm.end(), sep.begin(), sep.end())) {
          parent = static_cast<int>(j);
          break;
        }
      }
      if (parent < 0)
        throw StructuralError("internal: clique ordering violates the running intersection property");
      tree.parent_index[i] = parent;
      tree.separators[i] = std::move(sep);
    }
    earlier.insert(mem.begin(), mem.end());
  }
  return tree;
}

}  // namespace dynbn::graph
