#ifndef DYNBN_GRAPH_HPP
#define DYNBN_GRAPH_HPP

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace dynbn::graph {

struct Variable {
  std::string id;
  int dim = 1;
  bool operator==(const Variable&) const = default;
};

/// Directed acyclic graph over named state variables.  Each variable carries
/// the dimension of its state block.
struct Dag {
  std::vector<Variable> variables;
  std::vector<std::pair<std::string, std::string>> edges;  // (parent, child)

  /// Throws StructuralError on duplicate ids, undeclared endpoints,
  /// nonpositive dimensions or cycles.
  void validate() const;

  std::vector<std::string> parents_of(const std::string& id) const;
  bool operator==(const Dag&) const = default;
};

/// Undirected graph over the same variable set, used for the moral and
/// triangulated stages.  Nodes keep the Dag declaration order; edges are
/// stored as index pairs (i < j).
struct UndirectedGraph {
  std::vector<std::string> nodes;
  std::set<std::pair<int, int>> edges;

  bool adjacent(int a, int b) const {
    return edges.count({std::min(a, b), std::max(a, b)}) > 0;
  }
  void connect(int a, int b) {
    if (a != b) edges.insert({std::min(a, b), std::max(a, b)});
  }
  bool has_edge(const std::string& a, const std::string& b) const;
  int index_of(const std::string& id) const;
};

struct Clique {
  std::vector<std::string> members;  // sorted lexicographically
  bool operator==(const Clique&) const = default;
};

/// Clique tree with the running intersection property.  parent_index[i] is
/// the tree parent r(i) for i >= 1 (always the smallest valid predecessor);
/// the edge to it exists only when separators[i] is nonempty, so a
/// disconnected moral graph yields a forest.
struct JunctionTree {
  std::vector<Variable> variables;  // Dag declaration order
  std::vector<Clique> cliques;
  std::vector<int> parent_index;                     // per clique; -1 for C[0]
  std::vector<std::vector<std::string>> separators;  // per clique; empty for C[0]

  int dim_of(const std::string& id) const;
  /// Smallest-index clique containing all of `ids`, or -1.
  int containing_clique(const std::vector<std::string>& ids) const;
  bool operator==(const JunctionTree&) const = default;
};

/// Undirected skeleton plus marriages between parents that share a child.
UndirectedGraph moralize(const Dag& dag);

/// Chordal supergraph via greedy minimum-fill elimination.  Ties are broken
/// on the lexicographically smallest fill-edge set, then the smallest vertex
/// id, which keeps the construction deterministic.
UndirectedGraph triangulate(const UndirectedGraph& g);

JunctionTree build_junction_tree(const Dag& dag);

/// As above, but first completes each listed variable set in the moral graph.
/// The filter uses this to keep a jointly dependent inherited frontier inside
/// one clique.
JunctionTree build_junction_tree(
    const Dag& dag, const std::vector<std::vector<std::string>>& extra_complete_sets);

}  // namespace dynbn::graph

#endif  // DYNBN_GRAPH_HPP
