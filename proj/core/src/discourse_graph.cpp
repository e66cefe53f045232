#include "topseg/discourse_graph.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "topseg/error.hpp"

namespace topseg {

std::vector<Edge> DiscourseTree::edges() const {
  std::vector<Edge> out;
  out.reserve(heads_.size());
  for (int v = 0; v < size(); ++v) {
    if (heads_[v] >= 0) out.push_back({heads_[v], v});
  }
  return out;
}

std::vector<int> DiscourseTree::dependents_of(int node) const {
  std::vector<int> out;
  for (int v = 0; v < size(); ++v) {
    if (heads_[v] == node) out.push_back(v);
  }
  return out;
}

DiscourseTree validate_tree(int n, std::span<const Edge> edges) {
  if (n < 1) throw ValidationError("discourse tree needs at least one node");
  if (edges.size() != static_cast<std::size_t>(n - 1)) {
    throw ValidationError("discourse tree over " + std::to_string(n) +
                          " nodes needs " + std::to_string(n - 1) +
                          " edges, got " + std::to_string(edges.size()));
  }
  std::vector<int> heads(static_cast<std::size_t>(n), -1);
  for (const Edge& e : edges) {
    if (e.head < 0 || e.head >= n || e.dependent < 0 || e.dependent >= n) {
      throw ValidationError("edge (" + std::to_string(e.head) + "," +
                            std::to_string(e.dependent) + ") out of range");
    }
    if (e.head == e.dependent) {
      throw ValidationError("cycle: self-loop on node " + std::to_string(e.head));
    }
    if (heads[e.dependent] != -1) {
      throw ValidationError("node " + std::to_string(e.dependent) +
                            " has multiple heads");
    }
    heads[e.dependent] = e.head;
  }
  // n-1 edges with distinct dependents leave exactly one headless node.
  const int root = static_cast<int>(
      std::find(heads.begin(), heads.end(), -1) - heads.begin());

  // 0 = unvisited, 1 = on current path, 2 = known to reach the root.
  std::vector<std::uint8_t> state(static_cast<std::size_t>(n), 0);
  state[root] = 2;
  std::vector<int> path;
  for (int start = 0; start < n; ++start) {
    path.clear();
    int v = start;
    while (state[v] == 0) {
      state[v] = 1;
      path.push_back(v);
      v = heads[v];
    }
    if (state[v] == 1) {
      throw ValidationError("cycle through node " + std::to_string(v));
    }
    for (int u : path) state[u] = 2;
  }

  DiscourseTree tree;
  tree.heads_ = std::move(heads);
  tree.root_ = root;
  return tree;
}

DiscourseGraph DiscourseGraph::identity(int n) {
  DiscourseGraph g;
  g.n_ = n;
  g.adj_.assign(static_cast<std::size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i) g.set(i, i);
  g.finalize();
  return g;
}

void DiscourseGraph::set(int i, int j) {
  adj_[static_cast<std::size_t>(i) * n_ + j] = 1;
}

void DiscourseGraph::finalize() {
  neighbors_.assign(static_cast<std::size_t>(n_), {});
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) {
      if (edge(i, j)) neighbors_[i].push_back(j);
    }
  }
}

std::size_t DiscourseGraph::ones() const {
  return static_cast<std::size_t>(std::count(adj_.begin(), adj_.end(), 1));
}

DiscourseGraph build_graph(const DiscourseTree& tree, bool symmetrize) {
  DiscourseGraph g;
  g.n_ = tree.size();
  g.adj_.assign(static_cast<std::size_t>(g.n_) * g.n_, 0);
  for (int i = 0; i < g.n_; ++i) g.set(i, i);
  for (const Edge& e : tree.edges()) {
    g.set(e.head, e.dependent);
    if (symmetrize) g.set(e.dependent, e.head);
  }
  g.finalize();
  return g;
}

std::vector<int> neighborhood(const DiscourseGraph& graph, int i) {
  if (i < 0 || i >= graph.size()) {
    throw ValidationError("node " + std::to_string(i) + " out of range");
  }
  auto nb = graph.neighbors(i);
  return {nb.begin(), nb.end()};
}

DiscourseTree noisy_tree(const DiscourseTree& tree, double flip_rate,
                         std::uint64_t seed) {
  if (flip_rate < 0.0 || flip_rate > 1.0) {
    throw ValidationError("flip_rate must lie in [0, 1]");
  }
  const int n = tree.size();
  std::vector<int> heads = tree.heads();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  auto in_subtree = [&](int u, int v) {
    for (int w = u; w >= 0; w = heads[w]) {
      if (w == v) return true;
    }
    return false;
  };

  std::vector<int> candidates;
  for (int v = 0; v < n; ++v) {
    if (v == tree.root()) continue;
    if (coin(rng) >= flip_rate) continue;
    candidates.clear();
    for (int u = 0; u < n; ++u) {
      if (u != heads[v] && !in_subtree(u, v)) candidates.push_back(u);
    }
    if (candidates.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    heads[v] = candidates[pick(rng)];
  }

  std::vector<Edge> edges;
  for (int v = 0; v < n; ++v) {
    if (heads[v] >= 0) edges.push_back({heads[v], v});
  }
  return validate_tree(n, edges);
}

double attachment_agreement(const DiscourseTree& reference,
                            const DiscourseTree& candidate) {
  if (reference.size() != candidate.size()) {
    throw ValidationError("trees differ in size");
  }
  int same = 0;
  int total = 0;
  for (int v = 0; v < reference.size(); ++v) {
    if (v == reference.root()) continue;
    ++total;
    if (reference.head_of(v) == candidate.head_of(v)) ++same;
  }
  return total == 0 ? 1.0 : static_cast<double>(same) / total;
}

DiscourseGraph graph_for_document(const Document& doc, bool symmetrize,
                                  double flip_rate, std::uint64_t noise_seed) {
  const int n = static_cast<int>(doc.size());
  if (!doc.has_edges) return DiscourseGraph::identity(n);
  DiscourseTree tree;
  try {
    tree = validate_tree(n, doc.edges);
  } catch (const ValidationError& e) {
    throw ValidationError("document '" + doc.id + "': " + e.what());
  }
  if (flip_rate > 0.0) tree = noisy_tree(tree, flip_rate, noise_seed);
  return build_graph(tree, symmetrize);
}

void write_matrix(std::ostream& out, const DiscourseGraph& graph) {
  const int n = graph.size();
  out << n << '\n';
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j) out << ' ';
      out << (graph.edge(i, j) ? '1' : '0');
    }
    out << '\n';
  }
}

std::string to_matrix_text(const DiscourseGraph& graph) {
  std::ostringstream out;
  write_matrix(out, graph);
  return out.str();
}

std::vector<std::vector<int>> read_matrix(std::istream& in) {
  int n = 0;
  if (!(in >> n) || n < 0) throw ParseError("matrix dump: bad size line");
  std::vector<std::vector<int>> rows(static_cast<std::size_t>(n),
                                     std::vector<int>(static_cast<std::size_t>(n)));
  for (auto& row : rows) {
    for (int& cell : row) {
      if (!(in >> cell) || (cell != 0 && cell != 1)) {
        throw ParseError("matrix dump: expected 0/1 entry");
      }
    }
  }
  return rows;
}

}  // namespace topseg
