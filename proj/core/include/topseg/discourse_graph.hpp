#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "topseg/corpus.hpp"

namespace topseg {

// Sentence-level dependency tree: exactly one headless root, one head for
// every other node, no cycles.
class DiscourseTree {
 public:
  int size() const { return static_cast<int>(heads_.size()); }
  int root() const { return root_; }
  // -1 for the root.
  int head_of(int node) const { return heads_.at(node); }
  const std::vector<int>& heads() const { return heads_; }
  std::vector<Edge> edges() const;
  std::vector<int> dependents_of(int node) const;

  friend bool operator==(const DiscourseTree&, const DiscourseTree&) = default;

 private:
  friend DiscourseTree validate_tree(int n, std::span<const Edge> edges);
  std::vector<int> heads_;
  int root_ = 0;
};

// Binary adjacency with unit diagonal. Rows index heads, so the
// neighbourhood of i is row i.
class DiscourseGraph {
 public:
  DiscourseGraph() = default;
  static DiscourseGraph identity(int n);

  int size() const { return n_; }
  bool edge(int i, int j) const {
    return adj_[static_cast<std::size_t>(i) * n_ + j] != 0;
  }
  std::span<const int> neighbors(int i) const { return neighbors_.at(i); }
  std::size_t ones() const;

  friend bool operator==(const DiscourseGraph& a, const DiscourseGraph& b) {
    return a.n_ == b.n_ && a.adj_ == b.adj_;
  }

 private:
  friend DiscourseGraph build_graph(const DiscourseTree&, bool);
  void set(int i, int j);
  void finalize();

  int n_ = 0;
  std::vector<std::uint8_t> adj_;
  std::vector<std::vector<int>> neighbors_;
};

DiscourseTree validate_tree(int n, std::span<const Edge> edges);

// symmetrize adds the reverse of every tree edge.
DiscourseGraph build_graph(const DiscourseTree& tree, bool symmetrize = false);

// Sorted {j : adj[i][j] == 1}; always contains i.
std::vector<int> neighborhood(const DiscourseGraph& graph, int i);

// Each non-root node, with probability flip_rate, moves to a different head
// drawn uniformly from the nodes outside its own subtree. Nodes are visited
// in index order.
DiscourseTree noisy_tree(const DiscourseTree& tree, double flip_rate,
                         std::uint64_t seed);

// Fraction of non-root nodes whose head is unchanged.
double attachment_agreement(const DiscourseTree& reference,
                            const DiscourseTree& candidate);

// Graph for a document: its tree when edges are present, otherwise the
// self-loop-only fallback.
DiscourseGraph graph_for_document(const Document& doc, bool symmetrize,
                                  double flip_rate = 0.0,
                                  std::uint64_t noise_seed = 0);

// Plain-text dump: "n" then n rows of space-separated 0/1.
void write_matrix(std::ostream& out, const DiscourseGraph& graph);
std::string to_matrix_text(const DiscourseGraph& graph);
// Returns raw 0/1 rows after checking square shape.
std::vector<std::vector<int>> read_matrix(std::istream& in);

}  // namespace topseg
