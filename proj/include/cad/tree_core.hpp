#pragma once

// Rooted test trees, alpha allocations under the local Bonferroni condition,
// and the combinatorial objects used to reason about familywise error:
// ancestor paths, the first-true set and subtree alpha sums.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace cad {

using VertexId = std::size_t;

/// Absolute slack used when checking that children's levels fit under the parent.
inline constexpr double kLbTolerance = 1e-12;

/// Default cap on the number of vertices build_complete_tree will create.
inline constexpr std::size_t kDefaultVertexCap = 10'000'000;

struct Vertex {
  VertexId id = 0;
  std::size_t depth = 0;
  std::optional<VertexId> parent;
  std::vector<VertexId> children;
};

/// Complete rooted tree. Vertices are numbered breadth-first, root is 0, and
/// every leaf sits at depth() below the root. Immutable once built.
class TestTree {
 public:
  TestTree() = default;

  std::size_t size() const { return vertices_.size(); }
  std::size_t depth() const { return depth_; }
  VertexId root() const { return 0; }
  std::span<const std::size_t> branching() const { return branching_; }

  const Vertex& vertex(VertexId v) const;
  const std::vector<VertexId>& children(VertexId v) const { return vertex(v).children; }
  std::optional<VertexId> parent(VertexId v) const { return vertex(v).parent; }
  bool is_leaf(VertexId v) const { return vertex(v).children.empty(); }
  bool contains(VertexId v) const { return v < vertices_.size(); }

  /// Vertices of the complete subtree rooted at v, in breadth-first order.
  std::vector<VertexId> subtree(VertexId v) const;
  std::vector<VertexId> leaves() const;
  /// Leaves below v (v itself when it is a leaf).
  std::vector<VertexId> leaves_under(VertexId v) const;

  const std::vector<Vertex>& vertices() const { return vertices_; }

 private:
  friend TestTree build_complete_tree(std::span<const std::size_t>, std::size_t, std::size_t);

  std::vector<Vertex> vertices_;
  std::vector<std::size_t> branching_;
  std::size_t depth_ = 0;
};

/// Builds the complete tree whose depth-l vertices all have branching[l] children.
/// Throws std::invalid_argument on a zero branching factor, a branching list
/// whose length differs from depth, or a vertex count above vertex_cap.
TestTree build_complete_tree(std::span<const std::size_t> branching, std::size_t depth,
                             std::size_t vertex_cap = kDefaultVertexCap);

inline TestTree build_complete_tree(std::initializer_list<std::size_t> branching) {
  std::vector<std::size_t> b(branching);
  return build_complete_tree(b, b.size());
}

/// Per-vertex test levels, indexed by vertex id.
struct AlphaAllocation {
  std::vector<double> alpha;

  double operator[](VertexId v) const { return alpha.at(v); }
  std::size_t size() const { return alpha.size(); }
};

/// t(v) = true when the null hypothesis at v is true.
struct TruthAssignment {
  std::vector<bool> null_true;

  bool operator[](VertexId v) const { return null_true.at(v); }
  std::size_t size() const { return null_true.size(); }

  static TruthAssignment all(std::size_t n, bool value) { return {std::vector<bool>(n, value)}; }
};

AlphaAllocation allocate_alpha_uniform(const TestTree& tree, double alpha);

/// Splits each vertex's level over its children proportionally to weights
/// (indexed by vertex id; the root's weight is ignored).
AlphaAllocation allocate_alpha_weighted(const TestTree& tree, double alpha,
                                        std::span<const double> weights);

/// Non-leaf vertices whose children's levels sum above their own level by more
/// than kLbTolerance. Empty means the allocation is valid.
std::vector<VertexId> validate_lb(const TestTree& tree, const AlphaAllocation& alloc);

/// Vertices strictly above v, from its parent up to the root.
std::vector<VertexId> ancestors(const TestTree& tree, VertexId v);

/// Vertices whose null is true while every strict ancestor's null is false,
/// in ascending id order.
std::vector<VertexId> first_true_set(const TestTree& tree, const TruthAssignment& truth);

/// Sum of alpha over the first-true set restricted to the subtree rooted at subtree_root.
double subtree_alpha_sum(const TestTree& tree, const AlphaAllocation& alloc,
                         const TruthAssignment& truth, VertexId subtree_root);

/// Collection of trees tested side by side; root levels are Bonferroni-split.
struct Forest {
  std::vector<TestTree> trees;
  std::vector<double> root_levels;
  double alpha = 0.0;
};

/// Splits alpha uniformly over the trees' roots.
Forest make_forest(std::vector<TestTree> trees, double alpha);
/// Uses the given root levels; throws if they sum above alpha.
Forest make_forest(std::vector<TestTree> trees, std::vector<double> root_levels, double alpha);

/// {depth, branching, alpha_root, allocation}
nlohmann::json tree_to_json(const TestTree& tree, const AlphaAllocation& alloc);

struct TreeDocument {
  TestTree tree;
  AlphaAllocation allocation;
  double alpha_root = 0.0;
};

/// Inverse of tree_to_json. A missing "allocation" is filled uniformly from alpha_root.
TreeDocument tree_from_json(const nlohmann::json& doc);

}  // namespace cad
