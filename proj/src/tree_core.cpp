#include "cad/tree_core.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

namespace cad {

namespace {

void require_level(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("alpha must lie in (0, 1], got " + std::to_string(alpha));
  }
}

void require_cover(const TestTree& tree, std::size_t n, const char* what) {
  if (n != tree.size()) {
    throw std::invalid_argument(std::string(what) + " has " + std::to_string(n) +
                                " entries, tree has " + std::to_string(tree.size()) + " vertices");
  }
}

}  // namespace

const Vertex& TestTree::vertex(VertexId v) const {
  if (v >= vertices_.size()) {
    throw std::out_of_range("unknown vertex id " + std::to_string(v));
  }
  return vertices_[v];
}

std::vector<VertexId> TestTree::subtree(VertexId v) const {
  std::vector<VertexId> out{vertex(v).id};
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& ch = vertices_[out[i]].children;
    out.insert(out.end(), ch.begin(), ch.end());
  }
  return out;
}

std::vector<VertexId> TestTree::leaves() const { return leaves_under(root()); }

std::vector<VertexId> TestTree::leaves_under(VertexId v) const {
  std::vector<VertexId> out;
  for (VertexId u : subtree(v)) {
    if (vertices_[u].children.empty()) out.push_back(u);
  }
  return out;
}

TestTree build_complete_tree(std::span<const std::size_t> branching, std::size_t depth,
                             std::size_t vertex_cap) {
  if (branching.size() != depth) {
    throw std::invalid_argument("branching list must have one entry per layer (depth " +
                                std::to_string(depth) + ", got " +
                                std::to_string(branching.size()) + ")");
  }
  std::size_t total = 1;
  std::size_t layer = 1;
  for (std::size_t b : branching) {
    if (b == 0) throw std::invalid_argument("branching factor must be >= 1");
    if (layer > vertex_cap / b) throw std::invalid_argument("tree exceeds vertex cap");
    layer *= b;
    total += layer;
    if (total > vertex_cap) throw std::invalid_argument("tree exceeds vertex cap");
  }
  if (total > vertex_cap) throw std::invalid_argument("tree exceeds vertex cap");

  TestTree tree;
  tree.depth_ = depth;
  tree.branching_.assign(branching.begin(), branching.end());
  tree.vertices_.reserve(total);
  tree.vertices_.push_back(Vertex{0, 0, std::nullopt, {}});
  std::size_t layer_begin = 0;
  for (std::size_t d = 0; d < depth; ++d) {
    const std::size_t layer_end = tree.vertices_.size();
    for (VertexId v = layer_begin; v < layer_end; ++v) {
      for (std::size_t c = 0; c < branching[d]; ++c) {
        const VertexId id = tree.vertices_.size();
        tree.vertices_.push_back(Vertex{id, d + 1, v, {}});
        tree.vertices_[v].children.push_back(id);
      }
    }
    layer_begin = layer_end;
  }
  return tree;
}

AlphaAllocation allocate_alpha_uniform(const TestTree& tree, double alpha) {
  require_level(alpha);
  AlphaAllocation alloc{std::vector<double>(tree.size(), 0.0)};
  alloc.alpha[tree.root()] = alpha;
  // Breadth-first numbering guarantees parents are assigned before children.
  for (const Vertex& v : tree.vertices()) {
    if (v.children.empty()) continue;
    const double share = alloc.alpha[v.id] / static_cast<double>(v.children.size());
    for (VertexId c : v.children) alloc.alpha[c] = share;
  }
  return alloc;
}

AlphaAllocation allocate_alpha_weighted(const TestTree& tree, double alpha,
                                        std::span<const double> weights) {
  require_level(alpha);
  require_cover(tree, weights.size(), "weight map");
  AlphaAllocation alloc{std::vector<double>(tree.size(), 0.0)};
  alloc.alpha[tree.root()] = alpha;
  for (const Vertex& v : tree.vertices()) {
    if (v.children.empty()) continue;
    double total = 0.0;
    for (VertexId c : v.children) {
      if (!(weights[c] > 0.0) || !std::isfinite(weights[c])) {
        throw std::invalid_argument("weight of vertex " + std::to_string(c) +
                                    " must be positive and finite");
      }
      total += weights[c];
    }
    for (VertexId c : v.children) alloc.alpha[c] = alloc.alpha[v.id] * (weights[c] / total);
  }
  return alloc;
}

std::vector<VertexId> validate_lb(const TestTree& tree, const AlphaAllocation& alloc) {
  require_cover(tree, alloc.size(), "allocation");
  std::vector<VertexId> bad;
  for (const Vertex& v : tree.vertices()) {
    if (v.children.empty()) continue;
    double sum = 0.0;
    for (VertexId c : v.children) sum += alloc.alpha[c];
    if (sum > alloc.alpha[v.id] + kLbTolerance) bad.push_back(v.id);
  }
  return bad;
}

std::vector<VertexId> ancestors(const TestTree& tree, VertexId v) {
  std::vector<VertexId> path;
  for (auto p = tree.parent(v); p; p = tree.parent(*p)) path.push_back(*p);
  return path;
}

std::vector<VertexId> first_true_set(const TestTree& tree, const TruthAssignment& truth) {
  require_cover(tree, truth.size(), "truth assignment");
  std::vector<VertexId> first;
  // Only vertices whose whole ancestor path is false are ever visited.
  std::deque<VertexId> open{tree.root()};
  while (!open.empty()) {
    const VertexId v = open.front();
    open.pop_front();
    if (truth.null_true[v]) {
      first.push_back(v);
    } else {
      for (VertexId c : tree.children(v)) open.push_back(c);
    }
  }
  std::sort(first.begin(), first.end());
  return first;
}

double subtree_alpha_sum(const TestTree& tree, const AlphaAllocation& alloc,
                         const TruthAssignment& truth, VertexId subtree_root) {
  require_cover(tree, alloc.size(), "allocation");
  const auto first = first_true_set(tree, truth);
  double sum = 0.0;
  for (VertexId v : tree.subtree(subtree_root)) {
    if (std::binary_search(first.begin(), first.end(), v)) sum += alloc.alpha[v];
  }
  return sum;
}

Forest make_forest(std::vector<TestTree> trees, double alpha) {
  if (trees.empty()) throw std::invalid_argument("forest needs at least one tree");
  std::vector<double> levels(trees.size(), alpha / static_cast<double>(trees.size()));
  return make_forest(std::move(trees), std::move(levels), alpha);
}

Forest make_forest(std::vector<TestTree> trees, std::vector<double> root_levels, double alpha) {
  require_level(alpha);
  if (trees.empty()) throw std::invalid_argument("forest needs at least one tree");
  if (root_levels.size() != trees.size()) {
    throw std::invalid_argument("one root level per tree required");
  }
  for (double l : root_levels) require_level(l);
  const double total = std::accumulate(root_levels.begin(), root_levels.end(), 0.0);
  if (total > alpha + kLbTolerance) {
    throw std::invalid_argument("forest root levels sum above alpha");
  }
  return Forest{std::move(trees), std::move(root_levels), alpha};
}

nlohmann::json tree_to_json(const TestTree& tree, const AlphaAllocation& alloc) {
  require_cover(tree, alloc.size(), "allocation");
  return nlohmann::json{
      {"depth", tree.depth()},
      {"branching", std::vector<std::size_t>(tree.branching().begin(), tree.branching().end())},
      {"alpha_root", alloc.alpha[tree.root()]},
      {"allocation", alloc.alpha},
  };
}

TreeDocument tree_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("tree document must be an object");
  try {
    const auto depth = doc.at("depth").get<std::size_t>();
    const auto branching = doc.at("branching").get<std::vector<std::size_t>>();
    TreeDocument out;
    out.tree = build_complete_tree(branching, depth);
    out.alpha_root = doc.at("alpha_root").get<double>();
    if (doc.contains("allocation")) {
      out.allocation.alpha = doc.at("allocation").get<std::vector<double>>();
      require_cover(out.tree, out.allocation.size(), "allocation");
      if (out.allocation.alpha[0] != out.alpha_root) {
        throw std::invalid_argument("allocation[0] disagrees with alpha_root");
      }
    } else {
      out.allocation = allocate_alpha_uniform(out.tree, out.alpha_root);
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed tree document: ") + e.what());
  }
}

}  // namespace cad
