#include "cad/interval.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

namespace cad {

void TrialMatrix::validate() const {
  if (data.rows() < 1) throw std::invalid_argument("trial matrix needs at least one trial");
  if (data.cols() < 1) throw std::invalid_argument("trial matrix needs at least one time point");
  if (!data.allFinite()) throw std::invalid_argument("trial matrix contains non-finite samples");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be positive");
}

IntervalTree build_interval_tree(std::size_t length, std::size_t depth, std::size_t arity) {
  if (arity == 0) throw std::invalid_argument("arity must be >= 1");
  if (length == 0) throw std::invalid_argument("series length must be >= 1");
  std::size_t leaves = 1;
  for (std::size_t d = 0; d < depth; ++d) {
    if (leaves > length / arity) {
      throw std::invalid_argument("arity^depth exceeds the series length " +
                                  std::to_string(length));
    }
    leaves *= arity;
  }
  IntervalTree out;
  const std::vector<std::size_t> branching(depth, arity);
  out.tree = build_complete_tree(branching, depth);
  out.nodes.resize(out.tree.size());
  out.nodes[0] = IntervalNode{0, 0, length, 0};
  for (const Vertex& v : out.tree.vertices()) {
    if (v.children.empty()) continue;
    const IntervalNode& parent = out.nodes[v.id];
    const std::size_t q = parent.size() / arity;
    const std::size_t r = parent.size() % arity;
    std::size_t start = parent.start;
    for (std::size_t i = 0; i < v.children.size(); ++i) {
      const std::size_t len = q + (i < r ? 1 : 0);
      const VertexId c = v.children[i];
      out.nodes[c] = IntervalNode{c, start, start + len, v.depth + 1};
      start += len;
    }
  }
  return out;
}

double interval_pvalue(const TrialMatrix& trials, const IntervalNode& node) {
  trials.validate();
  if (node.end <= node.start) throw std::invalid_argument("empty interval");
  if (node.end > static_cast<std::size_t>(trials.length())) {
    throw std::invalid_argument("interval extends past the series");
  }
  const auto width = static_cast<Eigen::Index>(node.size());
  const double mean =
      trials.data.middleCols(static_cast<Eigen::Index>(node.start), width).mean();
  GaussianTestSpec spec;
  spec.sigma = trials.sigma;
  spec.n_eff = static_cast<double>(trials.trials() * width);
  return z_pvalue(mean, spec);
}

PValueMap interval_pvalues(const TrialMatrix& trials, const IntervalTree& itree) {
  trials.validate();
  const Eigen::VectorXd column_sums = trials.data.colwise().sum().transpose();
  std::vector<double> prefix(static_cast<std::size_t>(column_sums.size()) + 1, 0.0);
  for (Eigen::Index t = 0; t < column_sums.size(); ++t) {
    prefix[static_cast<std::size_t>(t) + 1] = prefix[static_cast<std::size_t>(t)] + column_sums(t);
  }
  PValueMap out;
  out.p.resize(itree.nodes.size());
  GaussianTestSpec spec;
  spec.sigma = trials.sigma;
  for (const IntervalNode& node : itree.nodes) {
    if (node.end > static_cast<std::size_t>(trials.length()) || node.size() == 0) {
      throw std::invalid_argument("interval tree does not fit the trial matrix");
    }
    spec.n_eff = static_cast<double>(trials.trials()) * static_cast<double>(node.size());
    const double mean = (prefix[node.end] - prefix[node.start]) / spec.n_eff;
    out.p[node.vertex] = z_pvalue(mean, spec);
  }
  return out;
}

Localization localize(const TrialMatrix& trials, double alpha, std::size_t depth,
                      std::size_t arity) {
  trials.validate();
  Localization loc;
  loc.intervals =
      build_interval_tree(static_cast<std::size_t>(trials.length()), depth, arity);
  const auto& tree = loc.intervals.tree;
  loc.pvalues = interval_pvalues(trials, loc.intervals);
  loc.result = cad_run(tree, allocate_alpha_uniform(tree, alpha), loc.pvalues);
  std::vector<bool> rejected(tree.size(), false);
  for (VertexId v : loc.result.rejected) rejected[v] = true;
  for (VertexId v : loc.result.rejected) {
    const auto& ch = tree.children(v);
    if (std::none_of(ch.begin(), ch.end(), [&](VertexId c) { return rejected[c]; })) {
      loc.maximal.push_back(v);
    }
  }
  return loc;
}

nlohmann::json localization_to_json(const Localization& loc, double alpha) {
  const auto& tree = loc.intervals.tree;
  std::vector<const char*> decision(tree.size(), "untested");
  for (VertexId v : loc.result.rejected) decision[v] = "rejected";
  for (VertexId v : loc.result.frontier) decision[v] = "accepted";
  auto intervals = nlohmann::json::array();
  for (const IntervalNode& n : loc.intervals.nodes) {
    intervals.push_back({{"vertex", n.vertex},
                         {"start", n.start},
                         {"end", n.end},
                         {"depth", n.depth},
                         {"p_value", loc.pvalues.p[n.vertex]},
                         {"decision", decision[n.vertex]}});
  }
  const auto& b = tree.branching();
  return nlohmann::json{{"alpha", alpha},
                        {"depth", tree.depth()},
                        {"arity", b.empty() ? std::size_t{1} : b.front()},
                        {"intervals", std::move(intervals)},
                        {"rejected", loc.result.rejected},
                        {"maximal", loc.maximal},
                        {"frontier", loc.result.frontier}};
}

}  // namespace cad
