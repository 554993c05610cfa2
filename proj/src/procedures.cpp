#include "cad/procedures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

namespace cad {

namespace {

void require_lb(const TestTree& tree, const AlphaAllocation& alloc) {
  const auto bad = validate_lb(tree, alloc);
  if (!bad.empty()) {
    throw std::invalid_argument("allocation violates the local Bonferroni condition at vertex " +
                                std::to_string(bad.front()));
  }
}

void require_pvalues(std::span<const double> pvals) {
  if (pvals.empty()) throw std::invalid_argument("at least one p-value required");
  for (double p : pvals) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("p-value outside [0, 1]: " + std::to_string(p));
    }
  }
}

void require_level(double level, const char* what) {
  if (!(level > 0.0 && level <= 1.0)) {
    throw std::invalid_argument(std::string(what) + " must lie in (0, 1]");
  }
}

std::vector<std::size_t> ascending_order(std::span<const double> pvals) {
  std::vector<std::size_t> order(pvals.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pvals[a] < pvals[b]; });
  return order;
}

}  // namespace

LocalProblem local_problem(const TestTree& tree, const AlphaAllocation& alloc, VertexId v,
                           LocalProcedure kind) {
  const auto& children = tree.children(v);
  if (children.empty()) throw std::invalid_argument("leaf vertices carry no local problem");
  return LocalProblem{v, children, alloc.alpha.at(v), kind};
}

RejectionSet cad_run(const TestTree& tree, const AlphaAllocation& alloc, const PValueMap& pvals) {
  require_lb(tree, alloc);
  RejectionSet out;
  std::vector<VertexId> layer{tree.root()};
  while (!layer.empty()) {
    std::vector<VertexId> next;
    for (VertexId v : layer) {
      if (v >= pvals.size() || std::isnan(pvals.p[v])) {
        throw std::invalid_argument("missing p-value at tested vertex " + std::to_string(v));
      }
      const double p = pvals.p[v];
      if (p < 0.0 || p > 1.0) {
        throw std::invalid_argument("p-value outside [0, 1] at vertex " + std::to_string(v));
      }
      if (p <= alloc.alpha[v]) {
        out.rejected.push_back(v);
        const auto& ch = tree.children(v);
        next.insert(next.end(), ch.begin(), ch.end());
      } else {
        out.frontier.push_back(v);
      }
    }
    layer = std::move(next);
  }
  // Breadth-first visiting order over a BFS-numbered tree is already ascending.
  return out;
}

std::vector<RejectionSet> cad_run_forest(const Forest& forest,
                                         std::span<const AlphaAllocation> allocations,
                                         std::span<const PValueMap> pvals) {
  if (allocations.size() != forest.trees.size() || pvals.size() != forest.trees.size()) {
    throw std::invalid_argument("one allocation and p-value map per tree required");
  }
  std::vector<RejectionSet> out;
  out.reserve(forest.trees.size());
  for (std::size_t i = 0; i < forest.trees.size(); ++i) {
    const auto& tree = forest.trees[i];
    if (allocations[i].size() != tree.size() ||
        std::fabs(allocations[i][tree.root()] - forest.root_levels[i]) > kLbTolerance) {
      throw std::invalid_argument("allocation of tree " + std::to_string(i) +
                                  " does not start at its forest root level");
    }
    out.push_back(cad_run(tree, allocations[i], pvals[i]));
  }
  return out;
}

RejectionSet cad_extended_run(const TestTree& tree, const AlphaAllocation& alloc,
                              std::span<const std::vector<double>> local_pvals,
                              LocalProcedure kind) {
  require_lb(tree, alloc);
  if (local_pvals.size() != tree.size()) {
    throw std::invalid_argument("local p-value lists must be indexed by vertex");
  }
  for (const Vertex& v : tree.vertices()) {
    if (local_pvals[v.id].size() != v.children.size()) {
      throw std::invalid_argument("vertex " + std::to_string(v.id) + " has " +
                                  std::to_string(v.children.size()) + " descendants but " +
                                  std::to_string(local_pvals[v.id].size()) + " p-values");
    }
  }

  RejectionSet out;
  std::vector<VertexId> layer;
  if (!tree.is_leaf(tree.root())) layer.push_back(tree.root());
  while (!layer.empty()) {
    std::vector<VertexId> next;
    for (VertexId v : layer) {
      const auto& children = tree.children(v);
      const auto flags = run_local(kind, local_pvals[v], alloc.alpha[v]);
      bool all_rejected = true;
      for (std::size_t i = 0; i < children.size(); ++i) {
        if (flags[i]) {
          out.rejected.push_back(children[i]);
        } else {
          all_rejected = false;
        }
      }
      if (!all_rejected) {
        out.frontier.push_back(v);
        continue;
      }
      for (VertexId c : children) {
        if (!tree.is_leaf(c)) next.push_back(c);
      }
    }
    layer = std::move(next);
  }
  std::sort(out.rejected.begin(), out.rejected.end());
  std::sort(out.frontier.begin(), out.frontier.end());
  return out;
}

std::vector<bool> holm(std::span<const double> pvals, double level) {
  require_pvalues(pvals);
  require_level(level, "level");
  const std::size_t m = pvals.size();
  std::vector<bool> flags(m, false);
  const auto order = ascending_order(pvals);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(pvals[order[i]] <= level / static_cast<double>(m - i))) break;
    flags[order[i]] = true;
  }
  return flags;
}

std::vector<bool> bonferroni(std::span<const double> pvals, double level) {
  require_pvalues(pvals);
  require_level(level, "level");
  const double threshold = level / static_cast<double>(pvals.size());
  std::vector<bool> flags(pvals.size());
  for (std::size_t i = 0; i < pvals.size(); ++i) flags[i] = pvals[i] <= threshold;
  return flags;
}

std::vector<bool> benjamini_hochberg(std::span<const double> pvals, double q) {
  require_pvalues(pvals);
  require_level(q, "q");
  const std::size_t m = pvals.size();
  const auto order = ascending_order(pvals);
  std::size_t k = 0;
  for (std::size_t i = m; i >= 1; --i) {
    if (pvals[order[i - 1]] <= static_cast<double>(i) * q / static_cast<double>(m)) {
      k = i;
      break;
    }
  }
  std::vector<bool> flags(m, false);
  for (std::size_t i = 0; i < k; ++i) flags[order[i]] = true;
  return flags;
}

std::vector<bool> run_local(LocalProcedure kind, std::span<const double> pvals, double level) {
  switch (kind) {
    case LocalProcedure::holm:
      return holm(pvals, level);
    case LocalProcedure::bonferroni:
      return bonferroni(pvals, level);
  }
  throw std::invalid_argument("unknown local procedure");
}

ErrorReport error_metrics(const std::vector<bool>& rejected, const std::vector<bool>& null_true) {
  if (rejected.size() != null_true.size()) {
    throw std::invalid_argument("rejection and truth flags indexed differently");
  }
  ErrorReport r;
  std::size_t false_nulls = 0;
  std::size_t true_discoveries = 0;
  for (std::size_t i = 0; i < rejected.size(); ++i) {
    if (!null_true[i]) ++false_nulls;
    if (!rejected[i]) continue;
    ++r.rejections;
    if (null_true[i]) {
      ++r.false_rejections;
    } else {
      ++true_discoveries;
    }
  }
  r.fdp = static_cast<double>(r.false_rejections) /
          static_cast<double>(std::max<std::size_t>(r.rejections, 1));
  r.any_false = r.false_rejections >= 1;
  r.power = static_cast<double>(true_discoveries) /
            static_cast<double>(std::max<std::size_t>(false_nulls, 1));
  return r;
}

ErrorReport error_metrics(const RejectionSet& rejections, const TruthAssignment& truth) {
  std::vector<VertexId> all(truth.size());
  std::iota(all.begin(), all.end(), VertexId{0});
  return error_metrics(rejections, truth, all);
}

ErrorReport error_metrics(const RejectionSet& rejections, const TruthAssignment& truth,
                          std::span<const VertexId> hypotheses) {
  std::vector<bool> member(truth.size(), false);
  for (VertexId h : hypotheses) member.at(h) = true;
  std::vector<bool> flags(truth.size(), false);
  for (VertexId v : rejections.rejected) {
    if (v >= truth.size() || !member[v]) {
      throw std::invalid_argument("rejected vertex " + std::to_string(v) +
                                  " is not among the hypotheses");
    }
    flags[v] = true;
  }
  std::vector<bool> rej;
  std::vector<bool> nt;
  rej.reserve(hypotheses.size());
  nt.reserve(hypotheses.size());
  for (VertexId h : hypotheses) {
    rej.push_back(flags[h]);
    nt.push_back(truth.null_true[h]);
  }
  return error_metrics(rej, nt);
}

nlohmann::json rejection_to_json(const RejectionSet& rs, const ErrorReport& metrics) {
  return nlohmann::json{
      {"rejected", rs.rejected},
      {"frontier", rs.frontier},
      {"metrics",
       {{"V", metrics.false_rejections},
        {"R", metrics.rejections},
        {"FDP", metrics.fdp},
        {"power", metrics.power}}},
  };
}

RejectionSet rejection_from_json(const nlohmann::json& doc) {
  try {
    return RejectionSet{doc.at("rejected").get<std::vector<VertexId>>(),
                        doc.at("frontier").get<std::vector<VertexId>>()};
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed rejection document: ") + e.what());
  }
}

}  // namespace cad
