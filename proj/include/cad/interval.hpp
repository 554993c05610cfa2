#pragma once

// Localizing time regions with nonzero mean by conquer-and-divide testing
// over successive m-adic subdivisions of the time axis.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "cad/procedures.hpp"
#include "cad/stat_kernels.hpp"
#include "cad/tree_core.hpp"

namespace cad {

/// R trials (rows) by T time points (columns), i.i.d. noise of known scale sigma.
struct TrialMatrix {
  Eigen::MatrixXd data;
  double sigma = 1.0;

  Eigen::Index trials() const { return data.rows(); }
  Eigen::Index length() const { return data.cols(); }

  /// Throws std::invalid_argument on an empty matrix, non-finite samples or sigma <= 0.
  void validate() const;
};

/// Region [start, end) of the time axis covered by a vertex.
struct IntervalNode {
  VertexId vertex = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t depth = 0;

  std::size_t size() const { return end - start; }
};

struct IntervalTree {
  TestTree tree;
  std::vector<IntervalNode> nodes;  // indexed by vertex id
};

/// Root covers [0, T); every node splits into `arity` contiguous parts whose
/// sizes differ by at most one, leftmost parts taking the remainder.
/// Throws when arity^depth > T.
IntervalTree build_interval_tree(std::size_t length, std::size_t depth, std::size_t arity);

/// Two-sided z-test of zero mean on all samples inside the node's interval.
double interval_pvalue(const TrialMatrix& trials, const IntervalNode& node);

/// p-values for every node, computed from column prefix sums.
PValueMap interval_pvalues(const TrialMatrix& trials, const IntervalTree& itree);

struct Localization {
  IntervalTree intervals;
  PValueMap pvalues;
  RejectionSet result;
  /// Rejected nodes none of whose children were rejected.
  std::vector<VertexId> maximal;
};

Localization localize(const TrialMatrix& trials, double alpha, std::size_t depth,
                      std::size_t arity);

/// {alpha, depth, arity, intervals: [{vertex, start, end, depth, p_value, decision}],
///  rejected, maximal, frontier}
nlohmann::json localization_to_json(const Localization& loc, double alpha);

}  // namespace cad
