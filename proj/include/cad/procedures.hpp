#pragma once

// Conquer-and-divide testing on trees, its extended variant with local
// multiple-testing problems, and flat baselines (Bonferroni, Holm, BH).

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cad/tree_core.hpp"

namespace cad {

/// p-values indexed by vertex id. NaN marks a missing entry.
struct PValueMap {
  std::vector<double> p;

  std::size_t size() const { return p.size(); }
};

/// Output of a tree procedure. Both lists are sorted ascending.
struct RejectionSet {
  std::vector<VertexId> rejected;
  /// Vertices where the procedure stopped (cad_run: accepted vertices;
  /// cad_extended_run: vertices whose local problem accepted something).
  std::vector<VertexId> frontier;

  bool operator==(const RejectionSet&) const = default;
};

enum class LocalProcedure { holm, bonferroni };

/// The family of single hypotheses H0(v'), v' in d(v), tested at level(v).
struct LocalProblem {
  VertexId vertex = 0;
  std::vector<VertexId> hypotheses;
  double level = 0.0;
  LocalProcedure kind = LocalProcedure::holm;
};

LocalProblem local_problem(const TestTree& tree, const AlphaAllocation& alloc, VertexId v,
                           LocalProcedure kind = LocalProcedure::holm);

struct ErrorReport {
  std::size_t false_rejections = 0;  // V
  std::size_t rejections = 0;        // R
  double fdp = 0.0;                  // V / max(R, 1)
  bool any_false = false;            // V >= 1
  double power = 0.0;                // rejected false nulls / max(#false nulls, 1)
};

/// Tests top-down, continuing below a vertex only while its null is rejected
/// (p(v) <= alpha(v)). Throws on an LB violation or a missing p-value at a
/// vertex that has to be tested.
RejectionSet cad_run(const TestTree& tree, const AlphaAllocation& alloc, const PValueMap& pvals);

/// Runs cad_run per tree with the forest's root levels. allocations[i] must
/// have allocations[i][root] == forest.root_levels[i].
std::vector<RejectionSet> cad_run_forest(const Forest& forest,
                                         std::span<const AlphaAllocation> allocations,
                                         std::span<const PValueMap> pvals);

/// Extended procedure: at every active vertex the children's hypotheses are
/// tested jointly by the local procedure at level alpha(v); testing continues
/// at all children only if every one of them is rejected. local_pvals[v] holds
/// the children's p-values in child order (empty for leaves). Returned
/// `rejected` lists the rejected single hypotheses, identified by child vertex id.
RejectionSet cad_extended_run(const TestTree& tree, const AlphaAllocation& alloc,
                              std::span<const std::vector<double>> local_pvals,
                              LocalProcedure kind = LocalProcedure::holm);

/// Holm step-down. Flags are in input order.
std::vector<bool> holm(std::span<const double> pvals, double level);
std::vector<bool> bonferroni(std::span<const double> pvals, double level);
/// Benjamini-Hochberg step-up at target FDR q.
std::vector<bool> benjamini_hochberg(std::span<const double> pvals, double q);

std::vector<bool> run_local(LocalProcedure kind, std::span<const double> pvals, double level);

/// Flags indexed identically; throws on a length mismatch.
ErrorReport error_metrics(const std::vector<bool>& rejected, const std::vector<bool>& null_true);
/// Metrics over every vertex covered by truth.
ErrorReport error_metrics(const RejectionSet& rejections, const TruthAssignment& truth);
/// Metrics restricted to the listed hypotheses (e.g. the non-root vertices
/// for the extended procedure).
ErrorReport error_metrics(const RejectionSet& rejections, const TruthAssignment& truth,
                          std::span<const VertexId> hypotheses);

/// {rejected, frontier, metrics: {V, R, FDP, power}}
nlohmann::json rejection_to_json(const RejectionSet& rs, const ErrorReport& metrics);
RejectionSet rejection_from_json(const nlohmann::json& doc);

}  // namespace cad
