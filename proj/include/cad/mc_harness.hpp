#pragma once

// Monte Carlo estimation of error rates for tree and flat procedures, and
// exhaustive checks of the first-true-set inequalities behind the
// familywise-error guarantee.

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cad/procedures.hpp"
#include "cad/stat_kernels.hpp"
#include "cad/tree_core.hpp"

namespace cad {

enum class Procedure { cad, cad_extended, holm_flat, bonferroni_flat, bh_flat };
enum class Dependence { independent, nested_means };
enum class AllocationKind { uniform, weighted };
enum class TruthKind { global_null, all_false, random_density, explicit_map };

std::string to_string(Procedure p);
Procedure procedure_from_string(const std::string& s);

/// Thrown when an exhaustive check is asked to enumerate beyond its budget.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultSeed = 12345;
inline constexpr std::uint64_t kMaxReplications = std::uint64_t{1} << 40;

struct SimConfig {
  /// One branching list per tree; a single entry is an ordinary tree.
  std::vector<std::vector<std::size_t>> trees{{2, 2}};
  AllocationKind allocation = AllocationKind::uniform;
  /// Optional explicit weights per tree (vertex-indexed). Empty with a
  /// weighted allocation means weights are drawn from the seed.
  std::vector<std::vector<double>> weights;
  double alpha = 0.05;
  TruthKind truth = TruthKind::global_null;
  /// Explicit truth, concatenated over trees in breadth-first order.
  std::vector<bool> truth_map;
  double density = 0.5;
  /// Mean shift (in z units) of every false null.
  double effect_size = 0.0;
  Dependence dependence = Dependence::independent;
  Sided sided = Sided::two_sided;
  LocalProcedure local = LocalProcedure::holm;
  std::uint64_t replications = 10000;
  std::uint64_t seed = kDefaultSeed;
  /// 0 selects std::thread::hardware_concurrency().
  unsigned threads = 1;

  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;
};

SimConfig sim_config_from_json(const nlohmann::json& doc);
nlohmann::json sim_config_to_json(const SimConfig& cfg);

struct SimReport {
  Procedure procedure = Procedure::cad;
  std::uint64_t replications = 0;
  std::uint64_t any_false_count = 0;
  double fwer_hat = 0.0;
  double fwer_se = 0.0;  // binomial, normal approximation
  double fdr_hat = 0.0;
  double pcer_hat = 0.0;
  double power_hat = 0.0;
  /// Replications where FDP > 1{V>=1} or V/m > 1{V>=1}; always 0 for a
  /// correct implementation.
  std::uint64_t domination_violations = 0;
  std::size_t hypotheses = 0;
  /// Per global vertex id (trees concatenated).
  std::vector<std::uint64_t> rejection_counts;
  double wall_seconds = 0.0;
  nlohmann::json config;

  double rejection_frequency(std::size_t v) const {
    return static_cast<double>(rejection_counts.at(v)) / static_cast<double>(replications);
  }
  /// alpha + 3 binomial standard errors at the nominal level.
  static double fwer_bound(double alpha, std::uint64_t n);
};

nlohmann::json sim_report_to_json(const SimReport& r);
SimReport sim_report_from_json(const nlohmann::json& doc);

/// Seed of replication i's random stream; independent of scheduling.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t i);

SimReport simulate(const SimConfig& config, Procedure procedure);

/// All procedures see identical simulated statistics in every replication.
std::vector<SimReport> compare_procedures(const SimConfig& config,
                                          const std::vector<Procedure>& procedures);

std::string format_table(const std::vector<SimReport>& reports);
/// vertex,tree,local_vertex,depth,<procedure...> rejection frequencies.
std::string rejection_frequency_csv(const SimConfig& config, const std::vector<SimReport>& reports);

struct BruteForceReport {
  std::size_t trees = 0;
  std::size_t allocations = 0;
  /// Truth assignments covered (sum of 2^|V| over trees and allocations).
  std::uint64_t truth_assignments = 0;
  /// Distinct first-true sets evaluated.
  std::uint64_t first_true_sets = 0;
  std::uint64_t violations = 0;
  double alpha = 0.0;
  double max_sum = 0.0;

  bool passed() const { return violations == 0; }
};

/// Every complete tree with depth <= max_depth and per-layer branching drawn
/// from `branchings`, under the uniform allocation plus `weighted_allocations`
/// random weighted ones, against every truth assignment: checks that the first-
/// true set's alpha mass never exceeds alpha. Truth assignments that agree above
/// and on the first-true set are evaluated once and counted with multiplicity.
/// Throws BudgetExceeded for max_depth > 3 or a branching factor > 3.
BruteForceReport brute_force_eq2(std::size_t max_depth, const std::vector<std::size_t>& branchings,
                                 double alpha = 0.05, std::size_t weighted_allocations = 10,
                                 std::uint64_t seed = kDefaultSeed);

/// Same check for a single tree and allocation.
BruteForceReport brute_force_tree(const TestTree& tree, const AlphaAllocation& alloc);

struct SubtreeSumReport {
  std::size_t vertices_checked = 0;
  std::size_t violations = 0;
  double root_sum = 0.0;
  /// max over vertices of subtree_alpha_sum - alpha(vertex)
  double worst_slack = 0.0;

  bool passed() const { return violations == 0; }
};

/// Checks subtree_alpha_sum(rho) <= alpha(rho) + 1e-12 at every vertex rho.
SubtreeSumReport brute_force_eq3(const TestTree& tree, const AlphaAllocation& alloc,
                                 const TruthAssignment& truth);

nlohmann::json brute_force_to_json(const BruteForceReport& r);

}  // namespace cad
