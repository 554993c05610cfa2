#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cad/mc_harness.hpp"
#include "test_util.hpp"

using namespace cad;

namespace {

SimConfig base_config(std::vector<std::size_t> branching, std::uint64_t n) {
  SimConfig c;
  c.trees = {std::move(branching)};
  c.replications = n;
  c.alpha = 0.05;
  return c;
}

double binomial_se(double p, std::uint64_t n) {
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

}  // namespace

TEST_CASE("single exact-level test has FWER alpha") {
  auto cfg = base_config({}, 100000);
  const auto r = simulate(cfg, Procedure::cad);
  CHECK(std::fabs(r.fwer_hat - 0.05) <= 3.0 * binomial_se(0.05, cfg.replications));
  CHECK(r.hypotheses == 1);
  CHECK(r.domination_violations == 0);
}

TEST_CASE("global null on a binary tree stays within the bound") {
  auto cfg = base_config({2, 2, 2, 2}, 50000);
  for (auto dep : {Dependence::independent, Dependence::nested_means}) {
    cfg.dependence = dep;
    const auto reports =
        compare_procedures(cfg, {Procedure::cad, Procedure::cad_extended, Procedure::holm_flat,
                                 Procedure::bonferroni_flat, Procedure::bh_flat});
    for (const auto& r : reports) {
      CHECK(r.fwer_hat <= SimReport::fwer_bound(0.05, cfg.replications));
      CHECK(r.fdr_hat <= r.fwer_hat + 1e-12);
      CHECK(r.pcer_hat <= r.fwer_hat + 1e-12);
      CHECK(r.domination_violations == 0);
    }
    // Under the global null the root is tested at alpha and nothing below can
    // be reached without rejecting it, so the root fixes the FWER.
    CHECK(reports[0].rejection_counts[0] == reports[0].any_false_count);
  }
}

TEST_CASE("no true nulls means no false rejections") {
  auto cfg = base_config({2, 2}, 5000);
  cfg.truth = TruthKind::all_false;
  cfg.effect_size = 0.0;
  for (const auto& r : compare_procedures(cfg, {Procedure::cad, Procedure::cad_extended,
                                                Procedure::holm_flat, Procedure::bh_flat})) {
    CHECK(r.fwer_hat == 0.0);
    CHECK(r.any_false_count == 0);
    CHECK(r.fdr_hat == 0.0);
  }
}

TEST_CASE("determinism across runs and thread counts") {
  auto cfg = base_config({3, 2, 2}, 9000);
  cfg.truth = TruthKind::random_density;
  cfg.density = 0.6;
  cfg.effect_size = 2.5;
  cfg.threads = 1;
  const auto a = compare_procedures(cfg, {Procedure::cad, Procedure::bh_flat});
  const auto b = compare_procedures(cfg, {Procedure::cad, Procedure::bh_flat});
  cfg.threads = 3;
  const auto c = compare_procedures(cfg, {Procedure::cad, Procedure::bh_flat});
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].rejection_counts == b[i].rejection_counts);
    CHECK(a[i].rejection_counts == c[i].rejection_counts);
    CHECK(a[i].any_false_count == c[i].any_false_count);
    CHECK(a[i].fdr_hat == c[i].fdr_hat);
    CHECK(a[i].pcer_hat == c[i].pcer_hat);
    CHECK(a[i].power_hat == c[i].power_hat);
  }
  cfg.seed += 1;
  const auto d = compare_procedures(cfg, {Procedure::cad, Procedure::bh_flat});
  CHECK(d[0].rejection_counts != a[0].rejection_counts);
}

TEST_CASE("paired comparison: Holm power never below Bonferroni") {
  auto cfg = base_config({2, 2, 2}, 20000);
  cfg.truth = TruthKind::random_density;
  cfg.density = 0.5;
  cfg.effect_size = 3.0;
  const auto r = compare_procedures(cfg, {Procedure::holm_flat, Procedure::bonferroni_flat});
  CHECK(r[0].power_hat >= r[1].power_hat);
  for (std::size_t v = 0; v < r[0].rejection_counts.size(); ++v) {
    CHECK(r[0].rejection_counts[v] >= r[1].rejection_counts[v]);
  }
  CHECK(r[0].power_hat > 0.0);
  const auto one = compare_procedures(cfg, {Procedure::cad});
  CHECK(one.size() == 1);
  std::istringstream table(format_table(one));
  std::string line;
  int lines = 0;
  while (std::getline(table, line)) ++lines;
  CHECK(lines == 2);
  CHECK_THROWS_AS(compare_procedures(cfg, {}), std::invalid_argument);
}

TEST_CASE("extended procedure under a mixed truth assignment") {
  auto cfg = base_config({2, 2, 2}, 40000);
  // One all-false root-to-leaf path 0-1-3-7, every other vertex a true null.
  cfg.truth = TruthKind::explicit_map;
  cfg.truth_map.assign(15, true);
  for (VertexId v : {0, 1, 3, 7}) cfg.truth_map[v] = false;
  cfg.effect_size = 4.0;
  const auto r = compare_procedures(cfg, {Procedure::cad, Procedure::cad_extended});
  for (const auto& rep : r) {
    CHECK(rep.fwer_hat <= SimReport::fwer_bound(0.05, cfg.replications));
    CHECK(rep.domination_violations == 0);
  }
  CHECK(r[1].hypotheses == 14);
  CHECK(r[0].power_hat > 0.5);
}

TEST_CASE("forest and weighted allocation configs") {
  SimConfig cfg;
  cfg.trees = {{2, 2}, {3}, {}};
  cfg.allocation = AllocationKind::weighted;
  cfg.replications = 30000;
  const auto r = simulate(cfg, Procedure::cad);
  CHECK(r.rejection_counts.size() == 7 + 4 + 1);
  CHECK(r.fwer_hat <= SimReport::fwer_bound(0.05, cfg.replications));
  CHECK(r.hypotheses == 12);
}

TEST_CASE("config validation") {
  SimConfig cfg;
  cfg.replications = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.replications = kMaxReplications + 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SimConfig{};
  cfg.truth = TruthKind::explicit_map;
  cfg.truth_map = {true, false};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SimConfig{};
  cfg.effect_size = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SimConfig{};
  cfg.alpha = 1.0;
  CHECK_THROWS_AS(simulate(cfg, Procedure::cad), std::invalid_argument);
}

TEST_CASE("config and report documents") {
  const auto doc = nlohmann::json::parse(R"({
    "tree": {"branching": [2, 2], "depth": 2},
    "alpha": 0.1,
    "truth": [0, 1, 1, 1, 1, 1, 1],
    "effect_size": 2.0,
    "dependence": "nested_means",
    "local_procedure": "bonferroni",
    "replications": 2000,
    "seed": 99
  })");
  const auto cfg = sim_config_from_json(doc);
  CHECK(cfg.trees.size() == 1);
  CHECK(cfg.alpha == 0.1);
  CHECK(cfg.truth == TruthKind::explicit_map);
  CHECK(cfg.dependence == Dependence::nested_means);
  CHECK(cfg.local == LocalProcedure::bonferroni);
  CHECK(cfg.seed == 99);
  const auto again = sim_config_from_json(sim_config_to_json(cfg));
  CHECK(sim_config_to_json(again) == sim_config_to_json(cfg));

  const auto r = simulate(cfg, Procedure::cad);
  const auto back = sim_report_from_json(nlohmann::json::parse(sim_report_to_json(r).dump()));
  CHECK(back.rejection_counts == r.rejection_counts);
  CHECK(back.fwer_hat == r.fwer_hat);
  CHECK(back.fdr_hat == r.fdr_hat);
  CHECK(back.procedure == r.procedure);

  const auto csv = rejection_frequency_csv(cfg, {r});
  CHECK(csv.rfind("vertex,tree,local_vertex,depth,cad\n", 0) == 0);

  CHECK_THROWS_AS(sim_config_from_json(nlohmann::json::parse(R"({"tree": {"branching": [2]}, "alpah": 0.1})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(sim_config_from_json(nlohmann::json::parse(R"({"alpha": 0.1})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(sim_config_from_json(nlohmann::json::parse(R"({"tree": {"branching": [2]}, "replications": -3})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(sim_config_from_json(nlohmann::json::parse(R"({"tree": {"branching": [2]}, "dependence": "weird"})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(sim_report_from_json(nlohmann::json::object()), std::invalid_argument);
}

TEST_CASE("stream seeds are distinct") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 100000; ++i) seen.insert(stream_seed(kDefaultSeed, i));
  CHECK(seen.size() == 100000);
  CHECK(stream_seed(1, 0) != stream_seed(2, 0));
}

TEST_CASE("brute-force enumeration agrees with literal enumeration") {
  std::mt19937_64 rng(47);
  for (const auto& b : testing::shapes_up_to(12)) {
    const auto t = build_complete_tree(b, b.size());
    for (int k = 0; k < 2; ++k) {
      const auto a = k == 0 ? allocate_alpha_uniform(t, 0.05)
                            : allocate_alpha_weighted(t, 0.05, testing::random_weights(t.size(), rng));
      std::set<std::set<VertexId>> sets;
      double worst = 0.0;
      for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << t.size()); ++mask) {
        TruthAssignment tr{std::vector<bool>(t.size())};
        for (std::size_t v = 0; v < t.size(); ++v) tr.null_true[v] = (mask >> v) & 1;
        const auto f = testing::first_true_literal(t, tr);
        double s = 0.0;
        for (VertexId v : f) s += a[v];
        worst = std::max(worst, s);
        sets.insert(f);
      }
      const auto rep = brute_force_tree(t, a);
      CHECK(rep.truth_assignments == (std::uint64_t{1} << t.size()));
      CHECK(rep.first_true_sets == sets.size());
      CHECK(rep.max_sum == doctest::Approx(worst).epsilon(1e-14));
      CHECK(rep.passed());
    }
  }
}

TEST_CASE("brute_force_eq2 examples") {
  const auto t1 = build_complete_tree({2});
  const auto r1 = brute_force_tree(t1, allocate_alpha_uniform(t1, 0.05));
  CHECK(r1.truth_assignments == 8);
  CHECK(r1.max_sum == 0.05);
  const auto t2 = build_complete_tree({2, 2});
  CHECK(brute_force_tree(t2, allocate_alpha_uniform(t2, 0.05)).truth_assignments == 128);

  const auto small = brute_force_eq2(2, {2}, 0.05, 3);
  CHECK(small.trees == 3);
  CHECK(small.allocations == 12);
  CHECK(small.passed());
  CHECK(small.truth_assignments == 4 * (2 + 8 + 128));

  CHECK_THROWS_AS(brute_force_eq2(4, {2}), BudgetExceeded);
  CHECK_THROWS_AS(brute_force_eq2(2, {4}), BudgetExceeded);
  CHECK_THROWS_AS(brute_force_eq2(2, {0}), std::invalid_argument);
}

TEST_CASE("brute force detects an LB violation") {
  const auto t = build_complete_tree({2});
  const auto r = brute_force_tree(t, AlphaAllocation{{0.05, 0.04, 0.04}});
  CHECK_FALSE(r.passed());
  CHECK(r.max_sum == doctest::Approx(0.08));
}

TEST_CASE("brute_force_eq3") {
  const auto t = build_complete_tree({2, 2});
  const auto a = allocate_alpha_uniform(t, 0.05);
  auto r = brute_force_eq3(t, a, TruthAssignment::all(7, true));
  CHECK(r.passed());
  CHECK(r.root_sum == 0.05);
  CHECK(r.vertices_checked == 7);

  r = brute_force_eq3(t, a, TruthAssignment{{false, true, false, false, false, true, true}});
  CHECK(r.passed());
  CHECK(r.root_sum == doctest::Approx(0.05).epsilon(1e-15));

  // A leaf's own subtree sum is 0 or alpha(leaf).
  std::mt19937_64 rng(53);
  std::bernoulli_distribution coin(0.5);
  for (int rep = 0; rep < 200; ++rep) {
    TruthAssignment tr{std::vector<bool>(7)};
    for (std::size_t v = 0; v < 7; ++v) tr.null_true[v] = coin(rng);
    CHECK(brute_force_eq3(t, a, tr).passed());
    for (VertexId l : t.leaves()) {
      const double s = subtree_alpha_sum(t, a, tr, l);
      CHECK((s == 0.0 || s == a[l]));
    }
  }
  CHECK_FALSE(brute_force_eq3(t, AlphaAllocation{{0.05, 0.04, 0.04, 0.01, 0.01, 0.01, 0.01}},
                              TruthAssignment{{false, true, true, true, true, true, true}})
                  .passed());
}
