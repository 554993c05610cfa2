// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cad/interval.hpp"
#include "cad/mc_harness.hpp"
#include "cad/procedures.hpp"
#include "cad/stat_kernels.hpp"
#include "cad/tree_core.hpp"
#include "cad/wavelet.hpp"
#include "../test_util.hpp"

using namespace cad;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("[%s] %2d %-28s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(),
              o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double upper_bound(double p, double n) { return p + 3.0 * std::sqrt(p * (1.0 - p) / n); }

std::vector<SimReport> all_reports;

Outcome brute_force() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = brute_force_eq2(3, {2, 3}, 0.05, 10);
  const double secs = seconds_since(t0);
  const bool ok = r.passed() && r.max_sum <= 0.05 + kLbTolerance && r.trees == 15 && secs < 30.0;
  return {ok, fmt("trees %zu, allocations %zu, assignments %.3e, max sum %.17g, violations %llu, %.1fs < 30s",
                  r.trees, r.allocations, static_cast<double>(r.truth_assignments), r.max_sum,
                  static_cast<unsigned long long>(r.violations), secs)};
}

Outcome fwer_proposition() {
  SimConfig cfg;
  cfg.trees = {{2, 2, 2, 2}};
  cfg.replications = 200000;
  const double bound = SimReport::fwer_bound(0.05, cfg.replications);
  std::string detail;
  bool ok = true;
  for (auto dep : {Dependence::independent, Dependence::nested_means}) {
    cfg.dependence = dep;
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = simulate(cfg, Procedure::cad);
    const double secs = seconds_since(t0);
    all_reports.push_back(r);
    ok = ok && r.fwer_hat <= bound && secs < 60.0;
    detail += fmt("%s fwer %.5f (%.1fs); ", dep == Dependence::independent ? "independent" : "nested_means",
                  r.fwer_hat, secs);
  }
  return {ok, detail + fmt("bound %.5f", bound)};
}

Outcome fwer_corollary() {
  SimConfig cfg;
  cfg.trees = {{2, 2, 2}};
  cfg.truth = TruthKind::explicit_map;
  cfg.truth_map.assign(15, true);
  for (VertexId v : {0, 1, 3, 7}) cfg.truth_map[v] = false;
  cfg.effect_size = 4.0;
  cfg.local = LocalProcedure::holm;
  cfg.replications = 100000;
  const auto r = simulate(cfg, Procedure::cad_extended);
  all_reports.push_back(r);
  const double bound = SimReport::fwer_bound(0.05, cfg.replications);
  return {r.fwer_hat <= bound,
          fmt("extended/Holm fwer %.5f <= %.5f, power %.3f", r.fwer_hat, bound, r.power_hat)};
}

Outcome domination() {
  SimConfig cfg;
  cfg.trees = {{3, 2, 2}};
  cfg.truth = TruthKind::random_density;
  cfg.density = 0.5;
  cfg.effect_size = 2.0;
  cfg.replications = 20000;
  for (auto dep : {Dependence::independent, Dependence::nested_means}) {
    cfg.dependence = dep;
    const auto rs = compare_procedures(cfg, {Procedure::cad, Procedure::cad_extended, Procedure::holm_flat,
                                             Procedure::bonferroni_flat, Procedure::bh_flat});
    all_reports.insert(all_reports.end(), rs.begin(), rs.end());
  }
  std::uint64_t violations = 0;
  bool ordered = true;
  for (const auto& r : all_reports) {
    violations += r.domination_violations;
    ordered = ordered && r.fdr_hat <= r.fwer_hat && r.pcer_hat <= r.fwer_hat;
  }
  return {violations == 0 && ordered,
          fmt("%zu reports, per-replication violations %llu, fdr/pcer <= fwer %s", all_reports.size(),
              static_cast<unsigned long long>(violations), ordered ? "yes" : "no")};
}

Outcome reduction() {
  std::mt19937_64 rng(2024);
  std::size_t mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto c = testing::random_path(rng);
    const auto lifted = testing::lift_path(c);
    const auto plain = cad_run(c.tree, c.alloc, c.pvals);
    const auto ext = cad_extended_run(lifted.tree, lifted.alloc, lifted.local, LocalProcedure::holm);
    std::vector<VertexId> shifted;
    for (VertexId v : plain.rejected) shifted.push_back(v + 1);
    if (ext.rejected != shifted || ext.frontier != plain.frontier) ++mismatches;
  }
  return {mismatches == 0, fmt("1000 draws, mismatches %zu", mismatches)};
}

Outcome naive_equivalence() {
  std::mt19937_64 rng(77);
  const auto shapes = testing::shapes_up_to(15);
  std::size_t mismatches = 0, runs = 0;
  for (const auto& b : shapes) {
    const auto t = build_complete_tree(b, b.size());
    const auto uniform = allocate_alpha_uniform(t, 0.05);
    for (int d = 0; d < 10000; ++d) {
      const auto alloc =
          d % 2 == 0 ? uniform : allocate_alpha_weighted(t, 0.05, testing::random_weights(t.size(), rng));
      PValueMap p{testing::random_pvalues(alloc.alpha, rng)};
      const auto fast = cad_run(t, alloc, p);
      std::set<VertexId> rej, front;
      testing::naive_cad(t, alloc.alpha, p.p, t.root(), rej, front);
      if (fast.rejected != std::vector<VertexId>(rej.begin(), rej.end()) ||
          fast.frontier != std::vector<VertexId>(front.begin(), front.end())) {
        ++mismatches;
      }
      ++runs;
    }
  }
  return {mismatches == 0, fmt("%zu shapes x 10^4 draws, mismatches %zu of %zu", shapes.size(), mismatches, runs)};
}

Outcome kernels() {
  double worst_cdf = 0.0;
  for (int i = -16000; i <= 16000; ++i) {
    const double x = i * 0.0005;
    worst_cdf = std::max(worst_cdf, std::fabs(std_normal_cdf(x) - static_cast<double>(testing::cdf_series(x))));
  }
  double worst_rt = 0.0;
  for (int i = 1; i < 100000; ++i) {
    const double p = i / 100000.0;
    worst_rt = std::max(worst_rt, std::fabs(std_normal_cdf(std_normal_quantile(p)) - p));
  }
  // Deep tails, relative to p.
  double worst_tail = 0.0;
  for (int e = 3; e <= 15; ++e) {
    const double p = std::pow(10.0, -e);
    worst_tail = std::max(worst_tail, std::fabs(std_normal_cdf(std_normal_quantile(p)) - p) / p);
  }
  return {worst_cdf <= 1e-12 && worst_rt <= 1e-8 && worst_tail <= 1e-8,
          fmt("max |cdf - series| %.2e on [-8, 8], round trip %.2e, tail relative %.2e", worst_cdf, worst_rt,
              worst_tail)};
}

Outcome haar() {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst_rt = 0.0, worst_energy = 0.0;
  for (std::size_t n = 4; n <= (std::size_t{1} << 14); n *= 2) {
    for (int rep = 0; rep < 10; ++rep) {
      Eigen::VectorXd x(static_cast<Eigen::Index>(n));
      for (auto& v : x) v = g(rng) * (1 + rep);
      const auto t = haar_forward(x);
      worst_rt = std::max(worst_rt, (haar_inverse(t) - x).cwiseAbs().maxCoeff());
      worst_energy = std::max(worst_energy, std::fabs(t.energy() - x.squaredNorm()) / x.squaredNorm());
    }
  }
  return {worst_rt <= 1e-10 && worst_energy <= 1e-9,
          fmt("n = 4..16384, max round trip %.2e, max relative energy error %.2e", worst_rt, worst_energy)};
}

Outcome wavelet_fwer() {
  const std::uint64_t reps = 20000;
  std::uint64_t any = 0;
  Eigen::VectorXd x(1024);
  for (std::uint64_t i = 0; i < reps; ++i) {
    std::mt19937_64 rng(stream_seed(909, i));
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& v : x) v = g(rng);
    const auto keep = cad_keep_mask(haar_forward(x), 0.05, 1.0);
    any += std::any_of(keep.begin(), keep.end(),
                       [](const auto& l) { return std::find(l.begin(), l.end(), true) != l.end(); });
  }
  const double frac = static_cast<double>(any) / static_cast<double>(reps);
  const double bound = upper_bound(0.05, static_cast<double>(reps));
  const auto th = level_thresholds(9, 0.05, 1.0);
  bool increasing = true;
  for (std::size_t j = 1; j < th.size(); ++j) increasing = increasing && th[j].threshold > th[j - 1].threshold;
  return {frac <= bound && increasing,
          fmt("any kept %.5f <= %.5f; thresholds %.3f .. %.3f strictly increasing %s", frac, bound,
              th.front().threshold, th.back().threshold, increasing ? "yes" : "no")};
}

Outcome denoising() {
  const double scale = 8.0 / testing::kBlocksMinJump;
  const auto clean_v = testing::blocks_signal(1024, scale);
  const Eigen::VectorXd clean = Eigen::Map<const Eigen::VectorXd>(clean_v.data(), 1024);
  int better = 0;
  std::vector<double> ratio;
  for (std::uint64_t i = 0; i < 500; ++i) {
    std::mt19937_64 rng(stream_seed(1010, i));
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::VectorXd noisy = clean;
    for (auto& v : noisy) v += g(rng);
    const auto out = denoise(noisy, 0.05, SigmaMode::known, 1.0);
    const double mse_in = (noisy - clean).squaredNorm();
    const double mse_out = (out.signal - clean).squaredNorm();
    better += mse_out < mse_in;
    ratio.push_back(mse_in / mse_out);
  }
  std::sort(ratio.begin(), ratio.end());
  return {better >= 475, fmt("improved in %d/500 (need 475); median MSE factor %.2f, min %.2f", better,
                             ratio[ratio.size() / 2], ratio.front())};
}

Outcome localization() {
  const std::size_t T = 256, R = 50, depth = 5, reps = 1000;
  const double delta = 10.0 / std::sqrt(static_cast<double>(R));
  const auto itree = build_interval_tree(T, depth, 2);
  const auto leaves = itree.tree.leaves();
  std::size_t hit = 0, false_any = 0;
  TrialMatrix m;
  m.data.resize(static_cast<Eigen::Index>(R), static_cast<Eigen::Index>(T));
  for (std::uint64_t i = 0; i < reps; ++i) {
    std::mt19937_64 rng(stream_seed(1111, i));
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& v : m.data.reshaped()) v = g(rng);
    if (!localize(m, 0.05, depth, 2).result.rejected.empty()) ++false_any;

    for (auto& v : m.data.reshaped()) v = g(rng);
    const VertexId leaf = leaves[i % leaves.size()];
    const auto& node = itree.nodes[leaf];
    m.data.middleCols(static_cast<Eigen::Index>(node.start), static_cast<Eigen::Index>(node.size())).array() +=
        delta;
    const auto& rej = localize(m, 0.05, depth, 2).result.rejected;
    hit += std::binary_search(rej.begin(), rej.end(), leaf);
  }
  const double hit_rate = static_cast<double>(hit) / reps;
  const double null_rate = static_cast<double>(false_any) / reps;
  const double bound = upper_bound(0.05, reps);
  return {hit_rate >= 0.99 && null_rate <= bound,
          fmt("planted leaf rejected %.3f (need 0.99); null runs rejecting %.3f <= %.4f", hit_rate, null_rate,
              bound)};
}

}  // namespace

int main() {
  report(1, "first-true-set bound", brute_force);
  report(2, "FWER, tree procedure", fwer_proposition);
  report(3, "FWER, extended procedure", fwer_corollary);
  report(4, "domination", domination);
  report(5, "path reduction", reduction);
  report(6, "naive equivalence", naive_equivalence);
  report(7, "normal kernels", kernels);
  report(8, "Haar transform", haar);
  report(9, "wavelet FWER", wavelet_fwer);
  report(10, "denoising", denoising);
  report(11, "localization", localization);
  std::printf("%s: %d of 11 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
