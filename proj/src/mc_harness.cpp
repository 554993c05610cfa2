#include "cad/mc_harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace cad {

namespace {

using nlohmann::json;

constexpr std::uint64_t kChunk = 1024;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Everything about the simulated family that does not change per replication.
struct Model {
  std::vector<TestTree> trees;
  std::vector<AlphaAllocation> allocations;
  std::vector<std::size_t> offsets;  // global id of each tree's root
  std::size_t n = 0;
  std::vector<std::size_t> tree_of;         // global vertex -> tree
  std::vector<std::vector<std::size_t>> leaves_under;  // global ids
  std::vector<std::size_t> leaves;          // global ids
  std::vector<std::size_t> non_roots;       // global ids
  std::vector<std::size_t> all;             // global ids

  explicit Model(const SimConfig& cfg) {
    const std::size_t k = cfg.trees.size();
    for (const auto& b : cfg.trees) trees.push_back(build_complete_tree(b, b.size()));
    const Forest forest = make_forest(trees, cfg.alpha);
    for (std::size_t t = 0; t < k; ++t) {
      offsets.push_back(n);
      n += trees[t].size();
      const double root_level = forest.root_levels[t];
      if (cfg.allocation == AllocationKind::uniform) {
        allocations.push_back(allocate_alpha_uniform(trees[t], root_level));
      } else if (!cfg.weights.empty()) {
        allocations.push_back(allocate_alpha_weighted(trees[t], root_level, cfg.weights[t]));
      } else {
        std::mt19937_64 rng(stream_seed(cfg.seed, ~std::uint64_t{0} - t));
        std::uniform_real_distribution<double> u(0.25, 1.0);
        std::vector<double> w(trees[t].size());
        for (double& x : w) x = u(rng);
        allocations.push_back(allocate_alpha_weighted(trees[t], root_level, w));
      }
    }
    tree_of.resize(n);
    leaves_under.resize(n);
    for (std::size_t t = 0; t < k; ++t) {
      const auto off = offsets[t];
      for (const Vertex& v : trees[t].vertices()) {
        const std::size_t g = off + v.id;
        tree_of[g] = t;
        all.push_back(g);
        if (v.parent) non_roots.push_back(g);
        if (v.children.empty()) leaves.push_back(g);
        for (VertexId l : trees[t].leaves_under(v.id)) leaves_under[g].push_back(off + l);
      }
    }
  }
};

struct Accum {
  std::uint64_t any_false = 0;
  std::uint64_t violations = 0;
  double fdp = 0.0;
  double pcer = 0.0;
  double power = 0.0;
  std::vector<std::uint64_t> counts;
};

// Draws truth and p-values for one replication.
void draw_replication(const SimConfig& cfg, const Model& model, std::uint64_t i,
                      std::vector<bool>& truth, std::vector<double>& pvals,
                      std::vector<double>& z) {
  std::mt19937_64 rng(stream_seed(cfg.seed, i));
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = model.n;
  truth.assign(n, true);
  switch (cfg.truth) {
    case TruthKind::global_null:
      break;
    case TruthKind::all_false:
      truth.assign(n, false);
      break;
    case TruthKind::explicit_map:
      truth = cfg.truth_map;
      break;
    case TruthKind::random_density: {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (std::size_t v = 0; v < n; ++v) truth[v] = u(rng) < cfg.density;
      break;
    }
  }
  z.assign(n, 0.0);
  if (cfg.dependence == Dependence::independent) {
    for (std::size_t v = 0; v < n; ++v) {
      z[v] = normal(rng) + (truth[v] ? 0.0 : cfg.effect_size);
    }
  } else {
    // Internal statistics aggregate their leaves, so their truth follows the leaves.
    for (std::size_t l : model.leaves) z[l] = normal(rng) + (truth[l] ? 0.0 : cfg.effect_size);
    for (std::size_t v = 0; v < n; ++v) {
      const auto& under = model.leaves_under[v];
      if (under.size() == 1 && under.front() == v) continue;
      double s = 0.0;
      bool null_true = true;
      for (std::size_t l : under) {
        s += z[l];
        null_true = null_true && truth[l];
      }
      z[v] = s / std::sqrt(static_cast<double>(under.size()));
      truth[v] = null_true;
    }
  }
  pvals.resize(n);
  for (std::size_t v = 0; v < n; ++v) pvals[v] = z_score_pvalue(z[v], cfg.sided);
}

const std::vector<std::size_t>& hypotheses_of(const Model& model, Procedure p) {
  switch (p) {
    case Procedure::cad:
      return model.all;
    case Procedure::cad_extended:
      return model.non_roots;
    default:
      return model.leaves;
  }
}

void run_procedure(const SimConfig& cfg, const Model& model, Procedure proc,
                   const std::vector<double>& pvals, std::vector<bool>& rejected) {
  rejected.assign(model.n, false);
  switch (proc) {
    case Procedure::cad:
      for (std::size_t t = 0; t < model.trees.size(); ++t) {
        const auto off = model.offsets[t];
        const auto& tree = model.trees[t];
        PValueMap pm{std::vector<double>(pvals.begin() + static_cast<std::ptrdiff_t>(off),
                                         pvals.begin() + static_cast<std::ptrdiff_t>(off + tree.size()))};
        for (VertexId v : cad_run(tree, model.allocations[t], pm).rejected) rejected[off + v] = true;
      }
      return;
    case Procedure::cad_extended:
      for (std::size_t t = 0; t < model.trees.size(); ++t) {
        const auto off = model.offsets[t];
        const auto& tree = model.trees[t];
        std::vector<std::vector<double>> local(tree.size());
        for (const Vertex& v : tree.vertices()) {
          for (VertexId c : v.children) local[v.id].push_back(pvals[off + c]);
        }
        for (VertexId v : cad_extended_run(tree, model.allocations[t], local, cfg.local).rejected) {
          rejected[off + v] = true;
        }
      }
      return;
    case Procedure::holm_flat:
    case Procedure::bonferroni_flat:
    case Procedure::bh_flat: {
      std::vector<double> lp;
      lp.reserve(model.leaves.size());
      for (std::size_t l : model.leaves) lp.push_back(pvals[l]);
      const auto flags = proc == Procedure::holm_flat       ? holm(lp, cfg.alpha)
                         : proc == Procedure::bonferroni_flat ? bonferroni(lp, cfg.alpha)
                                                              : benjamini_hochberg(lp, cfg.alpha);
      for (std::size_t i = 0; i < flags.size(); ++i) rejected[model.leaves[i]] = flags[i];
      return;
    }
  }
}

template <typename E>
E enum_from(const json& j, std::initializer_list<std::pair<const char*, E>> names,
            const char* what) {
  const auto s = j.get<std::string>();
  for (const auto& [name, value] : names) {
    if (s == name) return value;
  }
  throw std::invalid_argument(std::string("unknown ") + what + " '" + s + "'");
}

}  // namespace

std::string to_string(Procedure p) {
  switch (p) {
    case Procedure::cad: return "cad";
    case Procedure::cad_extended: return "cad_extended";
    case Procedure::holm_flat: return "holm_flat";
    case Procedure::bonferroni_flat: return "bonferroni_flat";
    case Procedure::bh_flat: return "bh_flat";
  }
  return "?";
}

Procedure procedure_from_string(const std::string& s) {
  for (auto p : {Procedure::cad, Procedure::cad_extended, Procedure::holm_flat,
                 Procedure::bonferroni_flat, Procedure::bh_flat}) {
    if (to_string(p) == s) return p;
  }
  throw std::invalid_argument("unknown procedure '" + s + "'");
}

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t i) {
  return splitmix64(splitmix64(master) ^ splitmix64(i ^ 0x6a09e667f3bcc909ULL));
}

double SimReport::fwer_bound(double alpha, std::uint64_t n) {
  return alpha + 3.0 * std::sqrt(alpha * (1.0 - alpha) / static_cast<double>(n));
}

void SimConfig::validate() const {
  if (trees.empty()) throw std::invalid_argument("config needs at least one tree");
  std::size_t n = 0;
  for (const auto& b : trees) {
    for (std::size_t f : b) {
      if (f == 0) throw std::invalid_argument("branching factor must be >= 1");
    }
    n += build_complete_tree(b, b.size()).size();
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(effect_size >= 0.0) || !std::isfinite(effect_size)) {
    throw std::invalid_argument("effect size must be finite and >= 0");
  }
  if (replications < 1) throw std::invalid_argument("replications must be >= 1");
  if (replications > kMaxReplications) {
    throw std::invalid_argument("replication count overflows the counter budget");
  }
  if (truth == TruthKind::explicit_map && truth_map.size() != n) {
    throw std::invalid_argument("explicit truth map must cover all " + std::to_string(n) +
                                " vertices");
  }
  if (truth == TruthKind::random_density && !(density >= 0.0 && density <= 1.0)) {
    throw std::invalid_argument("truth density must lie in [0, 1]");
  }
  if (allocation == AllocationKind::weighted && !weights.empty() && weights.size() != trees.size()) {
    throw std::invalid_argument("one weight list per tree required");
  }
}

SimConfig sim_config_from_json(const json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
  static const std::set<std::string> known{
      "tree",       "forest",    "allocation", "weights", "alpha",           "truth",
      "effect_size", "dependence", "sided",     "local_procedure", "replications", "seed",
      "threads",    "procedure", "procedures"};
  for (const auto& [key, _] : doc.items()) {
    if (!known.count(key)) throw std::invalid_argument("unknown config key '" + key + "'");
  }
  SimConfig cfg;
  try {
    auto read_tree = [](const json& t) {
      auto b = t.at("branching").get<std::vector<std::size_t>>();
      if (t.contains("depth") && t.at("depth").get<std::size_t>() != b.size()) {
        throw std::invalid_argument("tree depth disagrees with its branching list");
      }
      return b;
    };
    if (doc.contains("tree") == doc.contains("forest")) {
      throw std::invalid_argument("config needs exactly one of 'tree' or 'forest'");
    }
    cfg.trees.clear();
    if (doc.contains("tree")) {
      cfg.trees.push_back(read_tree(doc.at("tree")));
    } else {
      for (const auto& t : doc.at("forest")) cfg.trees.push_back(read_tree(t));
    }
    if (doc.contains("allocation")) {
      cfg.allocation = enum_from<AllocationKind>(
          doc.at("allocation"),
          {{"uniform", AllocationKind::uniform}, {"weighted", AllocationKind::weighted}},
          "allocation");
    }
    if (doc.contains("weights")) {
      cfg.weights = doc.at("weights").get<std::vector<std::vector<double>>>();
    }
    cfg.alpha = doc.value("alpha", cfg.alpha);
    if (doc.contains("truth")) {
      const auto& t = doc.at("truth");
      if (t.is_string()) {
        cfg.truth = enum_from<TruthKind>(
            t, {{"global_null", TruthKind::global_null}, {"all_false", TruthKind::all_false}},
            "truth");
      } else if (t.is_array()) {
        cfg.truth = TruthKind::explicit_map;
        for (const auto& x : t) cfg.truth_map.push_back(x.get<int>() != 0);
      } else {
        cfg.truth = TruthKind::random_density;
        cfg.density = t.at("density").get<double>();
      }
    }
    cfg.effect_size = doc.value("effect_size", cfg.effect_size);
    if (doc.contains("dependence")) {
      cfg.dependence = enum_from<Dependence>(
          doc.at("dependence"),
          {{"independent", Dependence::independent}, {"nested_means", Dependence::nested_means}},
          "dependence");
    }
    if (doc.contains("sided")) {
      cfg.sided = enum_from<Sided>(
          doc.at("sided"),
          {{"two_sided", Sided::two_sided}, {"one_sided_greater", Sided::one_sided_greater}},
          "sidedness");
    }
    if (doc.contains("local_procedure")) {
      cfg.local = enum_from<LocalProcedure>(
          doc.at("local_procedure"),
          {{"holm", LocalProcedure::holm}, {"bonferroni", LocalProcedure::bonferroni}},
          "local procedure");
    }
    if (doc.contains("replications")) {
      const auto& r = doc.at("replications");
      if (r.is_number_float()) throw std::invalid_argument("replications must be an integer");
      if (r.is_number_integer() && r.get<std::int64_t>() < 1) {
        throw std::invalid_argument("replications must be >= 1");
      }
      cfg.replications = r.get<std::uint64_t>();
    }
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.threads = doc.value("threads", cfg.threads);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json sim_config_to_json(const SimConfig& cfg) {
  json doc;
  if (cfg.trees.size() == 1) {
    doc["tree"] = {{"branching", cfg.trees[0]}, {"depth", cfg.trees[0].size()}};
  } else {
    doc["forest"] = json::array();
    for (const auto& b : cfg.trees) doc["forest"].push_back({{"branching", b}, {"depth", b.size()}});
  }
  doc["allocation"] = cfg.allocation == AllocationKind::uniform ? "uniform" : "weighted";
  if (!cfg.weights.empty()) doc["weights"] = cfg.weights;
  doc["alpha"] = cfg.alpha;
  switch (cfg.truth) {
    case TruthKind::global_null: doc["truth"] = "global_null"; break;
    case TruthKind::all_false: doc["truth"] = "all_false"; break;
    case TruthKind::random_density: doc["truth"] = {{"density", cfg.density}}; break;
    case TruthKind::explicit_map: {
      std::vector<int> t;
      for (bool b : cfg.truth_map) t.push_back(b ? 1 : 0);
      doc["truth"] = t;
      break;
    }
  }
  doc["effect_size"] = cfg.effect_size;
  doc["dependence"] = cfg.dependence == Dependence::independent ? "independent" : "nested_means";
  doc["sided"] = cfg.sided == Sided::two_sided ? "two_sided" : "one_sided_greater";
  doc["local_procedure"] = cfg.local == LocalProcedure::holm ? "holm" : "bonferroni";
  doc["replications"] = cfg.replications;
  doc["seed"] = cfg.seed;
  return doc;
}

json sim_report_to_json(const SimReport& r) {
  return json{{"procedure", to_string(r.procedure)},
              {"replications", r.replications},
              {"any_false_count", r.any_false_count},
              {"fwer_hat", r.fwer_hat},
              {"fwer_se", r.fwer_se},
              {"fdr_hat", r.fdr_hat},
              {"pcer_hat", r.pcer_hat},
              {"power_hat", r.power_hat},
              {"domination_violations", r.domination_violations},
              {"hypotheses", r.hypotheses},
              {"rejection_counts", r.rejection_counts},
              {"wall_seconds", r.wall_seconds},
              {"config", r.config}};
}

SimReport sim_report_from_json(const json& doc) {
  try {
    SimReport r;
    r.procedure = procedure_from_string(doc.at("procedure").get<std::string>());
    r.replications = doc.at("replications").get<std::uint64_t>();
    r.any_false_count = doc.at("any_false_count").get<std::uint64_t>();
    r.fwer_hat = doc.at("fwer_hat").get<double>();
    r.fwer_se = doc.at("fwer_se").get<double>();
    r.fdr_hat = doc.at("fdr_hat").get<double>();
    r.pcer_hat = doc.at("pcer_hat").get<double>();
    r.power_hat = doc.at("power_hat").get<double>();
    r.domination_violations = doc.at("domination_violations").get<std::uint64_t>();
    r.hypotheses = doc.at("hypotheses").get<std::size_t>();
    r.rejection_counts = doc.at("rejection_counts").get<std::vector<std::uint64_t>>();
    r.wall_seconds = doc.at("wall_seconds").get<double>();
    r.config = doc.at("config");
    return r;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed report: ") + e.what());
  }
}

std::vector<SimReport> compare_procedures(const SimConfig& config,
                                          const std::vector<Procedure>& procedures) {
  if (procedures.empty()) throw std::invalid_argument("procedure list is empty");
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const Model model(config);
  const std::size_t np = procedures.size();
  const std::uint64_t chunks = (config.replications + kChunk - 1) / kChunk;

  // chunk_acc[c][p]; chunks are reduced in index order so the floating-point
  // sums do not depend on the number of threads.
  std::vector<std::vector<Accum>> chunk_acc(chunks);
  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    std::vector<bool> truth, rejected;
    std::vector<double> pvals, z;
    for (std::uint64_t c = next++; c < chunks; c = next++) {
      auto& acc = chunk_acc[c];
      acc.assign(np, Accum{});
      for (auto& a : acc) a.counts.assign(model.n, 0);
      const std::uint64_t end = std::min(config.replications, (c + 1) * kChunk);
      for (std::uint64_t i = c * kChunk; i < end; ++i) {
        draw_replication(config, model, i, truth, pvals, z);
        for (std::size_t p = 0; p < np; ++p) {
          run_procedure(config, model, procedures[p], pvals, rejected);
          const auto& hyp = hypotheses_of(model, procedures[p]);
          std::vector<bool> rej, nt;
          rej.reserve(hyp.size());
          nt.reserve(hyp.size());
          for (std::size_t h : hyp) {
            rej.push_back(rejected[h]);
            nt.push_back(truth[h]);
          }
          const ErrorReport e = error_metrics(rej, nt);
          const double any = e.any_false ? 1.0 : 0.0;
          const double pcer = hyp.empty() ? 0.0
                                          : static_cast<double>(e.false_rejections) /
                                                static_cast<double>(hyp.size());
          auto& a = acc[p];
          a.any_false += e.any_false ? 1 : 0;
          if (e.fdp > any || pcer > any) ++a.violations;
          a.fdp += e.fdp;
          a.pcer += pcer;
          a.power += e.power;
          for (std::size_t v = 0; v < model.n; ++v) a.counts[v] += rejected[v] ? 1 : 0;
        }
      }
    }
  };
  unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                         : config.threads;
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, chunks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  const double n = static_cast<double>(config.replications);
  const auto elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::vector<SimReport> out;
  for (std::size_t p = 0; p < np; ++p) {
    Accum total;
    total.counts.assign(model.n, 0);
    for (const auto& acc : chunk_acc) {
      const auto& a = acc[p];
      total.any_false += a.any_false;
      total.violations += a.violations;
      total.fdp += a.fdp;
      total.pcer += a.pcer;
      total.power += a.power;
      for (std::size_t v = 0; v < model.n; ++v) total.counts[v] += a.counts[v];
    }
    SimReport r;
    r.procedure = procedures[p];
    r.replications = config.replications;
    r.any_false_count = total.any_false;
    r.fwer_hat = static_cast<double>(total.any_false) / n;
    r.fwer_se = std::sqrt(r.fwer_hat * (1.0 - r.fwer_hat) / n);
    r.fdr_hat = total.fdp / n;
    r.pcer_hat = total.pcer / n;
    r.power_hat = total.power / n;
    r.domination_violations = total.violations;
    r.hypotheses = hypotheses_of(model, procedures[p]).size();
    r.rejection_counts = std::move(total.counts);
    r.wall_seconds = elapsed;
    r.config = sim_config_to_json(config);
    out.push_back(std::move(r));
  }
  return out;
}

SimReport simulate(const SimConfig& config, Procedure procedure) {
  return compare_procedures(config, {procedure}).front();
}

std::string format_table(const std::vector<SimReport>& reports) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "procedure" << std::right << std::setw(10) << "FWER"
     << std::setw(10) << "se" << std::setw(10) << "FDR" << std::setw(10) << "PCER"
     << std::setw(10) << "power" << std::setw(8) << "m" << '\n';
  os << std::fixed << std::setprecision(5);
  for (const auto& r : reports) {
    os << std::left << std::setw(16) << to_string(r.procedure) << std::right << std::setw(10)
       << r.fwer_hat << std::setw(10) << r.fwer_se << std::setw(10) << r.fdr_hat
       << std::setw(10) << r.pcer_hat << std::setw(10) << r.power_hat << std::setw(8)
       << r.hypotheses << '\n';
  }
  return os.str();
}

std::string rejection_frequency_csv(const SimConfig& config, const std::vector<SimReport>& reports) {
  const Model model(config);
  std::ostringstream os;
  os << "vertex,tree,local_vertex,depth";
  for (const auto& r : reports) os << ',' << to_string(r.procedure);
  os << '\n';
  os << std::setprecision(10);
  for (std::size_t g = 0; g < model.n; ++g) {
    const std::size_t t = model.tree_of[g];
    const VertexId local = g - model.offsets[t];
    os << g << ',' << t << ',' << local << ',' << model.trees[t].vertex(local).depth;
    for (const auto& r : reports) os << ',' << r.rejection_frequency(g);
    os << '\n';
  }
  return os.str();
}

BruteForceReport brute_force_tree(const TestTree& tree, const AlphaAllocation& alloc) {
  if (alloc.size() != tree.size()) throw std::invalid_argument("allocation does not cover tree");
  if (tree.size() > 63) throw BudgetExceeded("tree too large for exhaustive enumeration");

  // Achievable first-true-set sums of each subtree, one entry per distinct
  // restriction of F to the subtree, with the number of truth assignments
  // on the subtree that produce it.
  struct Sums {
    std::vector<double> sum;
    std::vector<std::uint64_t> mult;
  };
  std::function<Sums(VertexId)> sums_of = [&](VertexId v) {
    Sums out;
    const auto size = tree.subtree(v).size();
    if (!tree.is_leaf(v)) {
      Sums acc{{0.0}, {1}};
      for (VertexId c : tree.children(v)) {
        const Sums child = sums_of(c);
        Sums next;
        next.sum.reserve(acc.sum.size() * child.sum.size());
        for (std::size_t a = 0; a < acc.sum.size(); ++a) {
          for (std::size_t b = 0; b < child.sum.size(); ++b) {
            next.sum.push_back(acc.sum[a] + child.sum[b]);
            next.mult.push_back(acc.mult[a] * child.mult[b]);
          }
        }
        acc = std::move(next);
      }
      out = std::move(acc);  // t(v) = 0
    } else {
      out = Sums{{0.0}, {1}};
    }
    out.sum.push_back(alloc.alpha[v]);  // t(v) = 1; the subtree below is free
    out.mult.push_back(std::uint64_t{1} << (size - 1));
    const auto covered = std::accumulate(out.mult.begin(), out.mult.end(), std::uint64_t{0});
    if (covered != (std::uint64_t{1} << size)) {
      throw std::logic_error("truth assignment multiplicities do not add up");
    }
    return out;
  };

  BruteForceReport rep;
  rep.trees = 1;
  rep.allocations = 1;
  rep.alpha = alloc.alpha[tree.root()];
  rep.truth_assignments = std::uint64_t{1} << tree.size();
  const double bound = rep.alpha + kLbTolerance;

  auto visit = [&](double s) {
    if (s > bound) ++rep.violations;
    rep.max_sum = std::max(rep.max_sum, s);
  };
  // Root with t = 1: F = {root}.
  visit(alloc.alpha[tree.root()]);
  rep.first_true_sets = 1;

  // Root with t = 0: every combination of the children's subtree options.
  std::vector<Sums> kids;
  for (VertexId c : tree.children(tree.root())) kids.push_back(sums_of(c));
  if (kids.empty()) {
    visit(0.0);
    rep.first_true_sets += 1;
    return rep;
  }
  std::uint64_t combos = 1;
  for (const auto& k : kids) combos *= k.sum.size();
  rep.first_true_sets += combos;

  std::function<void(std::size_t, double)> walk = [&](std::size_t i, double partial) {
    const auto& sums = kids[i].sum;
    if (i + 1 == kids.size()) {
      std::uint64_t bad = 0;
      double mx = rep.max_sum;
      for (double s : sums) {
        const double total = partial + s;
        bad += total > bound ? 1 : 0;
        mx = total > mx ? total : mx;
      }
      rep.violations += bad;
      rep.max_sum = mx;
      return;
    }
    for (double s : sums) walk(i + 1, partial + s);
  };
  walk(0, 0.0);
  return rep;
}

BruteForceReport brute_force_eq2(std::size_t max_depth, const std::vector<std::size_t>& branchings,
                                 double alpha, std::size_t weighted_allocations,
                                 std::uint64_t seed) {
  if (branchings.empty()) throw std::invalid_argument("at least one branching factor required");
  for (std::size_t b : branchings) {
    if (b == 0) throw std::invalid_argument("branching factor must be >= 1");
    if (b > 3) throw BudgetExceeded("branching factors above 3 exceed the enumeration budget");
  }
  if (max_depth > 3) throw BudgetExceeded("depths above 3 exceed the enumeration budget");
  const std::set<std::size_t> factors(branchings.begin(), branchings.end());

  std::vector<std::vector<std::size_t>> shapes{{}};
  std::vector<std::vector<std::size_t>> frontier{{}};
  for (std::size_t d = 1; d <= max_depth; ++d) {
    std::vector<std::vector<std::size_t>> next;
    for (const auto& s : frontier) {
      for (std::size_t b : factors) {
        auto t = s;
        t.push_back(b);
        next.push_back(t);
      }
    }
    shapes.insert(shapes.end(), next.begin(), next.end());
    frontier = std::move(next);
  }

  BruteForceReport total;
  total.alpha = alpha;
  std::uint64_t stream = 0;
  for (const auto& shape : shapes) {
    const TestTree tree = build_complete_tree(shape, shape.size());
    std::vector<AlphaAllocation> allocs{allocate_alpha_uniform(tree, alpha)};
    for (std::size_t a = 0; a < weighted_allocations; ++a) {
      std::mt19937_64 rng(stream_seed(seed, stream++));
      std::uniform_real_distribution<double> u(0.05, 1.0);
      std::vector<double> w(tree.size());
      for (double& x : w) x = u(rng);
      allocs.push_back(allocate_alpha_weighted(tree, alpha, w));
    }
    ++total.trees;
    for (const auto& alloc : allocs) {
      const auto r = brute_force_tree(tree, alloc);
      ++total.allocations;
      total.truth_assignments += r.truth_assignments;
      total.first_true_sets += r.first_true_sets;
      total.violations += r.violations;
      total.max_sum = std::max(total.max_sum, r.max_sum);
    }
  }
  return total;
}

SubtreeSumReport brute_force_eq3(const TestTree& tree, const AlphaAllocation& alloc,
                                 const TruthAssignment& truth) {
  SubtreeSumReport rep;
  rep.worst_slack = -std::numeric_limits<double>::infinity();
  for (const Vertex& v : tree.vertices()) {
    const double s = subtree_alpha_sum(tree, alloc, truth, v.id);
    ++rep.vertices_checked;
    if (s > alloc.alpha[v.id] + kLbTolerance) ++rep.violations;
    rep.worst_slack = std::max(rep.worst_slack, s - alloc.alpha[v.id]);
    if (v.id == tree.root()) rep.root_sum = s;
  }
  return rep;
}

json brute_force_to_json(const BruteForceReport& r) {
  return json{{"trees", r.trees},
              {"allocations", r.allocations},
              {"truth_assignments", r.truth_assignments},
              {"first_true_sets", r.first_true_sets},
              {"violations", r.violations},
              {"alpha", r.alpha},
              {"max_sum", r.max_sum},
              {"passed", r.passed()}};
}

}  // namespace cad
