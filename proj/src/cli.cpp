#include "cad/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cad/interval.hpp"
#include "cad/mc_harness.hpp"
#include "cad/tree_core.hpp"
#include "cad/wavelet.hpp"

namespace cad {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(const std::string& token) {
  const std::string t = trim(token);
  if (t.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

json read_json(const std::string& path) {
  auto in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json(const std::string& path, const json& doc) {
  auto out = open_output(path);
  out << doc.dump(2) << '\n';
}

struct SimOptions {
  std::string config;
  std::string json_out;
  std::string csv_out;
  std::vector<std::string> procedures;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

int run_simulation(const SimOptions& opts, bool compare, std::ostream& out) {
  const json raw = read_json(opts.config);
  SimConfig cfg = sim_config_from_json(raw);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.threads) cfg.threads = *opts.threads;

  std::vector<Procedure> procs;
  for (const auto& p : opts.procedures) procs.push_back(procedure_from_string(p));
  if (procs.empty()) {
    try {
      if (!compare && raw.contains("procedure")) {
        procs.push_back(procedure_from_string(raw.at("procedure").get<std::string>()));
      } else if (compare && raw.contains("procedures")) {
        for (const auto& p : raw.at("procedures")) {
          procs.push_back(procedure_from_string(p.get<std::string>()));
        }
      }
    } catch (const json::exception& e) {
      throw std::invalid_argument(std::string("malformed procedure list: ") + e.what());
    }
  }
  if (procs.empty()) {
    procs = compare ? std::vector<Procedure>{Procedure::cad, Procedure::cad_extended,
                                             Procedure::holm_flat, Procedure::bonferroni_flat,
                                             Procedure::bh_flat}
                    : std::vector<Procedure>{Procedure::cad};
  }
  if (!compare && procs.size() != 1) {
    throw std::invalid_argument("simulate runs exactly one procedure; use compare");
  }

  const auto reports = compare_procedures(cfg, procs);
  out << format_table(reports);
  for (const auto& r : reports) {
    out << to_string(r.procedure) << ": fwer_hat " << r.fwer_hat << " (bound "
        << SimReport::fwer_bound(cfg.alpha, cfg.replications) << ")\n";
  }
  if (!opts.json_out.empty()) {
    json doc;
    if (compare) {
      doc["reports"] = json::array();
      for (const auto& r : reports) doc["reports"].push_back(sim_report_to_json(r));
    } else {
      doc = sim_report_to_json(reports.front());
    }
    write_json(opts.json_out, doc);
  }
  if (!opts.csv_out.empty()) {
    auto csv = open_output(opts.csv_out);
    csv << rejection_frequency_csv(cfg, reports);
  }
  for (const auto& r : reports) {
    if (r.domination_violations != 0) return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

Eigen::VectorXd read_signal(const std::string& path) {
  auto in = open_input(path);
  std::vector<double> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto first = split(t, ',').front();
    const auto v = parse_number(first);
    if (!v) {
      if (values.empty() && lineno == 1) continue;  // header
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": not a number");
    }
    if (!std::isfinite(*v)) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": non-finite value");
    }
    values.push_back(*v);
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void write_signal(const std::string& path, const Eigen::VectorXd& signal) {
  auto out = open_output(path);
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < signal.size(); ++i) out << signal(i) << '\n';
}

Eigen::MatrixXd read_csv_matrix(const std::string& path) {
  auto in = open_input(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<double> row;
    bool numeric = true;
    for (const auto& field : split(t, ',')) {
      const auto v = parse_number(field);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (rows.empty() && lineno == 1) continue;  // header
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": non-numeric field");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": ragged row (" +
                                  std::to_string(row.size()) + " fields, expected " +
                                  std::to_string(rows.front().size()) + ")");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument(path + ": no data rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m) {
  auto out = open_output(path);
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << '\n';
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conquer-and-divide tree testing: simulation, verification and applications"};
  app.require_subcommand(1);

  SimOptions sim;
  auto add_sim_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", sim.config, "JSON simulation config")->required();
    cmd->add_option("--json", sim.json_out, "write the report as JSON");
    cmd->add_option("--csv", sim.csv_out, "write per-vertex rejection frequencies as CSV");
    cmd->add_option("--seed", sim.seed, "master seed (default 12345)");
    cmd->add_option("--threads", sim.threads, "worker threads, 0 = all cores");
  };
  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo error rates of one procedure");
  add_sim_options(simulate_cmd);
  simulate_cmd->add_option("--procedure", sim.procedures,
                           "cad | cad_extended | holm_flat | bonferroni_flat | bh_flat")
      ->expected(1);
  auto* compare_cmd = app.add_subcommand("compare", "paired comparison of several procedures");
  add_sim_options(compare_cmd);
  compare_cmd->add_option("--procedures", sim.procedures, "procedures to compare")
      ->delimiter(',');

  std::size_t bf_depth = 3;
  std::vector<std::size_t> bf_branchings{2, 3};
  std::size_t bf_weighted = 10;
  double bf_alpha = 0.05;
  std::uint64_t bf_seed = kDefaultSeed;
  std::string bf_json;
  auto* brute_cmd =
      app.add_subcommand("brute-force", "exhaustive check of the first-true-set alpha bound");
  brute_cmd->add_option("--max-depth", bf_depth, "largest tree depth")->capture_default_str();
  brute_cmd->add_option("--branchings", bf_branchings, "branching factors")
      ->delimiter(',')
      ->capture_default_str();
  brute_cmd->add_option("--weighted", bf_weighted, "random weighted allocations per tree")
      ->capture_default_str();
  brute_cmd->add_option("--alpha", bf_alpha, "root level")->capture_default_str();
  brute_cmd->add_option("--seed", bf_seed, "seed for the weighted allocations");
  brute_cmd->add_option("--json", bf_json, "write the report as JSON");

  std::string dn_input, dn_output, dn_meta, dn_reference, dn_sigma = "estimate";
  double dn_alpha = 0.05;
  std::size_t dn_force = 0;
  auto* denoise_cmd = app.add_subcommand("denoise", "Haar denoising with tree-tested thresholds");
  denoise_cmd->add_option("--input", dn_input, "signal, one value per line")->required();
  denoise_cmd->add_option("--output", dn_output, "denoised signal")->required();
  denoise_cmd->add_option("--alpha", dn_alpha, "familywise level")->capture_default_str();
  denoise_cmd->add_option("--sigma", dn_sigma, "noise scale, or 'estimate'")->capture_default_str();
  denoise_cmd->add_option("--meta", dn_meta, "write thresholds and counts as JSON");
  denoise_cmd->add_option("--reference", dn_reference, "clean signal for MSE reporting");
  denoise_cmd->add_option("--force-test-through-level", dn_force,
                          "always test levels j <= this (voids the error guarantee)");

  std::string lz_input, lz_output;
  double lz_alpha = 0.05, lz_sigma = 1.0;
  std::size_t lz_depth = 3, lz_arity = 2;
  auto* localize_cmd = app.add_subcommand("localize", "locate intervals with nonzero mean");
  localize_cmd->add_option("--input", lz_input, "CSV, rows = trials, columns = time")->required();
  localize_cmd->add_option("--output", lz_output, "interval decisions as JSON");
  localize_cmd->add_option("--alpha", lz_alpha, "familywise level")->capture_default_str();
  localize_cmd->add_option("--sigma", lz_sigma, "known noise scale")->capture_default_str();
  localize_cmd->add_option("--depth", lz_depth, "subdivision depth")->capture_default_str();
  localize_cmd->add_option("--arity", lz_arity, "parts per subdivision")->capture_default_str();

  std::string lb_input;
  auto* lb_cmd = app.add_subcommand("validate-lb", "check a tree/allocation document");
  lb_cmd->add_option("--input", lb_input, "{depth, branching, alpha_root, allocation}")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (simulate_cmd->parsed()) return run_simulation(sim, false, out);
    if (compare_cmd->parsed()) return run_simulation(sim, true, out);

    if (brute_cmd->parsed()) {
      const auto rep = brute_force_eq2(bf_depth, bf_branchings, bf_alpha, bf_weighted, bf_seed);
      out << "trees " << rep.trees << ", allocations " << rep.allocations
          << ", truth assignments " << rep.truth_assignments << ", first-true sets "
          << rep.first_true_sets << '\n'
          << std::setprecision(17) << "max sum " << rep.max_sum << " (alpha " << rep.alpha
          << "), violations " << rep.violations << '\n'
          << (rep.passed() ? "PASS" : "FAIL") << '\n';
      if (!bf_json.empty()) write_json(bf_json, brute_force_to_json(rep));
      return rep.passed() ? kExitOk : kExitRuntime;
    }

    if (denoise_cmd->parsed()) {
      const Eigen::VectorXd signal = read_signal(dn_input);
      SigmaMode mode = SigmaMode::estimate;
      double sigma = 0.0;
      if (dn_sigma != "estimate") {
        const auto v = parse_number(dn_sigma);
        if (!v) throw std::invalid_argument("--sigma must be a number or 'estimate'");
        mode = SigmaMode::known;
        sigma = *v;
      }
      ThresholdOptions topts;
      topts.force_test_through_level = dn_force;
      const auto res = denoise(signal, dn_alpha, mode, sigma, topts);
      write_signal(dn_output, res.signal);

      json meta{{"alpha", dn_alpha},
                {"sigma", res.sigma},
                {"sigma_mode", mode == SigmaMode::known ? "known" : "estimate"},
                {"n", signal.size()},
                {"kept", res.kept},
                {"force_test_through_level", dn_force}};
      meta["thresholds"] = json::array();
      for (const auto& t : res.thresholds) {
        meta["thresholds"].push_back(
            {{"level", t.level}, {"alpha", t.alpha}, {"z", t.z}, {"threshold", t.threshold}});
      }
      if (!dn_reference.empty()) {
        const Eigen::VectorXd ref = read_signal(dn_reference);
        if (ref.size() != signal.size()) {
          throw std::invalid_argument("reference length differs from the input signal");
        }
        const double mse_in = (signal - ref).squaredNorm() / static_cast<double>(ref.size());
        const double mse_out = (res.signal - ref).squaredNorm() / static_cast<double>(ref.size());
        meta["mse_in"] = mse_in;
        meta["mse_out"] = mse_out;
        out << "mse in " << mse_in << ", out " << mse_out << '\n';
      }
      out << "kept " << res.kept << " of " << signal.size() - 2 << " detail coefficients, sigma "
          << res.sigma << '\n';
      if (!dn_meta.empty()) write_json(dn_meta, meta);
      return kExitOk;
    }

    if (localize_cmd->parsed()) {
      TrialMatrix trials{read_csv_matrix(lz_input), lz_sigma};
      const auto loc = localize(trials, lz_alpha, lz_depth, lz_arity);
      const json doc = localization_to_json(loc, lz_alpha);
      if (!lz_output.empty()) {
        write_json(lz_output, doc);
      } else {
        out << doc.dump(2) << '\n';
      }
      out << "rejected " << loc.result.rejected.size() << " intervals, maximal:";
      for (VertexId v : loc.maximal) {
        const auto& n = loc.intervals.nodes[v];
        out << " [" << n.start << ',' << n.end << ')';
      }
      out << '\n';
      return kExitOk;
    }

    if (lb_cmd->parsed()) {
      const auto doc = tree_from_json(read_json(lb_input));
      const auto bad = validate_lb(doc.tree, doc.allocation);
      out << "vertices " << doc.tree.size() << ", violations " << bad.size();
      for (VertexId v : bad) out << ' ' << v;
      out << '\n' << (bad.empty() ? "VALID" : "INVALID") << '\n';
      return bad.empty() ? kExitOk : kExitRuntime;
    }
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"cadtree"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace cad
