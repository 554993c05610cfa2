#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cad {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitRuntime = 3 };

/// Entry point behind the `cadtree` executable. Never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// One value per line; for CSV lines the first column is used. Blank lines,
/// '#' comments and a non-numeric first line (header) are skipped.
Eigen::VectorXd read_signal(const std::string& path);
void write_signal(const std::string& path, const Eigen::VectorXd& signal);

/// Rectangular numeric CSV, rows = trials. Throws std::invalid_argument on ragged rows.
Eigen::MatrixXd read_csv_matrix(const std::string& path);
void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m);

}  // namespace cad
