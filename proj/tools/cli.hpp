#pragma once

// Command-line front end. `run` parses arguments and dispatches; `execute`
// takes an already parsed configuration so tests can drive commands directly.
//
// Exit codes: 0 success, 1 a check failed, 2 bad input, 3 numeric failure.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace kcurv::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kInputError = 2, kNumericError = 3 };

struct Grid {
  std::string var;
  double lo = 0.0;
  double hi = 0.0;
  int n = 0;
};

struct RunConfig {
  std::string command;
  std::optional<std::string> family;     // "p=<int>,f=<expr>"
  std::optional<std::string> spec_path;  // JSON metric spec
  std::optional<std::vector<double>> point;
  std::optional<Grid> grid;
  int k = 0;
  std::uint64_t seed = 42;
  std::optional<std::string> out;
  std::optional<double> tol;

  // check
  std::vector<std::string> only;
  int points = 5;

  // geodesic
  std::optional<std::vector<double>> velocity;
  std::optional<std::vector<double>> target;
  std::optional<std::vector<std::string>> ordering;
  double horizon = 1.0;
  int samples = 101;
  std::string method = "auto";  // auto | rk | triangular

  // invariants
  int max_factors = 3;
  int max_deriv = 2;
  int random = 0;
};

Grid parse_grid(const std::string& text);
std::vector<double> parse_point(const std::string& text);

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int execute(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace kcurv::cli
