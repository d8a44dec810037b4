#pragma once

// Command-line front end. Split from main() so tests can parse and run
// commands in process.

#include <iosfwd>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace CLI {
class App;
}

namespace refracted::cli {

inline constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

// Every flag with its documented default. NaN marks an optional value left
// unset (a missing barrier means no barrier).
struct CliOptions {
  std::string model;
  std::string model_y;
  double q = 0.0;
  double x = 0.0;
  double y = -1.0;
  double a = kUnset;
  double b = kUnset;
  int n = 64;
  long long reps = 100000;
  unsigned long long seed = 1;
  double tol = 1e-8;
  std::string out;
  std::string format = "auto";
  // resolvent: f is the indicator of (lo, hi].
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  // kl-check: drift added to X for the negative side.
  double alpha = 0.5;
  // simulate
  int bins = 0;
  long long trace = -1;
  int workers = 0;
  // validate
  std::string config;
  std::string suite;
  bool timings = false;
};

struct Cli {
  CliOptions opts;
  std::unique_ptr<CLI::App> app;
  std::vector<std::string> subcommands;
};

std::unique_ptr<Cli> make_cli();

// Parses and runs; returns the process exit status: 0 success, 1 a failed
// check, 2 usage or configuration error, 3 numerical error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace refracted::cli
