#pragma once

// TOML scenario and model files. Every table rejects unknown keys, and every
// error names the file, line and key.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "refracted/levy_model.hpp"

namespace refracted {

// Model file keys:
//   family = "cpp"     with delta, lambda = [...], mu = [...]
//   family = "stable"  with alpha
LevySpec parse_model(std::string_view text, const std::string& source = "<model>");
LevySpec load_model(const std::filesystem::path& path);

enum class Suite { Trivial, KlEquivalence, Identities, Mc, All };

const char* to_string(Suite s) noexcept;
Suite parse_suite(std::string_view name);

struct ExitCase {
  double b = -1.0;
  double a = 1.0;
  double x0 = 0.0;
  double q = 0.0;
};

struct OccupationCase {
  double b = -1.0;
  double a = 1.0;
  double x0 = 0.0;
  double q = 1.0;
  int bins = 10;
  std::int64_t reps = 100000;
};

struct ConvergenceCase {
  double b = -1.0;
  double a = 1.0;
  double x0 = 0.0;
  double q = 0.0;
  std::vector<int> levels = {4, 16, 64};
  std::int64_t reps = 1000000;
};

struct McSettings {
  int n = 64;
  std::int64_t reps = 1000000;
  std::uint64_t seed = 20240611;
  int workers = 0;
  std::vector<ExitCase> exit;
  std::optional<OccupationCase> occupation;
  std::optional<ConvergenceCase> convergence;
};

struct Tolerances {
  // Relative tolerance of dual-route analytic checks.
  double analytic = 1e-5;
  double transform = 1e-6;
  double normalization = 1e-6;
  double mass = 1e-6;
  // Absolute, for the coarse nested resolvent equation.
  double resolvent_equation = 1e-3;
  // Absolute allowance per occupation bin on top of the standard errors.
  double occupation = 1e-4;
};

struct ScenarioConfig {
  Suite suite = Suite::All;
  LevySpec x;
  LevySpec y;
  // Drift added to X to form the negative-side motion of the oracle suite.
  double kl_alpha = 0.5;
  std::vector<double> q = {0.0, 1.0};
  // Rates of the resolvent equation R1 f - R2 f = (q2 - q1) R1 R2 f.
  double resolvent_q1 = 1.0;
  double resolvent_q2 = 2.0;
  std::vector<double> barrier = {-1.0, 1.0};
  std::vector<double> x_grid = {-0.8, -0.3, 0.0, 0.4, 0.9};
  std::vector<double> y_grid = {-0.9, -0.45, -0.1, 0.3, 0.75};
  McSettings mc;
  Tolerances tol;
};

// Model paths inside the scenario are resolved against base_dir.
ScenarioConfig parse_scenario(std::string_view text, const std::filesystem::path& base_dir,
                              const std::string& source = "<scenario>");
ScenarioConfig load_scenario(const std::filesystem::path& path);

// Canonical text of every resolved value (model contents, not paths), with
// 17 significant digits. Equal texts mean equal configurations.
std::string canonical_text(const ScenarioConfig& cfg);
std::uint64_t fnv1a64(std::string_view bytes);
std::string config_digest(const ScenarioConfig& cfg);

}  // namespace refracted
