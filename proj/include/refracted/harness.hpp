#pragma once

// Validation suites that compare each analytic functional with an
// independent route (oracle formula, second identity or simulation), and
// the byte-stable reports they produce.

#include <filesystem>
#include <functional>
#include <stop_token>
#include <string>
#include <vector>

#include "refracted/config.hpp"

namespace refracted {

struct CheckRecord {
  std::string name;
  double analytic = 0.0;
  double reference = 0.0;
  // Zero for deterministic checks.
  double std_error = 0.0;
  double tol = 0.0;
  bool pass = false;
  double seconds = 0.0;
};

// pass = |analytic - reference| <= tol + 3 std_error, false on NaN.
CheckRecord make_record(std::string name, double analytic, double reference, double std_error, double tol);

struct SuiteOptions {
  // Wall-clock seconds are recorded only on request so that reports stay
  // byte-identical across runs.
  bool timings = false;
  std::function<void(const CheckRecord&)> on_record;
  std::stop_token stop;
};

std::vector<CheckRecord> run_suite(const ScenarioConfig& cfg, const SuiteOptions& opts = {});

bool all_pass(const std::vector<CheckRecord>& records);

enum class ReportFormat { Json, Csv };

ReportFormat parse_report_format(const std::string& name);

// Numbers use 17 significant digits, '.' decimals and '\n' line endings.
std::string render_report(const std::vector<CheckRecord>& records, ReportFormat format,
                          const std::string& config_digest);
void emit_report(const std::vector<CheckRecord>& records, ReportFormat format, const std::filesystem::path& path,
                 const std::string& config_digest);

// Laplace transform of W^(q) at beta > Phi(q) by quadrature.
double laplace_transform_of_w(const LevySpec& spec, double q, double beta);

}  // namespace refracted
