#include "cli_app.hpp"

#include <unistd.h>

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <utility>

#include "refracted/config.hpp"
#include "refracted/error.hpp"
#include "refracted/harness.hpp"
#include "refracted/levy_model.hpp"
#include "refracted/mc_simulator.hpp"
#include "refracted/refracted_analytics.hpp"
#include "refracted/scale_engine.hpp"

namespace refracted::cli {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Row = std::vector<std::pair<std::string, std::string>>;

// Renders rows with identical keys as JSON lines, CSV, or key=value text
// (the text form also serves "auto").
std::string render(const std::vector<Row>& rows, const std::string& format) {
  std::string out;
  if (rows.empty()) return out;
  if (format == "csv") {
    for (std::size_t i = 0; i < rows[0].size(); ++i) out += (i ? "," : "") + rows[0][i].first;
    out += "\n";
    for (const Row& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i].second;
      out += "\n";
    }
  } else if (format == "json") {
    for (const Row& r : rows) {
      out += "{";
      for (std::size_t i = 0; i < r.size(); ++i) {
        const std::string& v = r[i].second;
        const bool numeric = !v.empty() && v.find_first_not_of("0123456789+-.e") == std::string::npos;
        out += (i ? ", \"" : "\"") + r[i].first + "\": " + (numeric ? v : "\"" + v + "\"");
      }
      out += "}\n";
    }
  } else {
    for (const Row& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? " " : "") + r[i].first + "=" + r[i].second;
      out += "\n";
    }
  }
  return out;
}

void write_out(const std::string& text, const CliOptions& o, std::ostream& out) {
  if (o.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f(o.out, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error(o.out + ": cannot open for writing");
  f << text;
  if (!f.flush()) throw std::runtime_error(o.out + ": write failed");
}

bool use_color(std::ostream& out) {
  if (std::getenv("NO_COLOR")) return false;
  return &out == &std::cout && ::isatty(STDOUT_FILENO);
}

LevySpec model_x(const CliOptions& o) {
  if (o.model.empty()) throw Error(Errc::ConfigInvalid, "--model is required");
  return load_model(o.model);
}

RefractedSpec model_pair(const CliOptions& o) {
  if (o.model_y.empty()) throw Error(Errc::ConfigInvalid, "--model-y is required");
  return RefractedSpec(model_x(o), load_model(o.model_y));
}

BarrierMode barriers(const CliOptions& o) {
  const bool hb = !std::isnan(o.b);
  const bool ha = !std::isnan(o.a);
  if (hb && ha) return BarrierMode::both(o.b, o.a);
  if (hb) return BarrierMode::lower(o.b);
  if (ha) return BarrierMode::upper(o.a);
  return BarrierMode::none();
}

AnalyticsOptions analytics(const CliOptions& o) {
  AnalyticsOptions a;
  a.rel_tol = o.tol;
  return a;
}

double require(double v, const char* flag) {
  if (std::isnan(v)) throw Error(Errc::ConfigInvalid, std::string(flag) + " is required");
  return v;
}

std::string cmd_scale(const CliOptions& o) {
  const ScaleEvaluator ev(model_x(o), o.q);
  return render({{{"q", num(o.q)}, {"x", num(o.x)}, {"W", num(ev.w(o.x))}, {"W_prime", num(ev.w_prime(o.x))}}},
                o.format);
}

std::string cmd_phi(const CliOptions& o) {
  const LevySpec s = model_x(o);
  const double p = phi(s, o.q);
  return render({{{"q", num(o.q)}, {"phi", num(p)}, {"psi_prime_at_phi", num(psi_prime(s, p))}}}, o.format);
}

std::string cmd_exit_levy(const CliOptions& o) {
  const ScaleEvaluator ev(model_x(o), o.q);
  require(o.a, "--a");
  return render({{{"q", num(o.q)}, {"x", num(o.x)}, {"exit_up", num(exit_levy(ev, barriers(o), o.x))}}}, o.format);
}

std::string cmd_potential_levy(const CliOptions& o) {
  const ScaleEvaluator ev(model_x(o), o.q);
  return render({{{"q", num(o.q)},
                  {"x", num(o.x)},
                  {"y", num(o.y)},
                  {"density", num(potential_density_levy(ev, barriers(o), o.x, o.y))}}},
                o.format);
}

std::string cmd_wu(const CliOptions& o) {
  const RefractedModel m(model_pair(o), o.q, analytics(o));
  const auto r = m.w_u(o.x, o.y);
  return render({{{"q", num(o.q)}, {"x", num(o.x)}, {"y", num(o.y)}, {"W_U", num(r.value)}, {"error", num(r.error)}}},
                o.format);
}

std::string cmd_exit(const CliOptions& o) {
  const RefractedModel m(model_pair(o), o.q, analytics(o));
  const double a = require(o.a, "--a");
  const double v = std::isnan(o.b) ? m.exit_up_one_sided(o.x, a) : m.exit_up(o.b, o.x, a);
  return render({{{"q", num(o.q)}, {"x", num(o.x)}, {"exit_up", num(v)}}}, o.format);
}

std::string cmd_potential(const CliOptions& o) {
  const RefractedModel m(model_pair(o), o.q, analytics(o));
  const double v = m.killed_potential_density(require(o.b, "--b"), require(o.a, "--a"), o.x, o.y);
  return render({{{"q", num(o.q)}, {"x", num(o.x)}, {"y", num(o.y)}, {"density", num(v)}}}, o.format);
}

std::string cmd_resolvent(const CliOptions& o) {
  const RefractedModel m(model_pair(o), o.q, analytics(o));
  const bool whole = std::isinf(o.lo) && std::isinf(o.hi);
  const Resolvent r(m, whole ? LineFunction::constant(1.0) : LineFunction::indicator(o.lo, o.hi));
  return render({{{"q", num(o.q)}, {"x", num(o.x)}, {"lo", num(o.lo)}, {"hi", num(o.hi)}, {"resolvent", num(r(o.x))}}},
                o.format);
}

std::string cmd_normalization(const CliOptions& o) {
  const RefractedModel m(model_pair(o), o.q, analytics(o));
  const Resolvent one(m, LineFunction::constant(1.0));
  return render({{{"q", num(o.q)},
                  {"normalization", num(m.normalization_constant().value)},
                  {"q_times_n_one", num(o.q * one.n_u_one().value)}}},
                o.format);
}

std::pair<std::string, bool> cmd_kl_check(const CliOptions& o) {
  const LevySpec x = model_x(o);
  LevySpec y = x;
  y.delta += o.alpha;
  const double b = require(o.b, "--b");
  const double a = require(o.a, "--a");
  const RefractedModel m(RefractedSpec(x, y), o.q, analytics(o));
  const KlOracle kl(x, o.alpha, o.q);
  const double tol = o.tol < 1e-5 ? 1e-5 : o.tol;
  std::vector<Row> rows;
  bool ok = true;
  auto row = [&](const char* name, double mine, double ref) {
    const bool pass = std::abs(mine - ref) <= tol * std::abs(ref);
    ok = ok && pass;
    rows.push_back({{"check", name}, {"generalized", num(mine)}, {"oracle", num(ref)}, {"pass", pass ? "true" : "false"}});
  };
  row("exit_up", m.exit_up(b, o.x, a), kl.exit_up(b, o.x, a));
  row("killed_density", m.killed_potential_density(b, a, o.x, o.y), kl.killed_potential_density(b, a, o.x, o.y));
  return {render(rows, o.format == "auto" ? "csv" : o.format), ok};
}

std::string cmd_simulate(const CliOptions& o) {
  SimConfig cfg(model_pair(o));
  cfg.n = o.n;
  cfg.x0 = o.x;
  cfg.q = o.q;
  cfg.reps = o.reps;
  cfg.seed = o.seed;
  cfg.workers = o.workers;
  if (!std::isnan(o.b)) cfg.b = o.b;
  if (!std::isnan(o.a)) cfg.a = o.a;
  if (o.trace >= 0) {
    // One JSON object per line.
    std::string text;
    for (const PathEvent& e : trace_path(cfg, o.trace))
      text += "{\"time\": " + num(e.time) + ", \"position\": " + num(e.position) + ", \"jump\": " + num(e.jump) +
              ", \"kind\": \"" + to_string(e.kind) + "\"}\n";
    return text;
  }
  auto row = [&](const std::string& name, const FunctionalEstimate& e) {
    return Row{{"estimator", name},
               {"n", std::to_string(cfg.n)},
               {"R", std::to_string(e.reps)},
               {"mean", num(e.mean)},
               {"stderr", num(e.std_error)},
               {"bias_bound", e.bias_known ? num(e.bias_bound) : "UNKNOWN"},
               {"seed", std::to_string(e.seed)}};
  };
  const std::string format = o.format == "auto" ? "csv" : o.format;
  if (o.bins > 0) {
    const double b = require(o.b, "--b");
    const double a = require(o.a, "--a");
    std::vector<Bin> bins;
    for (int i = 0; i < o.bins; ++i)
      bins.push_back({b + (a - b) * i / o.bins, i + 1 == o.bins ? a : b + (a - b) * (i + 1) / o.bins});
    const OccupationEstimate occ = simulate_occupation(cfg, bins);
    std::vector<Row> rows;
    for (int i = 0; i < o.bins; ++i) {
      char name[96];
      std::snprintf(name, sizeof name, "occupation(%.6g;%.6g]", bins[i].lo, bins[i].hi);
      rows.push_back(row(name, occ.bins[i]));
    }
    rows.push_back(row("exit_discount", occ.exit_discount));
    return render(rows, format);
  }
  require(o.a, "--a");
  return render({row("exit_up", simulate_exit(cfg))}, format);
}

int cmd_validate(const CliOptions& o, std::ostream& out, std::ostream& err) {
  if (o.config.empty()) throw Error(Errc::ConfigInvalid, "validate needs a scenario file");
  ScenarioConfig cfg = load_scenario(o.config);
  if (!o.suite.empty()) cfg.suite = parse_suite(o.suite);
  const std::string format = o.format == "auto" ? "json" : o.format;
  const ReportFormat rf = parse_report_format(format);
  SuiteOptions so;
  so.timings = o.timings;
  const auto records = run_suite(cfg, so);
  const std::string digest = config_digest(cfg);
  int failed = 0;
  for (const CheckRecord& r : records) failed += !r.pass;
  if (o.out.empty()) {
    out << render_report(records, rf, digest);
  } else {
    emit_report(records, rf, o.out, digest);
    const bool color = use_color(out);
    for (const CheckRecord& r : records) {
      if (r.pass) continue;
      out << (color ? "\033[31mFAIL\033[0m " : "FAIL ") << r.name << "\n";
    }
    out << records.size() - failed << "/" << records.size() << " checks passed\n";
  }
  if (failed) err << failed << " check(s) failed\n";
  return failed ? 1 : 0;
}

}  // namespace

std::unique_ptr<Cli> make_cli() {
  auto cli = std::make_unique<Cli>();
  CliOptions& o = cli->opts;
  cli->app = std::make_unique<CLI::App>("Scale functions, exit laws and resolvents of refracted Levy processes");
  CLI::App& app = *cli->app;
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  auto sub = [&](const char* name, const char* desc) {
    cli->subcommands.emplace_back(name);
    return app.add_subcommand(name, desc);
  };
  auto model = [&](CLI::App* s) { s->add_option("--model", o.model, "Model file of X (TOML)"); };
  auto model_y = [&](CLI::App* s) { s->add_option("--model-y", o.model_y, "Model file of Y (TOML)"); };
  auto q = [&](CLI::App* s) { s->add_option("--q", o.q, "Discount rate q >= 0")->check(CLI::NonNegativeNumber); };
  auto x = [&](CLI::App* s) { s->add_option("--x", o.x, "Start point"); };
  auto y = [&](CLI::App* s) { s->add_option("--y", o.y, "Second argument or target point"); };
  auto a = [&](CLI::App* s) { s->add_option("--a", o.a, "Upper barrier (unset: none)"); };
  auto b = [&](CLI::App* s) { s->add_option("--b", o.b, "Lower barrier (unset: none)"); };
  auto tol = [&](CLI::App* s) {
    s->add_option("--tol", o.tol, "Relative tolerance of the jump-measure integrals")->check(CLI::PositiveNumber);
  };
  auto out = [&](CLI::App* s) { s->add_option("--out", o.out, "Write output to this file instead of stdout"); };
  auto format = [&](CLI::App* s) {
    s->add_option("--format", o.format, "Output format; auto is csv for simulate, json for validate, text otherwise")
        ->check(CLI::IsMember({"auto", "text", "json", "csv"}));
  };

  CLI::App* s = sub("scale", "Scale function W^(q)(x) and its derivative");
  model(s), q(s), x(s), out(s), format(s);
  s = sub("phi", "Right inverse Phi(q) of the Laplace exponent");
  model(s), q(s), out(s), format(s);
  s = sub("exit-levy", "Exit transform of X above a, optionally before passing below b");
  model(s), q(s), x(s), a(s), b(s), out(s), format(s);
  s = sub("potential-levy", "Potential density of X, optionally killed at the barriers");
  model(s), q(s), x(s), y(s), a(s), b(s), out(s), format(s);
  s = sub("wu", "Scale function W_U(x, y) of the refracted process");
  model(s), model_y(s), q(s), x(s), y(s), tol(s), out(s), format(s);
  s = sub("exit", "Exit transform of U above a (before passing below b when given)");
  model(s), model_y(s), q(s), x(s), a(s), b(s), tol(s), out(s), format(s);
  s = sub("potential", "Potential density of U killed on leaving [b, a]");
  model(s), model_y(s), q(s), x(s), y(s), a(s), b(s), tol(s), out(s), format(s);
  s = sub("resolvent", "Resolvent of U applied to the indicator of (lo, hi]");
  model(s), model_y(s), q(s), x(s), tol(s), out(s), format(s);
  s->add_option("--lo", o.lo, "Lower end of the indicator");
  s->add_option("--hi", o.hi, "Upper end of the indicator");
  s = sub("normalization", "Excursion normalization constant by two routes");
  model(s), model_y(s), q(s), tol(s), out(s), format(s);
  s = sub("kl-check", "Compare the general formulas with the drift-refraction oracle");
  model(s), q(s), x(s), y(s), a(s), b(s), tol(s), out(s), format(s);
  s->add_option("--alpha", o.alpha, "Drift added to X below 0")->check(CLI::PositiveNumber);
  s = sub("simulate", "Monte Carlo estimate for the truncated process");
  model(s), model_y(s), q(s), x(s), a(s), b(s), out(s), format(s);
  s->add_option("--n", o.n, "Truncation level")->check(CLI::Range(1, 1 << 30));
  s->add_option("--reps", o.reps, "Replicates")->check(CLI::PositiveNumber);
  s->add_option("--seed", o.seed, "Base seed");
  s->add_option("--bins", o.bins, "Occupation bins over [b, a] (0: exit estimate)")->check(CLI::NonNegativeNumber);
  s->add_option("--trace", o.trace, "Print the event log of this replica as JSON lines");
  s->add_option("--workers", o.workers, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  s = sub("validate", "Run a validation scenario and write its report");
  s->add_option("config", o.config, "Scenario file (TOML)")->required();
  s->add_option("--suite", o.suite, "Override the scenario's suite")
      ->check(CLI::IsMember({"trivial", "kl-equivalence", "identities", "mc", "all"}));
  out(s), format(s);
  s->add_flag("--timings", o.timings, "Record wall-clock seconds (reports are then not reproducible)");
  return cli;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto cli = make_cli();
  CLI::App& app = *cli->app;
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? 0 : 2;
  }
  const CliOptions& o = cli->opts;
  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "validate") return cmd_validate(o, out, err);
    if (name == "kl-check") {
      auto [text, ok] = cmd_kl_check(o);
      write_out(text, o, out);
      return ok ? 0 : 1;
    }
    std::string text;
    if (name == "scale") text = cmd_scale(o);
    else if (name == "phi") text = cmd_phi(o);
    else if (name == "exit-levy") text = cmd_exit_levy(o);
    else if (name == "potential-levy") text = cmd_potential_levy(o);
    else if (name == "wu") text = cmd_wu(o);
    else if (name == "exit") text = cmd_exit(o);
    else if (name == "potential") text = cmd_potential(o);
    else if (name == "resolvent") text = cmd_resolvent(o);
    else if (name == "normalization") text = cmd_normalization(o);
    else if (name == "simulate") text = cmd_simulate(o);
    write_out(text, o, out);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == Errc::ConfigInvalid || e.code() == Errc::InvalidSpec || e.code() == Errc::CertInvalid ? 2 : 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace refracted::cli
