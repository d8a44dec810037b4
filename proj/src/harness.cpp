#include "refracted/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "refracted/error.hpp"
#include "refracted/mc_simulator.hpp"
#include "refracted/quadrature.hpp"
#include "refracted/refracted_analytics.hpp"
#include "refracted/scale_engine.hpp"

namespace refracted {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(const char* pattern, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt("%.17g", v);
}

const char* family_name(const LevySpec& s) { return s.family == Family::Stable ? "stable" : "cpp"; }

// Collects records in order and charges each one the time since the last.
class Recorder {
 public:
  explicit Recorder(const SuiteOptions& opts) : opts_(opts), last_(std::chrono::steady_clock::now()) {}

  void add(std::string name, double analytic, double reference, double std_error, double tol) {
    if (opts_.stop.stop_requested()) throw Error(Errc::Cancelled, "suite cancelled");
    CheckRecord r = make_record(std::move(name), analytic, reference, std_error, tol);
    const auto now = std::chrono::steady_clock::now();
    if (opts_.timings) r.seconds = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    if (opts_.on_record) opts_.on_record(r);
    records_.push_back(std::move(r));
  }

  // Relative tolerance against the reference value.
  void add_rel(std::string name, double analytic, double reference, double rel) {
    add(std::move(name), analytic, reference, 0.0, rel * std::abs(reference));
  }

  std::vector<CheckRecord> take() { return std::move(records_); }

 private:
  const SuiteOptions& opts_;
  std::chrono::steady_clock::time_point last_;
  std::vector<CheckRecord> records_;
};

void trivial_suite(const ScenarioConfig& cfg, Recorder& rec) {
  const double b = cfg.barrier[0];
  const double a = cfg.barrier[1];
  for (const auto& [label, spec] : {std::pair{"X", &cfg.x}, std::pair{"Y", &cfg.y}})
    for (double q : cfg.q) {
      const ScaleEvaluator ev(*spec, q);
      const double expected = spec->bounded_variation() ? 1.0 / spec->delta : 0.0;
      rec.add(fmt("trivial/w_at_zero/%s/%s/q=%g", label, family_name(*spec), q), ev.w(0.0), expected, 0.0, 0.0);
      rec.add(fmt("trivial/exit_levy_at_a/%s/q=%g", label, q), exit_levy(ev, BarrierMode::both(b, a), a), 1.0,
              0.0, 0.0);
    }
  const RefractedSpec rs(cfg.x, cfg.y);
  for (double q : cfg.q) rec.add(fmt("trivial/exit_up_at_a/q=%g", q), exit_up(rs, q, b, a, a), 1.0, 0.0, 0.0);

  SimConfig sim(rs);
  sim.b = b;
  sim.a = a;
  sim.n = cfg.mc.n;
  sim.seed = cfg.mc.seed;
  sim.workers = cfg.mc.workers;
  sim.reps = 1000;
  sim.x0 = a;
  const FunctionalEstimate at_a = simulate_exit(sim);
  rec.add("trivial/simulate_exit_at_a", at_a.mean, 1.0, at_a.std_error, 0.0);
  sim.x0 = 0.0;
  sim.q = 1.0;
  const OccupationEstimate above = simulate_occupation(sim, {{a, a + 1.0}});
  rec.add("trivial/occupation_above_a", above.bins[0].mean, 0.0, above.bins[0].std_error, 0.0);
}

void kl_suite(const ScenarioConfig& cfg, Recorder& rec) {
  if (!cfg.x.bounded_variation())
    throw Error(Errc::ConfigInvalid, "kl-equivalence needs a compound Poisson model_x");
  LevySpec y = cfg.x;
  y.delta += cfg.kl_alpha;
  const RefractedSpec rs(cfg.x, y);
  const double b = cfg.barrier[0];
  const double a = cfg.barrier[1];
  const double rel = cfg.tol.analytic;
  for (double q : cfg.q) {
    const RefractedModel m(rs, q);
    const KlOracle kl(cfg.x, cfg.kl_alpha, q);
    for (double x : cfg.x_grid) {
      rec.add_rel(fmt("kl/exit_up/q=%g/x=%g", q, x), m.exit_up(b, x, a), kl.exit_up(b, x, a), rel);
      for (double yv : cfg.y_grid)
        rec.add_rel(fmt("kl/killed_density/q=%g/x=%g/y=%g", q, x, yv), m.killed_potential_density(b, a, x, yv),
                    kl.killed_potential_density(b, a, x, yv), rel);
    }
    if (q == 0.0) continue;
    for (double yv : cfg.y_grid) {
      const LineFunction f = LineFunction::indicator(yv - 0.25, yv + 0.25);
      const Resolvent r(m, f);
      for (double x : cfg.x_grid)
        rec.add_rel(fmt("kl/resolvent/q=%g/x=%g/f=1(%g,%g]", q, x, yv - 0.25, yv + 0.25), r(x),
                    kl.resolvent(x, f), rel);
    }
  }
}

void identities_suite(const ScenarioConfig& cfg, Recorder& rec) {
  for (const auto& [label, spec] : {std::pair{"X", &cfg.x}, std::pair{"Y", &cfg.y}})
    for (double q : cfg.q) {
      const double base = phi(*spec, q);
      for (double d : {0.5, 1.0, 2.0}) {
        const double beta = base + d;
        rec.add_rel(fmt("identity/transform/%s/%s/q=%g/beta=phi+%g", label, family_name(*spec), q, d),
                    laplace_transform_of_w(*spec, q, beta), 1.0 / (psi(*spec, beta) - q), cfg.tol.transform);
      }
    }
  const RefractedSpec rs(cfg.x, cfg.y);
  for (double q : cfg.q) {
    if (q == 0.0) continue;
    const RefractedModel m(rs, q);
    const Resolvent one(m, LineFunction::constant(1.0));
    rec.add_rel(fmt("identity/normalization/q=%g", q), m.normalization_constant().value, q * one.n_u_one().value,
                cfg.tol.normalization);
    rec.add_rel(fmt("identity/normalization_single/q=%g", q), normalization_constant(RefractedSpec(cfg.x, cfg.x), q),
                psi_prime(cfg.x, phi(cfg.x, q)), cfg.tol.normalization);
    for (double x : cfg.x_grid)
      rec.add(fmt("identity/resolvent_mass/q=%g/x=%g", q, x), q * one(x), 1.0, 0.0, cfg.tol.mass);
  }

  // The identity only needs the coarse tolerance, so the nested paths run coarse.
  AnalyticsOptions coarse;
  coarse.rel_tol = 1e-7;
  coarse.nested_rel_tol = 1e-5;
  coarse.inner_rel_tol = 1e-7;
  const double q1 = cfg.resolvent_q1;
  const double q2 = cfg.resolvent_q2;
  const RefractedModel m1(rs, q1, coarse);
  const RefractedModel m2(rs, q2, coarse);
  const LineFunction f = LineFunction::indicator(0.0, kInf);
  const Resolvent r1(m1, f);
  const Resolvent r2(m2, f);
  LineFunction g;
  g.f = [&](double y) { return r2(y); };
  g.breakpoints = {0.0};
  const double nested = (q2 - q1) * Resolvent(m1, g).at_zero();
  rec.add(fmt("identity/resolvent_equation/q1=%g/q2=%g/x=0", q1, q2), r1.at_zero() - r2.at_zero(), nested, 0.0,
          cfg.tol.resolvent_equation);
}

SimConfig sim_config(const ScenarioConfig& cfg, double b, double a, double x0, double q, std::int64_t reps,
                     const SuiteOptions& opts) {
  SimConfig s{RefractedSpec(cfg.x, cfg.y)};
  s.n = cfg.mc.n;
  s.b = b;
  s.a = a;
  s.x0 = x0;
  s.q = q;
  s.reps = reps;
  s.seed = cfg.mc.seed;
  s.workers = cfg.mc.workers;
  s.stop = opts.stop;
  return s;
}

void mc_suite(const ScenarioConfig& cfg, Recorder& rec, const SuiteOptions& opts) {
  const RefractedSpec rs(cfg.x, cfg.y);
  for (const ExitCase& c : cfg.mc.exit) {
    const SimConfig s = sim_config(cfg, c.b, c.a, c.x0, c.q, cfg.mc.reps, opts);
    const FunctionalEstimate e = simulate_exit(s);
    // A capped path can only have lost the discount e^{-q t_max}.
    rec.add(fmt("mc/exit/n=%d/b=%g/a=%g/x0=%g/q=%g", s.n, c.b, c.a, c.x0, c.q), exit_up(rs, c.q, c.b, c.x0, c.a),
            e.mean, e.std_error, e.bias_known ? e.bias_bound : 0.0);
  }
  if (const auto& c = cfg.mc.occupation) {
    const SimConfig s = sim_config(cfg, c->b, c->a, c->x0, c->q, c->reps, opts);
    std::vector<Bin> bins;
    const double width = (c->a - c->b) / c->bins;
    for (int i = 0; i < c->bins; ++i)
      bins.push_back({c->b + i * width, i + 1 == c->bins ? c->a : c->b + (i + 1) * width});
    const OccupationEstimate occ = simulate_occupation(s, bins);
    const RefractedModel m(rs, c->q);
    QuadOptions qo;
    qo.rel_tol = 1e-9;
    qo.abs_tol = 1e-12;
    for (std::size_t i = 0; i < bins.size(); ++i) {
      std::vector<double> pts = {bins[i].lo};
      for (double p : {c->x0, 0.0})
        if (p > bins[i].lo && p < bins[i].hi) pts.push_back(p);
      pts.push_back(bins[i].hi);
      std::sort(pts.begin(), pts.end());
      const double analytic =
          integrate([&](double y) { return m.killed_potential_density(c->b, c->a, c->x0, y); },
                    std::span<const double>(pts), qo)
              .value;
      rec.add(fmt("mc/occupation/n=%d/x0=%g/q=%g/bin=(%g,%g]", s.n, c->x0, c->q, bins[i].lo, bins[i].hi), analytic,
              occ.bins[i].mean, occ.bins[i].std_error, cfg.tol.occupation);
    }
  }
  if (const auto& c = cfg.mc.convergence) {
    const SimConfig s = sim_config(cfg, c->b, c->a, c->x0, c->q, c->reps, opts);
    const double analytic = exit_up(rs, c->q, c->b, c->x0, c->a);
    const std::vector<ConvergenceRow> rows = convergence_study(s, c->levels, analytic);
    // Growth of the error from one level to the next, which should be 0 up
    // to noise.
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double growth = std::max(0.0, rows[i].abs_error - rows[i - 1].abs_error);
      const double se = std::hypot(rows[i - 1].estimate.std_error, rows[i].estimate.std_error);
      rec.add(fmt("mc/convergence/error_growth/n=%d->%d/x0=%g/q=%g", rows[i - 1].n, rows[i].n, c->x0, c->q), growth,
              0.0, se, 0.0);
    }
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (unsigned char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default:
        if (ch < 0x20)
          out += fmt("\\u%04x", ch);
        else
          out += static_cast<char>(ch);
    }
  }
  return out + "\"";
}

// JSON has no literal for non-finite numbers.
std::string json_number(double v) { return std::isfinite(v) ? num(v) : "null"; }

}  // namespace

CheckRecord make_record(std::string name, double analytic, double reference, double std_error, double tol) {
  CheckRecord r;
  r.name = std::move(name);
  r.analytic = analytic;
  r.reference = reference;
  r.std_error = std_error;
  r.tol = tol;
  r.pass = std::abs(analytic - reference) <= tol + 3.0 * std_error;
  return r;
}

std::vector<CheckRecord> run_suite(const ScenarioConfig& cfg, const SuiteOptions& opts) {
  Recorder rec(opts);
  const Suite s = cfg.suite;
  if (s == Suite::Trivial || s == Suite::All) trivial_suite(cfg, rec);
  // "all" runs the drift-refraction oracle only where it applies.
  if (s == Suite::KlEquivalence || (s == Suite::All && cfg.x.bounded_variation())) kl_suite(cfg, rec);
  if (s == Suite::Identities || s == Suite::All) identities_suite(cfg, rec);
  if (s == Suite::Mc || s == Suite::All) mc_suite(cfg, rec, opts);
  return rec.take();
}

bool all_pass(const std::vector<CheckRecord>& records) {
  for (const CheckRecord& r : records)
    if (!r.pass) return false;
  return true;
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "json") return ReportFormat::Json;
  if (name == "csv") return ReportFormat::Csv;
  throw Error(Errc::ConfigInvalid, "unknown report format '" + name + "' (expected json or csv)");
}

std::string render_report(const std::vector<CheckRecord>& records, ReportFormat format,
                          const std::string& config_digest) {
  if (records.empty()) throw Error(Errc::Domain, "report needs at least one record");
  std::string out;
  if (format == ReportFormat::Csv) {
    out = "name,analytic,reference,stderr,tol,pass,seconds\n";
    for (const CheckRecord& r : records)
      out += csv_field(r.name) + "," + num(r.analytic) + "," + num(r.reference) + "," + num(r.std_error) + "," +
             num(r.tol) + "," + (r.pass ? "true" : "false") + "," + num(r.seconds) + "\n";
    return out;
  }
  out = "{\n  \"version\": 1,\n  \"config_digest\": " + json_string(config_digest) + ",\n  \"records\": [\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const CheckRecord& r = records[i];
    out += "    {\"name\": " + json_string(r.name) + ", \"analytic\": " + json_number(r.analytic) +
           ", \"reference\": " + json_number(r.reference) + ", \"stderr\": " + json_number(r.std_error) +
           ", \"tol\": " + json_number(r.tol) + ", \"pass\": " + (r.pass ? "true" : "false") +
           ", \"seconds\": " + json_number(r.seconds) + "}" + (i + 1 < records.size() ? "," : "") + "\n";
  }
  out += "  ]\n}\n";
  return out;
}

void emit_report(const std::vector<CheckRecord>& records, ReportFormat format, const std::filesystem::path& path,
                 const std::string& config_digest) {
  const std::string text = render_report(records, format, config_digest);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << text;
  out.close();
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

double laplace_transform_of_w(const LevySpec& spec, double q, double beta) {
  const ScaleEvaluator ev(spec, q);
  if (!(beta > ev.phi())) throw Error(Errc::Domain, "transform needs beta > Phi(q)");
  // x = s^2 removes the x^{alpha-1} behaviour of W at 0. The growth e^{Phi x}
  // is cancelled analytically so that far panels never overflow.
  QuadOptions qo;
  qo.rel_tol = 1e-11;
  const double gap = beta - ev.phi();
  auto damped_w = [&](double x) {
    if (!ev.has_leading_term()) return std::exp(-beta * x) * ev.w(x);
    return std::exp(-gap * x) * ev.phi_prime() + std::exp(-beta * x) * ev.w_excess(x);
  };
  return integrate_line([&](double s) { return 2.0 * s * damped_w(s * s); }, 0.0, kInf, {}, qo,
                        1.0 / std::sqrt(gap))
      .value;
}

}  // namespace refracted
