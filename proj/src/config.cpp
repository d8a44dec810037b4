#include "refracted/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "refracted/error.hpp"
#include "refracted/refracted_analytics.hpp"

namespace refracted {

namespace {

[[noreturn]] void fail(const std::string& source, const toml::source_region& where, const std::string& key,
                       const std::string& msg) {
  std::ostringstream out;
  out << source;
  if (where.begin.line > 0) out << ":" << where.begin.line;
  if (!key.empty()) out << ": key '" << key << "'";
  out << ": " << msg;
  throw Error(Errc::ConfigInvalid, out.str());
}

// Reads typed values from one table and remembers which keys were consumed,
// so leftovers can be reported as unknown.
class Reader {
 public:
  Reader(const toml::table& t, std::string source, std::string prefix)
      : t_(t), source_(std::move(source)), prefix_(std::move(prefix)) {}

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  const toml::node* find(const std::string& key) {
    seen_.insert(key);
    return t_.get(key);
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const toml::node* n = find(key);
    if (!n) return require(key, fallback);
    if (!n->is_number()) fail(source_, n->source(), path(key), "expected a number");
    const double v = *n->value<double>();
    if (!std::isfinite(v)) fail(source_, n->source(), path(key), "value must be finite");
    return v;
  }

  std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt) {
    const toml::node* n = find(key);
    if (!n) return require(key, fallback);
    if (!n->is_integer()) fail(source_, n->source(), path(key), "expected an integer");
    return *n->value<std::int64_t>();
  }

  std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    const toml::node* n = find(key);
    if (!n) return require(key, fallback);
    if (!n->is_string()) fail(source_, n->source(), path(key), "expected a string");
    return *n->value<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt) {
    const toml::node* n = find(key);
    if (!n) return require(key, fallback);
    const toml::array* arr = n->as_array();
    if (!arr) fail(source_, n->source(), path(key), "expected an array of numbers");
    std::vector<double> out;
    for (const toml::node& e : *arr) {
      if (!e.is_number()) fail(source_, e.source(), path(key), "array entries must be numbers");
      const double v = *e.value<double>();
      if (!std::isfinite(v)) fail(source_, e.source(), path(key), "array entries must be finite");
      out.push_back(v);
    }
    return out;
  }

  std::vector<std::int64_t> integers(const std::string& key, std::vector<std::int64_t> fallback) {
    const toml::node* n = find(key);
    if (!n) return fallback;
    const toml::array* arr = n->as_array();
    if (!arr) fail(source_, n->source(), path(key), "expected an array of integers");
    std::vector<std::int64_t> out;
    for (const toml::node& e : *arr) {
      if (!e.is_integer()) fail(source_, e.source(), path(key), "array entries must be integers");
      out.push_back(*e.value<std::int64_t>());
    }
    return out;
  }

  const toml::table* table(const std::string& key) {
    const toml::node* n = find(key);
    if (!n) return nullptr;
    if (!n->is_table()) fail(source_, n->source(), path(key), "expected a table");
    return n->as_table();
  }

  const toml::array* table_array(const std::string& key) {
    const toml::node* n = find(key);
    if (!n) return nullptr;
    if (!n->is_array_of_tables()) fail(source_, n->source(), path(key), "expected an array of tables");
    return n->as_array();
  }

  [[noreturn]] void invalid(const std::string& key, const std::string& msg) const {
    const toml::node* n = t_.get(key);
    fail(source_, n ? n->source() : t_.source(), path(key), msg);
  }

  void finish() const {
    for (const auto& [k, v] : t_)
      if (!seen_.count(std::string(k.str()))) fail(source_, v.source(), path(std::string(k.str())), "unknown key");
  }

 private:
  template <class T>
  T require(const std::string& key, const std::optional<T>& fallback) const {
    if (!fallback) fail(source_, t_.source(), path(key), "required key is missing");
    return *fallback;
  }

  const toml::table& t_;
  std::string source_;
  std::string prefix_;
  std::set<std::string> seen_;
};

toml::table parse_toml(std::string_view text, const std::string& source) {
  try {
    return toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    fail(source, e.source(), "", std::string(e.description()));
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ConfigInvalid, path.string() + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Eigen::ArrayXd to_array(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::ArrayXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Rewraps errors from spec constructors and name lookups with the location.
template <class F>
auto checked(Reader& r, const std::string& key, F&& make) {
  try {
    return make();
  } catch (const Error& e) {
    std::string msg = e.what();
    if (e.code() == Errc::ConfigInvalid) msg = msg.substr(msg.find(": ") + 2);
    r.invalid(key, msg);
  }
}

void require_positive(Reader& r, const std::string& key, double v) {
  if (!(v > 0.0)) r.invalid(key, "must be positive");
}

ExitCase read_exit(Reader& r, ExitCase c = {}) {
  c.b = r.number("b", c.b);
  c.a = r.number("a", c.a);
  c.x0 = r.number("x0", c.x0);
  c.q = r.number("q", c.q);
  if (!(c.b < 0.0 && c.a > 0.0)) r.invalid("b", "barriers must satisfy b < 0 < a");
  if (c.q < 0.0) r.invalid("q", "must be >= 0");
  return c;
}

std::vector<int> read_levels(Reader& r) {
  std::vector<int> out;
  for (std::int64_t v : r.integers("levels", {4, 16, 64})) {
    if (v < 1 || v > (1 << 30)) r.invalid("levels", "levels must lie in [1, 2^30]");
    if (!out.empty() && v <= out.back()) r.invalid("levels", "levels must be strictly increasing");
    out.push_back(static_cast<int>(v));
  }
  if (out.empty()) r.invalid("levels", "at least one level is required");
  return out;
}

std::int64_t read_reps(Reader& r, std::int64_t fallback) {
  const std::int64_t reps = r.integer("reps", fallback);
  if (reps < 1) r.invalid("reps", "must be >= 1");
  return reps;
}

void append(std::string& out, const char* key, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s=%.17g\n", key, v);
  out += buf;
}

void append(std::string& out, const char* key, const std::vector<double>& v) {
  out += key;
  out += "=[";
  char buf[32];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.17g", i ? "," : "", v[i]);
    out += buf;
  }
  out += "]\n";
}

void append_model(std::string& out, const char* prefix, const LevySpec& s) {
  const std::string p(prefix);
  if (s.family == Family::Stable) {
    out += p + ".family=stable\n";
    append(out, (p + ".alpha").c_str(), s.alpha);
    return;
  }
  out += p + ".family=cpp\n";
  append(out, (p + ".delta").c_str(), s.delta);
  append(out, (p + ".lambda").c_str(), std::vector<double>(s.lambda.begin(), s.lambda.end()));
  append(out, (p + ".mu").c_str(), std::vector<double>(s.mu.begin(), s.mu.end()));
}

}  // namespace

LevySpec parse_model(std::string_view text, const std::string& source) {
  const toml::table t = parse_toml(text, source);
  Reader r(t, source, "");
  const std::string family = r.string("family");
  LevySpec spec;
  if (family == "cpp") {
    const double delta = r.number("delta");
    const std::vector<double> lambda = r.numbers("lambda");
    const std::vector<double> mu = r.numbers("mu");
    if (lambda.size() != mu.size()) r.invalid("mu", "lambda and mu must have equal length");
    spec = checked(r, "delta", [&] { return LevySpec::cpp(delta, to_array(lambda), to_array(mu)); });
  } else if (family == "stable") {
    const double alpha = r.number("alpha");
    spec = checked(r, "alpha", [&] { return LevySpec::stable(alpha); });
  } else {
    r.invalid("family", "expected \"cpp\" or \"stable\", got \"" + family + "\"");
  }
  r.finish();
  return spec;
}

LevySpec load_model(const std::filesystem::path& path) { return parse_model(read_file(path), path.string()); }

const char* to_string(Suite s) noexcept {
  switch (s) {
    case Suite::Trivial: return "trivial";
    case Suite::KlEquivalence: return "kl-equivalence";
    case Suite::Identities: return "identities";
    case Suite::Mc: return "mc";
    case Suite::All: return "all";
  }
  return "unknown";
}

Suite parse_suite(std::string_view name) {
  for (Suite s : {Suite::Trivial, Suite::KlEquivalence, Suite::Identities, Suite::Mc, Suite::All})
    if (name == to_string(s)) return s;
  throw Error(Errc::ConfigInvalid, "unknown suite '" + std::string(name) +
                                       "' (expected trivial, kl-equivalence, identities, mc or all)");
}

ScenarioConfig parse_scenario(std::string_view text, const std::filesystem::path& base_dir,
                              const std::string& source) {
  const toml::table t = parse_toml(text, source);
  Reader r(t, source, "");
  ScenarioConfig cfg;
  const std::string suite = r.string("suite", std::string("all"));
  cfg.suite = checked(r, "suite", [&] { return parse_suite(suite); });
  cfg.x = load_model(base_dir / r.string("model_x"));
  cfg.y = load_model(base_dir / r.string("model_y"));
  checked(r, "model_y", [&] { return RefractedSpec(cfg.x, cfg.y).require_valid(), 0; });
  cfg.kl_alpha = r.number("kl_alpha", cfg.kl_alpha);
  require_positive(r, "kl_alpha", cfg.kl_alpha);
  cfg.q = r.numbers("q", cfg.q);
  if (cfg.q.empty()) r.invalid("q", "at least one rate is required");
  for (double q : cfg.q)
    if (q < 0.0) r.invalid("q", "rates must be >= 0");
  cfg.resolvent_q1 = r.number("resolvent_q1", cfg.resolvent_q1);
  cfg.resolvent_q2 = r.number("resolvent_q2", cfg.resolvent_q2);
  require_positive(r, "resolvent_q1", cfg.resolvent_q1);
  if (!(cfg.resolvent_q2 > cfg.resolvent_q1)) r.invalid("resolvent_q2", "must exceed resolvent_q1");
  cfg.barrier = r.numbers("barrier", cfg.barrier);
  if (cfg.barrier.size() != 2 || !(cfg.barrier[0] < 0.0 && cfg.barrier[1] > 0.0))
    r.invalid("barrier", "expected [b, a] with b < 0 < a");
  cfg.x_grid = r.numbers("x_grid", cfg.x_grid);
  cfg.y_grid = r.numbers("y_grid", cfg.y_grid);
  for (double x : cfg.x_grid)
    if (!(x >= cfg.barrier[0] && x <= cfg.barrier[1])) r.invalid("x_grid", "grid points must lie in [b, a]");
  for (double y : cfg.y_grid)
    if (!(y > cfg.barrier[0] && y < cfg.barrier[1])) r.invalid("y_grid", "grid points must lie in (b, a)");

  if (const toml::table* mc = r.table("mc")) {
    Reader m(*mc, source, "mc");
    const std::int64_t n = m.integer("n", cfg.mc.n);
    if (n < 1 || n > (1 << 30)) m.invalid("n", "must lie in [1, 2^30]");
    cfg.mc.n = static_cast<int>(n);
    cfg.mc.reps = read_reps(m, cfg.mc.reps);
    const std::int64_t seed = m.integer("seed", static_cast<std::int64_t>(cfg.mc.seed));
    if (seed < 0) m.invalid("seed", "must be >= 0");
    cfg.mc.seed = static_cast<std::uint64_t>(seed);
    const std::int64_t workers = m.integer("workers", cfg.mc.workers);
    if (workers < 0 || workers > 1024) m.invalid("workers", "must lie in [0, 1024]");
    cfg.mc.workers = static_cast<int>(workers);
    if (const toml::array* exits = m.table_array("exit"))
      for (const toml::node& e : *exits) {
        Reader er(*e.as_table(), source, "mc.exit");
        cfg.mc.exit.push_back(read_exit(er));
        er.finish();
      }
    if (const toml::table* occ = m.table("occupation")) {
      Reader o(*occ, source, "mc.occupation");
      OccupationCase c;
      const ExitCase base = read_exit(o, {c.b, c.a, c.x0, c.q});
      c.b = base.b;
      c.a = base.a;
      c.x0 = base.x0;
      c.q = base.q;
      const std::int64_t bins = o.integer("bins", c.bins);
      if (bins < 1 || bins > 1000) o.invalid("bins", "must lie in [1, 1000]");
      c.bins = static_cast<int>(bins);
      c.reps = read_reps(o, c.reps);
      if (c.q == 0.0) o.invalid("q", "occupation needs q > 0");
      o.finish();
      cfg.mc.occupation = c;
    }
    if (const toml::table* conv = m.table("convergence")) {
      Reader c(*conv, source, "mc.convergence");
      const ExitCase base = read_exit(c);
      ConvergenceCase cc;
      cc.b = base.b;
      cc.a = base.a;
      cc.x0 = base.x0;
      cc.q = base.q;
      cc.levels = read_levels(c);
      cc.reps = read_reps(c, cc.reps);
      c.finish();
      cfg.mc.convergence = cc;
    }
    m.finish();
  }

  if (const toml::table* tol = r.table("tolerances")) {
    Reader tr(*tol, source, "tolerances");
    Tolerances& d = cfg.tol;
    for (auto [key, field] : {std::pair{"analytic", &d.analytic}, {"transform", &d.transform},
                              {"normalization", &d.normalization}, {"mass", &d.mass},
                              {"resolvent_equation", &d.resolvent_equation}, {"occupation", &d.occupation}}) {
      *field = tr.number(key, *field);
      if (*field < 0.0) tr.invalid(key, "tolerances must be >= 0");
    }
    tr.finish();
  }
  r.finish();
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_file(path), path.parent_path(), path.string());
}

std::string canonical_text(const ScenarioConfig& cfg) {
  std::string out = "suite=";
  out += to_string(cfg.suite);
  out += "\n";
  append_model(out, "x", cfg.x);
  append_model(out, "y", cfg.y);
  append(out, "kl_alpha", cfg.kl_alpha);
  append(out, "q", cfg.q);
  append(out, "resolvent_q1", cfg.resolvent_q1);
  append(out, "resolvent_q2", cfg.resolvent_q2);
  append(out, "barrier", cfg.barrier);
  append(out, "x_grid", cfg.x_grid);
  append(out, "y_grid", cfg.y_grid);
  append(out, "mc.n", cfg.mc.n);
  append(out, "mc.reps", static_cast<double>(cfg.mc.reps));
  out += "mc.seed=" + std::to_string(cfg.mc.seed) + "\n";
  // The worker count cannot change results, so it is left out.
  for (const ExitCase& e : cfg.mc.exit) append(out, "mc.exit", {e.b, e.a, e.x0, e.q});
  if (const auto& o = cfg.mc.occupation)
    append(out, "mc.occupation", {o->b, o->a, o->x0, o->q, double(o->bins), double(o->reps)});
  if (const auto& c = cfg.mc.convergence) {
    append(out, "mc.convergence", {c->b, c->a, c->x0, c->q, double(c->reps)});
    append(out, "mc.convergence.levels", std::vector<double>(c->levels.begin(), c->levels.end()));
  }
  append(out, "tol",
         {cfg.tol.analytic, cfg.tol.transform, cfg.tol.normalization, cfg.tol.mass, cfg.tol.resolvent_equation,
          cfg.tol.occupation});
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_digest(const ScenarioConfig& cfg) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_text(cfg))));
  return buf;
}

}  // namespace refracted
