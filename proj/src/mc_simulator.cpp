#include "refracted/mc_simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "refracted/error.hpp"

namespace refracted {

std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ReplicaRng::ReplicaRng(std::uint64_t seed, std::uint64_t replica)
    : state_(splitmix64_mix(splitmix64_mix(seed) ^ (replica * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL))) {}

std::uint64_t ReplicaRng::next_u64() {
  state_ += 0x9e3779b97f4a7c15ULL;
  return splitmix64_mix(state_);
}

double ReplicaRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double ReplicaRng::exponential(double rate) {
  if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
  return -std::log1p(-uniform()) / rate;
}

const char* to_string(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::JumpX: return "JUMP_X";
    case EventKind::JumpY: return "JUMP_Y";
    case EventKind::CrossUpZero: return "CROSS_UP_ZERO";
    case EventKind::HitA: return "HIT_A";
    case EventKind::JumpBelowB: return "JUMP_BELOW_B";
    case EventKind::TimeCap: return "TIME_CAP";
  }
  return "UNKNOWN";
}

double sample_jump(const TruncatedSpec& ts, double u) {
  const double cut = 1.0 / ts.n;
  const LevySpec& s = ts.source;
  if (s.family == Family::Stable) return -cut * std::pow(1.0 - u, -1.0 / s.alpha);
  Eigen::Index i = 0;
  while (i + 1 < ts.cumulative.size() && u >= ts.cumulative[i]) ++i;
  const double lo = i == 0 ? 0.0 : ts.cumulative[i - 1];
  double v = (u - lo) / (ts.cumulative[i] - lo);
  v = std::clamp(v, 0.0, std::nextafter(1.0, 0.0));
  return -(cut - std::log1p(-v) / s.mu[i]);
}

namespace {

enum class Outcome { HitA, BelowB, TimeCap, Censored };

struct Setup {
  TruncatedSpec tx;
  TruncatedSpec ty;
  double t_max = std::numeric_limits<double>::infinity();
  bool bias_known = true;
  double bias_bound = 0.0;
};

Setup prepare(const SimConfig& cfg, bool need_a) {
  cfg.rs.require_valid();
  if (cfg.reps < 1) throw Error(Errc::Domain, "replicate count must be >= 1");
  if (!(cfg.q >= 0.0) || !std::isfinite(cfg.q)) throw Error(Errc::Domain, "discount q must be finite and >= 0");
  if (!(cfg.b < 0.0) || !(cfg.a > 0.0)) throw Error(Errc::Domain, "barriers must satisfy b < 0 < a");
  if (!std::isfinite(cfg.x0)) throw Error(Errc::Domain, "start x0 must be finite");
  if (need_a && !std::isfinite(cfg.a)) throw Error(Errc::Domain, "upper barrier a must be finite");
  if (cfg.t_max < 0.0 || std::isnan(cfg.t_max)) throw Error(Errc::Domain, "t_max must be > 0");
  if (cfg.max_events < 1) throw Error(Errc::Domain, "event cap must be >= 1");
  Setup s{truncate(cfg.rs.x(), cfg.n), truncate(cfg.rs.y(), cfg.n)};
  if (cfg.t_max > 0.0) {
    s.t_max = cfg.t_max;
  } else if (cfg.q > 0.0) {
    s.t_max = 50.0 / cfg.q;
  } else if (!std::isfinite(cfg.a) || !std::isfinite(cfg.b)) {
    throw Error(Errc::Domain, "q = 0 needs both barriers finite or an explicit t_max");
  }
  s.bias_known = cfg.q > 0.0;
  s.bias_bound = std::isfinite(s.t_max) ? std::exp(-cfg.q * s.t_max) : 0.0;
  return s;
}

// Walks one path. on_segment(t0, p0, drift, length) sees every linear piece;
// on_event sees every event in order. Returns the outcome and the stop time.
template <class OnSegment, class OnEvent>
std::pair<Outcome, double> walk(const SimConfig& cfg, const Setup& s, ReplicaRng& rng, OnSegment&& on_segment,
                                OnEvent&& on_event) {
  double t = 0.0;
  double pos = cfg.x0;
  if (pos >= cfg.a) {
    on_event(PathEvent{0.0, pos, 0.0, EventKind::HitA});
    return {Outcome::HitA, 0.0};
  }
  if (pos < cfg.b) {
    on_event(PathEvent{0.0, pos, 0.0, EventKind::JumpBelowB});
    return {Outcome::BelowB, 0.0};
  }
  for (std::int64_t events = 0; events < cfg.max_events; ++events) {
    const bool upper = pos >= 0.0;
    const TruncatedSpec& ts = upper ? s.tx : s.ty;
    const double wait = rng.exponential(ts.rate);
    const double target = upper ? cfg.a : 0.0;
    const double reach = (target - pos) / ts.drift;
    const double step = std::min({wait, reach, s.t_max - t});
    if (step == s.t_max - t && step < wait && step < reach) {
      on_segment(t, pos, ts.drift, step);
      pos += ts.drift * step;
      t = s.t_max;
      on_event(PathEvent{t, pos, 0.0, EventKind::TimeCap});
      return {Outcome::TimeCap, t};
    }
    if (reach <= wait) {
      on_segment(t, pos, ts.drift, reach);
      t += reach;
      pos = target;
      if (upper) {
        on_event(PathEvent{t, pos, 0.0, EventKind::HitA});
        return {Outcome::HitA, t};
      }
      // The pending jump clock is discarded: memorylessness lets the new
      // regime start a fresh one.
      on_event(PathEvent{t, pos, 0.0, EventKind::CrossUpZero});
      continue;
    }
    on_segment(t, pos, ts.drift, wait);
    t += wait;
    pos += ts.drift * wait;
    const double jump = sample_jump(ts, rng.uniform());
    if (pos + jump < cfg.b) {
      on_event(PathEvent{t, pos, jump, EventKind::JumpBelowB});
      return {Outcome::BelowB, t};
    }
    on_event(PathEvent{t, pos, jump, upper ? EventKind::JumpX : EventKind::JumpY});
    pos += jump;
  }
  return {Outcome::Censored, t};
}

struct Moments {
  std::int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    ++count;
    const double d = v - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (v - mean);
  }

  void merge(const Moments& o) {
    if (o.count == 0) return;
    const double n = static_cast<double>(count + o.count);
    const double d = o.mean - mean;
    mean += d * static_cast<double>(o.count) / n;
    m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) / n;
    count += o.count;
  }
};

struct BlockResult {
  std::vector<Moments> moments;
  std::int64_t censored = 0;
};

constexpr std::int64_t kBlock = 4096;

// Runs replicas in fixed blocks on worker threads and merges blocks in index
// order, so the result is independent of the worker count.
template <class Replica>
BlockResult run_blocks(const SimConfig& cfg, std::size_t width, Replica&& replica) {
  const std::int64_t nblocks = (cfg.reps + kBlock - 1) / kBlock;
  std::vector<BlockResult> blocks(static_cast<std::size_t>(nblocks));
  std::atomic<std::int64_t> next{0};
  std::atomic<bool> cancelled{false};
  auto work = [&] {
    std::vector<double> values(width);
    for (std::int64_t k; (k = next.fetch_add(1)) < nblocks;) {
      if (cfg.stop.stop_requested()) {
        cancelled = true;
        return;
      }
      BlockResult& out = blocks[static_cast<std::size_t>(k)];
      out.moments.assign(width, Moments{});
      const std::int64_t end = std::min(cfg.reps, (k + 1) * kBlock);
      for (std::int64_t r = k * kBlock; r < end; ++r) {
        std::fill(values.begin(), values.end(), 0.0);
        if (!replica(r, values)) ++out.censored;
        for (std::size_t j = 0; j < width; ++j) out.moments[j].add(values[j]);
      }
    }
  };
  unsigned nworkers = cfg.workers > 0 ? static_cast<unsigned>(cfg.workers) : std::thread::hardware_concurrency();
  nworkers = static_cast<unsigned>(std::clamp<std::int64_t>(nworkers, 1, nblocks));
  if (nworkers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < nworkers; ++i) pool.emplace_back(work);
  }
  if (cancelled) throw Error(Errc::Cancelled, "simulation cancelled");
  BlockResult total;
  total.moments.assign(width, Moments{});
  for (const BlockResult& b : blocks) {
    for (std::size_t j = 0; j < width; ++j) total.moments[j].merge(b.moments[j]);
    total.censored += b.censored;
  }
  return total;
}

FunctionalEstimate finish(const Moments& m, const SimConfig& cfg, const Setup& s, std::int64_t censored) {
  FunctionalEstimate e;
  e.mean = m.mean;
  e.reps = m.count;
  e.std_error = m.count > 1 ? std::sqrt(m.m2 / static_cast<double>(m.count - 1) / static_cast<double>(m.count)) : 0.0;
  e.seed = cfg.seed;
  e.bias_known = s.bias_known;
  e.bias_bound = s.bias_bound;
  e.censored = censored;
  if (!std::isfinite(e.mean)) throw Error(Errc::NonFinite, "simulation produced a non-finite estimate");
  return e;
}

}  // namespace

FunctionalEstimate simulate_exit(const SimConfig& cfg) {
  const Setup s = prepare(cfg, true);
  auto total = run_blocks(cfg, 1, [&](std::int64_t r, std::vector<double>& v) {
    ReplicaRng rng(cfg.seed, static_cast<std::uint64_t>(r));
    auto [outcome, t] = walk(cfg, s, rng, [](double, double, double, double) {}, [](const PathEvent&) {});
    if (outcome == Outcome::HitA) v[0] = std::exp(-cfg.q * t);
    return outcome != Outcome::Censored;
  });
  return finish(total.moments[0], cfg, s, total.censored);
}

OccupationEstimate simulate_occupation(const SimConfig& cfg, const std::vector<Bin>& bins) {
  const Setup s = prepare(cfg, false);
  for (const Bin& bin : bins)
    if (!(bin.lo < bin.hi)) throw Error(Errc::Domain, "occupation bins need lo < hi");
  const std::size_t nb = bins.size();
  const double q = cfg.q;
  auto total = run_blocks(cfg, nb + 1, [&](std::int64_t r, std::vector<double>& v) {
    ReplicaRng rng(cfg.seed, static_cast<std::uint64_t>(r));
    auto on_segment = [&](double t0, double p0, double drift, double len) {
      for (std::size_t j = 0; j < nb; ++j) {
        const double s1 = std::clamp((bins[j].lo - p0) / drift, 0.0, len);
        const double s2 = std::clamp((bins[j].hi - p0) / drift, 0.0, len);
        if (s2 <= s1) continue;
        v[j] += q > 0.0 ? std::exp(-q * (t0 + s1)) * -std::expm1(-q * (s2 - s1)) / q : s2 - s1;
      }
    };
    auto [outcome, t] = walk(cfg, s, rng, on_segment, [](const PathEvent&) {});
    if (outcome == Outcome::HitA || outcome == Outcome::BelowB) v[nb] = std::exp(-q * t);
    return outcome != Outcome::Censored;
  });
  OccupationEstimate out;
  for (std::size_t j = 0; j < nb; ++j) out.bins.push_back(finish(total.moments[j], cfg, s, total.censored));
  out.exit_discount = finish(total.moments[nb], cfg, s, total.censored);
  return out;
}

std::vector<PathEvent> trace_path(const SimConfig& cfg, std::int64_t replica) {
  const Setup s = prepare(cfg, false);
  ReplicaRng rng(cfg.seed, static_cast<std::uint64_t>(replica));
  std::vector<PathEvent> log;
  walk(cfg, s, rng, [](double, double, double, double) {}, [&](const PathEvent& e) { log.push_back(e); });
  return log;
}

std::vector<ConvergenceRow> convergence_study(const SimConfig& base, const std::vector<int>& levels,
                                              double analytic) {
  if (!std::is_sorted(levels.begin(), levels.end()) ||
      std::adjacent_find(levels.begin(), levels.end()) != levels.end())
    throw Error(Errc::Domain, "convergence levels must be strictly increasing");
  std::vector<ConvergenceRow> rows;
  for (int n : levels) {
    SimConfig cfg = base;
    cfg.n = n;
    ConvergenceRow row;
    row.n = n;
    row.estimate = simulate_exit(cfg);
    row.abs_error = std::abs(row.estimate.mean - analytic);
    rows.push_back(row);
  }
  return rows;
}

bool errors_nonincreasing(const std::vector<ConvergenceRow>& rows, double k) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double se = std::hypot(rows[i - 1].estimate.std_error, rows[i].estimate.std_error);
    if (rows[i].abs_error > rows[i - 1].abs_error + k * se) return false;
  }
  return true;
}

}  // namespace refracted
