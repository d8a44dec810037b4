#pragma once

// Exact event-driven simulation of the truncated refracted process: drift
// plus compound Poisson jumps, switching motion when the position changes
// sign. No time discretization anywhere.

#include <cstdint>
#include <limits>
#include <stop_token>
#include <utility>
#include <vector>

#include "refracted/levy_model.hpp"
#include "refracted/refracted_analytics.hpp"

namespace refracted {

// Counter-based stream: replica i of base seed s draws from splitmix64
// started at a hash of (s, i), so results never depend on scheduling.
class ReplicaRng {
 public:
  ReplicaRng(std::uint64_t seed, std::uint64_t replica);
  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double exponential(double rate);

 private:
  std::uint64_t state_;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

struct SimConfig {
  explicit SimConfig(RefractedSpec spec) : rs(std::move(spec)) {}

  RefractedSpec rs;
  int n = 64;
  double x0 = 0.0;
  double b = -std::numeric_limits<double>::infinity();
  double a = std::numeric_limits<double>::infinity();
  double q = 0.0;
  std::int64_t reps = 100000;
  std::uint64_t seed = 1;
  // 0 selects 50/q for q > 0 and no time cap for q = 0.
  double t_max = 0.0;
  std::int64_t max_events = 10000000;
  // 0 selects the hardware concurrency.
  int workers = 0;
  std::stop_token stop;
};

enum class EventKind { JumpX, JumpY, CrossUpZero, HitA, JumpBelowB, TimeCap };

const char* to_string(EventKind kind) noexcept;

struct PathEvent {
  double time = 0.0;
  // Position just before the event.
  double position = 0.0;
  // Jump size, 0 for barrier and regime events. A JumpBelowB event carries
  // the jump that left the interval.
  double jump = 0.0;
  EventKind kind = EventKind::JumpX;
};

struct FunctionalEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::int64_t reps = 0;
  std::uint64_t seed = 0;
  // e^{-q t_max}; unknown when q = 0, flagged by bias_known.
  double bias_bound = 0.0;
  bool bias_known = true;
  // Paths stopped by the event cap before exiting; they contribute 0.
  std::int64_t censored = 0;
};

// E_x[e^{-q tau_a+}; tau_a+ < tau_b-] for the truncated process at level n.
FunctionalEstimate simulate_exit(const SimConfig& cfg);

struct Bin {
  double lo = 0.0;
  double hi = 0.0;
};

struct OccupationEstimate {
  // Discounted time spent in each bin (lo, hi] before leaving [b, a].
  std::vector<FunctionalEstimate> bins;
  // E_x[e^{-q(tau_a+ ^ tau_b-)}], the boundary term of the occupation identity.
  FunctionalEstimate exit_discount;
};

// Needs q > 0 or both barriers finite.
OccupationEstimate simulate_occupation(const SimConfig& cfg, const std::vector<Bin>& bins);

// Event log of one replica, for checking path invariants and for debugging.
std::vector<PathEvent> trace_path(const SimConfig& cfg, std::int64_t replica);

struct ConvergenceRow {
  int n = 0;
  FunctionalEstimate estimate;
  double abs_error = 0.0;
};

// Exit estimates at each level against one analytic value.
std::vector<ConvergenceRow> convergence_study(const SimConfig& base, const std::vector<int>& levels,
                                              double analytic);

// True when each error exceeds the previous one by at most k combined
// standard errors.
bool errors_nonincreasing(const std::vector<ConvergenceRow>& rows, double k = 2.0);

// Inverse-CDF draw from the normalized truncated jump measure; u in [0, 1).
double sample_jump(const TruncatedSpec& ts, double u);

}  // namespace refracted
