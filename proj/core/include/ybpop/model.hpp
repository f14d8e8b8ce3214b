#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ybpop/params.hpp"

namespace yb {

// Survival probability after h steps: 1 - h/denom inside [0, A1*p], 0 outside.
double survival(long long h, const ModelParams& params);

// Reproduction gate at absolute step h: 0 during the first trunc(rho*p) steps
// of each year, 1 otherwise. Total for h >= 0.
int season_gate(long long h, const ModelParams& params);

// Fecundity m(N): m0 on the plateau N <= 1, m0*N^-gamma above. Continuous but
// non-smooth at N = 1; no smoothing is applied.
double fecundity(double n, const ModelParams& params);

// Per-mother yield g(N) = N*m(N) entering every fresh component.
double reproduction_yield(double n, const ModelParams& params);

// dg/dN: m0 below 1, m0*(1-gamma)*N^-gamma above. The derivative jumps at
// N = 1 (50 vs -362.5 at defaults); exactly at 1 the left value is returned
// and *kink is set. Throws std::domain_error for N <= 0.
double yield_slope(double n, const ModelParams& params, bool* kink = nullptr);

// Sup distance over the tracked coordinates 0..2p-1. The last coordinate is
// deliberately excluded: it is the recomputed component, and every distance
// in the sensitivity/entropy pipelines scans only the first A1*p entries.
double sup_distance_tracked(std::span<const double> a, std::span<const double> b);

// Fresh component N_t from the preceding 2p+1 values, window[i] = N_{t-2p-1+i}:
//
//   N_t = (1/p) * sum_{h=floor(A0*p)}^{2p} g(N_{t-h}) * m_rho * S(h)
//
// with the season gate evaluated at step t-h+1. Both the inclusive upper
// bound 2p and the one-step gate shift follow the recursion that produced
// data/fixed_point_p100.txt: under this kernel that vector is a two-year
// fixed point to 8.0e-14 sup; shifting the gate or dropping the h = 2p term
// moves the residual above 1e-2. Throws std::invalid_argument when the
// window length is not 2p+1.
double next_component(long long t, std::span<const double> window,
                      const ModelParams& params);

// The discretized one-year map T: (N_0..N_2p) -> (N_p..N_3p) and its square.
// Kernel weights are precomputed per year-phase at construction, so build one
// instance per parameter set and reuse it. Immutable and safe to share
// across threads; all map evaluations are pure.
class PopulationMap {
 public:
  explicit PopulationMap(const ModelParams& params);

  const ModelParams& params() const { return params_; }
  const DerivedBounds& derived() const { return derived_; }
  int dim() const { return dim_; }
  int min_lag() const { return min_lag_; }
  int max_lag() const { return lifespan_; }

  // One year: copies coordinates p..2p down and extends by p fresh values.
  // Throws std::domain_error when an input entry is not strictly positive.
  StateVector advance(const StateVector& state) const;

  // Two years, identical to advance(advance(state)) bit for bit.
  StateVector advance_two(const StateVector& state) const;

  // Applies advance_two `pairs` times in place, reusing the yield cache
  // between iterations. Bit-identical to repeated advance_two calls.
  void iterate_pairs(StateVector& state, long long pairs) const;

  // Gated survival weight of lag h for the component produced at step t
  // (not yet divided by p). Zero for winter-gated lags.
  double kernel_weight(long long t, int h) const {
    return weights_[phase(t)][static_cast<std::size_t>(h - min_lag_)];
  }

 private:
  friend class TwoYearWalker;
  int phase(long long t) const { return static_cast<int>(t % period_); }
  // Extends values[from..from+count) from the 2p preceding entries; yields[k]
  // must hold g(values[k]) for k in [from-2p, from) and is filled for the new
  // entries.
  void extend(double* values, double* yields, int from, int count) const;
  void check_positive(const StateVector& state) const;

  ModelParams params_;
  DerivedBounds derived_;
  int dim_;
  int min_lag_;
  int lifespan_;
  int period_;
  std::vector<std::vector<double>> weights_;  // [phase][h - min_lag]
};

// Rolling advance_two with persistent buffers, for loops that step one state
// many times (divergence times, escape times, return scans). step_pair() is
// bit-identical to PopulationMap::advance_two.
class TwoYearWalker {
 public:
  TwoYearWalker(const PopulationMap& map, const StateVector& start);
  void reset(const StateVector& start);
  void step_pair();
  std::span<const double> state() const {
    return {values_.data(), static_cast<std::size_t>(map_->dim())};
  }

 private:
  const PopulationMap* map_;
  std::vector<double> values_;
  std::vector<double> yields_;
};

}  // namespace yb
