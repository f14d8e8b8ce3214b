#include "ybpop/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace yb {

double survival(long long h, const ModelParams& params) {
  if (h < 0 || h > params.lifespan_steps()) return 0.0;
  return 1.0 - static_cast<double>(h) / params.survival_denominator();
}

int season_gate(long long h, const ModelParams& params) {
  return (h % params.steps_per_year) < params.winter_steps() ? 0 : 1;
}

double fecundity(double n, const ModelParams& params) {
  if (n <= 1.0) return params.fecundity_cap;
  return params.fecundity_cap * std::pow(n, -params.decay_exponent);
}

double reproduction_yield(double n, const ModelParams& params) {
  if (n <= 1.0) return params.fecundity_cap * n;
  return params.fecundity_cap * std::pow(n, 1.0 - params.decay_exponent);
}

double yield_slope(double n, const ModelParams& params, bool* kink) {
  if (kink) *kink = false;
  if (!(n > 0.0)) throw std::domain_error("yield_slope: N must be positive");
  if (n < 1.0) return params.fecundity_cap;
  if (n == 1.0) {
    if (kink) *kink = true;
    return params.fecundity_cap;
  }
  return params.fecundity_cap * (1.0 - params.decay_exponent) *
         std::pow(n, -params.decay_exponent);
}

double sup_distance_tracked(std::span<const double> a,
                            std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("sup_distance_tracked: length mismatch");
  const std::size_t tracked = a.size() - 1;
  double sup = 0.0;
  for (std::size_t k = 0; k < tracked; ++k) {
    sup = std::max(sup, std::abs(a[k] - b[k]));
  }
  return sup;
}

double next_component(long long t, std::span<const double> window,
                      const ModelParams& params) {
  const int dim = params.dim();
  if (static_cast<int>(window.size()) != dim)
    throw std::invalid_argument("next_component: window must hold 2p+1 values");
  const int lifespan = params.lifespan_steps();
  double acc = 0.0;
  for (int h = params.min_lag(); h <= lifespan; ++h) {
    if (season_gate(t - h + 1, params) == 0) continue;
    // window[dim - h] = N_{t-h}
    acc += reproduction_yield(window[static_cast<std::size_t>(dim - h)], params) *
           survival(h, params);
  }
  return acc / static_cast<double>(params.steps_per_year);
}

PopulationMap::PopulationMap(const ModelParams& params)
    : params_(params),
      derived_(bounds(params)),
      dim_(params.dim()),
      min_lag_(params.min_lag()),
      lifespan_(params.lifespan_steps()),
      period_(params.steps_per_year) {
  params_.validate();
  // weights_[r][h - min_lag] = season_gate(t-h+1) * S(h) for any t with
  // t % p == r. Stored ungated-by-p so the summation matches next_component
  // term for term.
  weights_.assign(static_cast<std::size_t>(period_),
                  std::vector<double>(static_cast<std::size_t>(lifespan_ - min_lag_ + 1), 0.0));
  for (int r = 0; r < period_; ++r) {
    for (int h = min_lag_; h <= lifespan_; ++h) {
      const long long gate_step =
          static_cast<long long>(r) - h + 1 + 2LL * period_ * period_;
      weights_[static_cast<std::size_t>(r)][static_cast<std::size_t>(h - min_lag_)] =
          season_gate(gate_step, params_) ? survival(h, params_) : 0.0;
    }
  }
}

void PopulationMap::check_positive(const StateVector& state) const {
  if (static_cast<int>(state.size()) != dim_)
    throw std::invalid_argument("PopulationMap: state must have 2p+1 entries");
  if (!in_positive_cone(state))
    throw std::domain_error("PopulationMap: state has a non-positive entry");
}

void PopulationMap::extend(double* values, double* yields, int from,
                           int count) const {
  const int lag_count = lifespan_ - min_lag_ + 1;
  const double p = static_cast<double>(period_);
  for (int t = from; t < from + count; ++t) {
    const double* w = weights_[static_cast<std::size_t>(phase(t))].data();
    double acc = 0.0;
    for (int k = 0; k < lag_count; ++k) {
      acc += yields[t - (min_lag_ + k)] * w[k];
    }
    values[t] = acc / p;
    yields[t] = reproduction_yield(values[t], params_);
  }
}

StateVector PopulationMap::advance(const StateVector& state) const {
  check_positive(state);
  const int p = period_;
  std::vector<double> values(static_cast<std::size_t>(dim_ + p));
  std::vector<double> yields(static_cast<std::size_t>(dim_ + p));
  for (int k = 0; k < dim_; ++k) {
    values[static_cast<std::size_t>(k)] = state[static_cast<std::size_t>(k)];
    yields[static_cast<std::size_t>(k)] = reproduction_yield(state[static_cast<std::size_t>(k)], params_);
  }
  extend(values.data(), yields.data(), dim_, p);
  return StateVector(values.begin() + p, values.end());
}

StateVector PopulationMap::advance_two(const StateVector& state) const {
  StateVector out = state;
  iterate_pairs(out, 1);
  return out;
}

void PopulationMap::iterate_pairs(StateVector& state, long long pairs) const {
  check_positive(state);
  if (pairs <= 0) return;
  const int p2 = 2 * period_;
  std::vector<double> values(static_cast<std::size_t>(dim_ + p2));
  std::vector<double> yields(static_cast<std::size_t>(dim_ + p2));
  for (int k = 0; k < dim_; ++k) {
    values[static_cast<std::size_t>(k)] = state[static_cast<std::size_t>(k)];
    yields[static_cast<std::size_t>(k)] = reproduction_yield(state[static_cast<std::size_t>(k)], params_);
  }
  for (long long it = 0; it < pairs; ++it) {
    extend(values.data(), yields.data(), dim_, p2);
    // Shift the freshly produced two years down; yields move with them so the
    // next round never recomputes a carried entry.
    std::memmove(values.data(), values.data() + p2,
                 static_cast<std::size_t>(dim_) * sizeof(double));
    std::memmove(yields.data(), yields.data() + p2,
                 static_cast<std::size_t>(dim_) * sizeof(double));
  }
  std::copy(values.begin(), values.begin() + dim_, state.begin());
}

TwoYearWalker::TwoYearWalker(const PopulationMap& map, const StateVector& start)
    : map_(&map) {
  values_.resize(static_cast<std::size_t>(map.dim() + 2 * map.params().steps_per_year));
  yields_.resize(values_.size());
  reset(start);
}

void TwoYearWalker::reset(const StateVector& start) {
  map_->check_positive(start);
  const int dim = map_->dim_;
  for (int k = 0; k < dim; ++k) {
    values_[static_cast<std::size_t>(k)] = start[static_cast<std::size_t>(k)];
    yields_[static_cast<std::size_t>(k)] =
        reproduction_yield(start[static_cast<std::size_t>(k)], map_->params_);
  }
}

void TwoYearWalker::step_pair() {
  const int dim = map_->dim_;
  const int p2 = 2 * map_->period_;
  map_->extend(values_.data(), yields_.data(), dim, p2);
  std::memmove(values_.data(), values_.data() + p2,
               static_cast<std::size_t>(dim) * sizeof(double));
  std::memmove(yields_.data(), yields_.data() + p2,
               static_cast<std::size_t>(dim) * sizeof(double));
}

}  // namespace yb
