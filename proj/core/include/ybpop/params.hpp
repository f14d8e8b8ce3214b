#pragma once

#include <vector>

namespace yb {

// A system state: the last 2p+1 population values N_0..N_{2p}, one per
// p-th of a year over the two-year lifespan. Values are normalized female
// counts (1.0 = 55000 individuals under the standard ensemble normalization).
using StateVector = std::vector<double>;

// Denominator of the linear survival kernel S(h) = 1 - h/denom.
// kFullLifetime uses A1*p+1 (reproduction possible up to the last step),
// kLifetime uses A1*p (S vanishes at the final step).
enum class SurvivalMode {
  kLifetime,      // denom = 2p
  kFullLifetime,  // denom = 2p+1 (default; all reference data uses this)
};

struct ModelParams {
  double maturation_age = 0.18;  // A0, years until first litter
  double max_age = 2.0;          // A1, years (the state layout assumes 2)
  int steps_per_year = 100;      // p
  double fecundity_cap = 50.0;   // m0, births per female-year at low density
  double decay_exponent = 8.25;  // gamma, fecundity decay above N = 1
  double winter_fraction = 0.30; // rho, fraction of year with no reproduction
  double season_slack = 0.0;     // epsilon, extra non-breeding slack
  SurvivalMode survival_mode = SurvivalMode::kFullLifetime;

  int dim() const { return 2 * steps_per_year + 1; }
  int lifespan_steps() const { return 2 * steps_per_year; }  // A1*p
  int min_lag() const;      // floor(A0*p), first reproducing age in steps
  int winter_steps() const; // trunc(rho*p)
  double survival_denominator() const;

  // Throws std::invalid_argument when the parameter restrictions fail:
  // 0 < 2*A0 < A1, A0 + 1 < A1, gamma > 1, c0*m0 > 2, floor(A0*p) >= 1.
  void validate() const;
};

// Constants implied by the parameters.
struct DerivedBounds {
  double n_max;            // m0*(A1-A0)^2/(2*A1), ceiling on every population value
  double c0;               // seasonal survival mass, (1-rho-eps)*(1-((1+rho+eps)+2*A0)/(2*A1))
  double permanence_floor; // (c0*m0/2)*n_max^(1-gamma), eventual lower bound
  double lipschitz_bound;  // (A1-A0)*max(m0, m0*(gamma-1)) for one map step
};

DerivedBounds bounds(const ModelParams& params);

// True when every entry is finite and strictly positive (the cone H).
bool in_positive_cone(const StateVector& state);

}  // namespace yb
