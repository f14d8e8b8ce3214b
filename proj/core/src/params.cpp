#include "ybpop/params.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace yb {

int ModelParams::min_lag() const {
  return static_cast<int>(std::floor(maturation_age * steps_per_year));
}

int ModelParams::winter_steps() const {
  return static_cast<int>(winter_fraction * steps_per_year);  // trunc
}

double ModelParams::survival_denominator() const {
  const double lifespan = static_cast<double>(lifespan_steps());
  return survival_mode == SurvivalMode::kFullLifetime ? lifespan + 1.0
                                                      : lifespan;
}

void ModelParams::validate() const {
  auto fail = [](const std::string& msg) {
    throw std::invalid_argument("ModelParams: " + msg);
  };
  if (steps_per_year < 1) fail("steps_per_year must be positive");
  if (!(fecundity_cap > 0.0)) fail("fecundity_cap must be positive");
  if (max_age != 2.0) fail("max_age is fixed at 2 (the state spans 2p+1 steps)");
  if (!(maturation_age > 0.0) || !(2.0 * maturation_age < max_age))
    fail("need 0 < 2*A0 < A1");
  if (!(maturation_age + 1.0 < max_age)) fail("need A0 + 1 < A1");
  if (!(decay_exponent > 1.0)) fail("decay exponent gamma must exceed 1");
  if (!(winter_fraction >= 0.0) || !(winter_fraction < 1.0))
    fail("winter fraction rho must lie in [0, 1)");
  if (!(season_slack >= 0.0)) fail("season slack epsilon must be >= 0");
  if (!(1.0 - winter_fraction - season_slack > 0.0))
    fail("need 1 - rho - epsilon > 0 (some breeding season must remain)");
  if (min_lag() < 1) fail("floor(A0*p) must be at least 1");
  const DerivedBounds b = bounds(*this);
  if (!(b.c0 * fecundity_cap > 2.0))
    fail("permanence requires c0*m0 > 2 (got " +
         std::to_string(b.c0 * fecundity_cap) + ")");
}

DerivedBounds bounds(const ModelParams& params) {
  const double a0 = params.maturation_age;
  const double a1 = params.max_age;
  const double m0 = params.fecundity_cap;
  const double gamma = params.decay_exponent;
  const double rho_eps = params.winter_fraction + params.season_slack;

  DerivedBounds out;
  out.n_max = m0 * (a1 - a0) * (a1 - a0) / (2.0 * a1);
  out.c0 = (1.0 - rho_eps) * (1.0 - ((1.0 + rho_eps) + 2.0 * a0) / (2.0 * a1));
  out.permanence_floor =
      (out.c0 * m0 / 2.0) * std::pow(out.n_max, 1.0 - gamma);
  out.lipschitz_bound = (a1 - a0) * std::max(m0, m0 * (gamma - 1.0));
  return out;
}

bool in_positive_cone(const StateVector& state) {
  for (double v : state) {
    if (!std::isfinite(v) || !(v > 0.0)) return false;
  }
  return true;
}

}  // namespace yb
