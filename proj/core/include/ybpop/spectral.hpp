#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ybpop/model.hpp"

namespace yb {

struct FixedPointResult {
  StateVector point;
  double sup_residual = 0.0;  // ||T^2(point) - point||_sup
  double l1_residual = 0.0;
  int iterations_used = 0;
  bool converged = false;
};

// Plain forward iteration of T^2 until the sup change between successive
// iterates drops below tol (or max_iter is reached, flagged unconverged).
// The period-2 point is unstable (|mu| > 1), so this cannot converge to it;
// it is the tool for landing near the attractor. With tol = 0 it runs
// exactly max_iter steps.
FixedPointResult find_period2_point(const PopulationMap& map,
                                    const StateVector& seed, double tol,
                                    int max_iter);

// Damped Newton on T^2(x) - x = 0 using the analytic-chain Jacobian.
// Returns unconverged (no throw) when damping cannot reduce the residual or
// max_iter runs out; throws std::runtime_error naming the iteration when the
// linear system is effectively singular.
FixedPointResult newton_polish(const PopulationMap& map,
                               const StateVector& guess, double tol = 1e-12,
                               int max_iter = 25);

enum class JacobianScheme {
  kFiniteDifference,  // central differences of advance_two per coordinate
  kAnalyticChain,     // forward accumulation through the recursion
};

// Jacobian of advance_two at `point`. Under kFiniteDifference, *kink_warning
// is set when some coordinate lies within fd_step of the fecundity kink at 1.
Eigen::MatrixXd jacobian_two_year(const PopulationMap& map,
                                  const StateVector& point,
                                  JacobianScheme scheme, double fd_step = 1e-6,
                                  bool* kink_warning = nullptr);

struct SpectrumReport {
  double dominant = 0.0;             // signed, from power iteration
  double subdominant_modulus = 0.0;  // all_moduli[1]
  std::vector<double> all_moduli;    // descending
  double smallest_singular_value = 0.0;
  bool power_iteration_fallback = false;  // dominant taken from the dense solve
};

// Dominant eigenvalue via power iteration with Rayleigh-quotient sign
// recovery (all-ones start, 1e-10 stagnation tolerance, 10000-iterate cap),
// full modulus list via a dense eigensolve. Falls back to the dense dominant
// value, flagged, when power iteration stalls or disagrees beyond 1e-6.
SpectrumReport spectrum(const Eigen::MatrixXd& matrix);

// Fixed-point asset I/O: plain text, one coordinate per line, N_0..N_2p.
StateVector load_state_file(const std::string& path, int expected_dim);
void save_state_file(const std::string& path, const StateVector& state);

}  // namespace yb
