#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "ybpop/model.hpp"

namespace yb {

// Euclidean distance with the coordinate differences rescaled by their
// maximum before squaring (overflow/underflow guard only; the value is the
// plain Euclidean norm of a - b).
double scaled_distance(std::span<const double> a, std::span<const double> b);

// Angle in [0, pi] between u and v, with the same max-rescaling guard and the
// cosine clamped to [-1, 1]. A zero vector yields 0 with *zero_flag set.
double angle(std::span<const double> u, std::span<const double> v,
             bool* zero_flag = nullptr);

// The local unstable-manifold proxy [T^{2s}(p-hat), T^{2s+2}(p-hat)].
struct UnstableSegment {
  StateVector left;
  StateVector right;
  int s = 0;
  double length = 0.0;
};

// Builds the segment by repeated advance_two. Enforces the documented length
// bounds (1e-3 for s = 19, 1e-4 for s = 15; violations indicate a bad p-hat)
// and throws std::runtime_error on violation.
UnstableSegment unstable_segment(const PopulationMap& map,
                                 const StateVector& p_hat, int s);

struct ReturnCandidate {
  int m = 0;                 // lattice index of the minimizer
  int subdivisions = 10000;  // lattice resolution the index refers to
  long long j0 = 0;          // advance_two count of the closest approach
  double min_distance = 0.0;
};

struct ScanOptions {
  int subdivisions = 10000;
  long long max_pairs = 1024;  // two-year iterations per lattice point
  long long skip = 20;         // discard this many leading iterates
  long long reject_at = 700;   // candidates with j0 >= reject_at are dropped
};

struct ScanPoint {
  int m = 0;
  long long best_j = 0;
  double min_distance = 0.0;
  bool accepted = false;
};

struct ScanResult {
  ReturnCandidate best;
  std::vector<ScanPoint> table;  // one entry per lattice point
};

// For each lattice point y_m = left + (m/subdivisions)*(right-left) finds the
// iterate T^{2j}(y_m) closest to p-hat over j in (skip, max_pairs], lowest-j
// tie-break. Points whose minimum lands on the first allowed iterate
// (never-returning) or at j0 >= reject_at are dropped. Returns the global
// minimizer (lowest-m tie-break); throws std::runtime_error when every point
// is rejected.
ScanResult scan_returns(const PopulationMap& map, const UnstableSegment& segment,
                        const StateVector& p_hat, const ScanOptions& options);

struct RefineOptions {
  double gap_exponent = 10.80;  // gap = 2^exponent, exponent in (3, 20]
  double ratio_tol = 1.0001;    // straightness bound per accepted chunk
  double max_length = 1e-4;     // image-segment length bound per chunk
  double min_length = 1e-16;    // collapse guard after re-centering
  // Below this image length the quarter-arc comparison is coordinate
  // quantization noise in binary64 (the points differ by ~1e-12 on values of
  // order 1), so the straightness check is only enforced above it.
  double straightness_floor = 1e-8;
  std::array<int, 3> chunk_plan{10, 8, 2};
};

struct RefinementState {
  StateVector left, left_quarter, mid, right_quarter, right;
  long long iterations_done = 0;
  long long budget_remaining = 0;
};

enum class Verdict { kCrossingEvidence, kSameSide, kInconclusive };

struct AngleDiagnostics {
  double far_from_tangency_angle = 0.0;  // final [L,R] vs the unstable segment
  std::vector<double> per_iterate_angles;  // j = 0..7, between [p,T^2j(L)], [p,T^2j(R)]
  Verdict verdict = Verdict::kInconclusive;
};

// Per accepted chunk instrumentation (length and straightness checks).
struct ChunkLogEntry {
  long long iterations_done = 0;
  int chunk = 0;
  double length_before = 0.0;
  double length_after = 0.0;
  double quarter_arc_sum = 0.0;
  bool terminal = false;              // the unchecked measurement chunk
  bool straightness_enforced = false; // false below straightness_floor
};

// Marches the bracket around y_m toward T^{2*j0}(y_m): advance_two in chunks
// of 10 (8, then 2 on a failed length/straightness check), re-centering
// L/R/quarters around the new midpoint with the imaged direction divided by
// the gap after every accepted chunk. The final partial chunk (at most 10
// steps) is the measurement: it is applied without checks or re-centering,
// so its image may legitimately grow past max_length — that growth is what
// the angle diagnostics read. Throws when the re-centered segment collapses
// below min_length ("gap too small") or the checks still fail at the
// smallest chunk size.
std::pair<RefinementState, AngleDiagnostics> refine(
    const PopulationMap& map, const UnstableSegment& segment,
    const ReturnCandidate& candidate, const StateVector& p_hat,
    const RefineOptions& options, std::vector<ChunkLogEntry>* chunk_log = nullptr);

// Verdict from the eight diagnostic angles: CROSSING_EVIDENCE when the
// sequence exceeds 3.0 rad by j <= 3 and stays >= 3.0 through j = 7;
// SAME_SIDE when it decays monotonically below 1e-2 by j = 3.
Verdict classify_angles(std::span<const double> angles);

// scaled_distance(T^2 L, T^2 R) / scaled_distance(L, R).
double expansion_rate(const PopulationMap& map, const StateVector& left,
                      const StateVector& right);

}  // namespace yb
