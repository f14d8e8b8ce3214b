#include "ybpop/homoclinic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace yb {

namespace {

StateVector subtract(std::span<const double> a, std::span<const double> b) {
  StateVector out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] - b[k];
  return out;
}

StateVector lattice_point(const UnstableSegment& segment, double fraction) {
  StateVector out(segment.left.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = segment.left[k] + fraction * (segment.right[k] - segment.left[k]);
  }
  return out;
}

}  // namespace

double scaled_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("scaled_distance: length mismatch");
  double largest = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    largest = std::max(largest, std::abs(a[k] - b[k]));
  if (largest == 0.0) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double r = std::abs(a[k] - b[k]) / largest;
    sum += r * r;
  }
  return largest * std::sqrt(sum);
}

double angle(std::span<const double> u, std::span<const double> v,
             bool* zero_flag) {
  if (u.size() != v.size()) throw std::invalid_argument("angle: length mismatch");
  if (zero_flag) *zero_flag = false;
  double mu = 0.0, mv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    mu = std::max(mu, std::abs(u[k]));
    mv = std::max(mv, std::abs(v[k]));
  }
  if (mu == 0.0 || mv == 0.0) {
    if (zero_flag) *zero_flag = true;
    return 0.0;
  }
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double a = u[k] / mu;
    const double b = v[k] / mv;
    uv += a * b;
    uu += a * a;
    vv += b * b;
  }
  const double cosine =
      std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
  return std::acos(cosine);
}

UnstableSegment unstable_segment(const PopulationMap& map,
                                 const StateVector& p_hat, int s) {
  if (s < 0) throw std::invalid_argument("unstable_segment: s must be >= 0");
  UnstableSegment segment;
  segment.s = s;
  StateVector point = p_hat;
  map.iterate_pairs(point, s);
  segment.left = point;
  map.iterate_pairs(point, 1);
  segment.right = std::move(point);
  segment.length = scaled_distance(segment.left, segment.right);
  // Documented bounds for the two reference choices; a violation means the
  // fixed point fed in is not polished enough for its images to stay local.
  const double bound = s == 19 ? 1e-3 : (s == 15 ? 1e-4 : 0.0);
  if (bound > 0.0 && !(segment.length < bound)) {
    throw std::runtime_error("unstable_segment: length " +
                             std::to_string(segment.length) + " exceeds " +
                             std::to_string(bound) + " for s=" +
                             std::to_string(s) + "; refine the fixed point");
  }
  return segment;
}

ScanResult scan_returns(const PopulationMap& map, const UnstableSegment& segment,
                        const StateVector& p_hat, const ScanOptions& options) {
  if (options.subdivisions < 1)
    throw std::invalid_argument("scan_returns: subdivisions must be >= 1");
  if (options.max_pairs <= options.skip + 1)
    throw std::invalid_argument("scan_returns: max_pairs must exceed skip+1");

  ScanResult result;
  result.table.reserve(static_cast<std::size_t>(options.subdivisions) + 1);

  TwoYearWalker walker(map, segment.left);
  bool have_best = false;

  for (int m = 0; m <= options.subdivisions; ++m) {
    const double fraction =
        static_cast<double>(m) / static_cast<double>(options.subdivisions);
    walker.reset(lattice_point(segment, fraction));

    ScanPoint point;
    point.m = m;
    point.min_distance = std::numeric_limits<double>::infinity();
    for (long long j = 1; j <= options.max_pairs; ++j) {
      walker.step_pair();
      if (j <= options.skip) continue;
      const double dist = scaled_distance(walker.state(), p_hat);
      if (dist < point.min_distance) {
        point.min_distance = dist;
        point.best_j = j;
      }
    }
    // A minimum on the first allowed iterate means the orbit never left the
    // neighbourhood (it is not "returning"); late minima fail the guard too.
    point.accepted =
        point.best_j != options.skip + 1 && point.best_j < options.reject_at;
    if (point.accepted &&
        (!have_best || point.min_distance < result.best.min_distance)) {
      have_best = true;
      result.best.m = m;
      result.best.subdivisions = options.subdivisions;
      result.best.j0 = point.best_j;
      result.best.min_distance = point.min_distance;
    }
    result.table.push_back(point);
  }
  if (!have_best) {
    throw std::runtime_error(
        "scan_returns: every lattice point was rejected (inconclusive)");
  }
  return result;
}

Verdict classify_angles(std::span<const double> angles) {
  if (angles.size() < 8)
    throw std::invalid_argument("classify_angles: need 8 diagnostic angles");
  int first_high = -1;
  for (int j = 0; j <= 3; ++j) {
    if (angles[static_cast<std::size_t>(j)] > 3.0) {
      first_high = j;
      break;
    }
  }
  if (first_high >= 0) {
    bool stays = true;
    for (int j = first_high; j <= 7; ++j) {
      if (!(angles[static_cast<std::size_t>(j)] >= 3.0)) stays = false;
    }
    if (stays) return Verdict::kCrossingEvidence;
  }
  bool decays = angles[3] < 1e-2;
  for (int j = 1; j <= 3 && decays; ++j) {
    if (!(angles[static_cast<std::size_t>(j)] <=
          angles[static_cast<std::size_t>(j - 1)]))
      decays = false;
  }
  if (decays) return Verdict::kSameSide;
  return Verdict::kInconclusive;
}

std::pair<RefinementState, AngleDiagnostics> refine(
    const PopulationMap& map, const UnstableSegment& segment,
    const ReturnCandidate& candidate, const StateVector& p_hat,
    const RefineOptions& options, std::vector<ChunkLogEntry>* chunk_log) {
  if (!(options.gap_exponent > 3.0) || !(options.gap_exponent <= 20.0))
    throw std::invalid_argument("refine: gap exponent must lie in (3, 20]");
  if (candidate.j0 < 1) throw std::invalid_argument("refine: j0 must be >= 1");

  const double gap = std::exp2(options.gap_exponent);
  const std::size_t dim = segment.left.size();

  // Bracket around y_m along the lattice direction, gap-scaled.
  StateVector direction(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    direction[k] = (segment.right[k] - segment.left[k]) /
                   static_cast<double>(candidate.subdivisions);
  }
  StateVector mid = lattice_point(
      segment, static_cast<double>(candidate.m) /
                   static_cast<double>(candidate.subdivisions));

  auto place = [&](StateVector& centre, const StateVector& dir) {
    StateVector l(dim), lq(dim), rq(dim), r(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      const double full = dir[k] / gap;
      const double half = dir[k] / (2.0 * gap);
      l[k] = centre[k] - full;
      r[k] = centre[k] + full;
      lq[k] = centre[k] - half;
      rq[k] = centre[k] + half;
    }
    return std::array<StateVector, 4>{std::move(l), std::move(lq),
                                      std::move(rq), std::move(r)};
  };

  auto bracket = place(mid, direction);
  StateVector left = std::move(bracket[0]);
  StateVector left_q = std::move(bracket[1]);
  StateVector right_q = std::move(bracket[2]);
  StateVector right = std::move(bracket[3]);

  long long done = 0;
  const long long budget = candidate.j0;

  while (done < budget) {
    const long long remaining = budget - done;
    const double length_before = scaled_distance(left, right);

    if (remaining <= 10) {
      // Terminal measurement chunk: applied without checks or re-centering.
      // Its image may grow past max_length; that growth is the signal the
      // angle diagnostics read off.
      const int chunk = static_cast<int>(remaining);
      map.iterate_pairs(left, chunk);
      map.iterate_pairs(left_q, chunk);
      map.iterate_pairs(mid, chunk);
      map.iterate_pairs(right_q, chunk);
      map.iterate_pairs(right, chunk);
      done += chunk;
      if (chunk_log) {
        const double length_after = scaled_distance(left, right);
        const double arc_sum =
            scaled_distance(left, left_q) + scaled_distance(left_q, mid) +
            scaled_distance(mid, right_q) + scaled_distance(right_q, right);
        chunk_log->push_back({done, chunk, length_before, length_after,
                              arc_sum, /*terminal=*/true,
                              /*straightness_enforced=*/false});
      }
      break;
    }

    bool accepted = false;
    bool straightness_enforced = false;
    int used_chunk = 0;
    StateVector img_l, img_lq, img_m, img_rq, img_r;
    double length_after = 0.0, arc_sum = 0.0;

    for (int chunk : options.chunk_plan) {
      img_l = left;
      img_lq = left_q;
      img_m = mid;
      img_rq = right_q;
      img_r = right;
      map.iterate_pairs(img_l, chunk);
      map.iterate_pairs(img_lq, chunk);
      map.iterate_pairs(img_m, chunk);
      map.iterate_pairs(img_rq, chunk);
      map.iterate_pairs(img_r, chunk);

      length_after = scaled_distance(img_l, img_r);
      arc_sum = scaled_distance(img_l, img_lq) + scaled_distance(img_lq, img_m) +
                scaled_distance(img_m, img_rq) + scaled_distance(img_rq, img_r);
      straightness_enforced = length_after >= options.straightness_floor;
      if (length_after <= options.max_length &&
          (!straightness_enforced ||
           arc_sum <= options.ratio_tol * length_after)) {
        accepted = true;
        used_chunk = chunk;
        break;
      }
    }
    if (!accepted) {
      throw std::runtime_error(
          "refine: image segment stays too long or too bent at the smallest "
          "chunk size (after " +
          std::to_string(done) + " iterations)");
    }

    done += used_chunk;
    if (chunk_log) {
      chunk_log->push_back({done, used_chunk, length_before, length_after,
                            arc_sum, /*terminal=*/false, straightness_enforced});
    }

    // Re-center the bracket around the imaged midpoint; the new gap offset
    // is the full imaged span divided by the gap.
    StateVector new_direction = subtract(img_r, img_l);
    mid = std::move(img_m);
    auto re = place(mid, new_direction);
    left = std::move(re[0]);
    left_q = std::move(re[1]);
    right_q = std::move(re[2]);
    right = std::move(re[3]);
    if (scaled_distance(left, right) <= options.min_length) {
      throw std::runtime_error(
          "refine: bracket collapsed below the length floor; the gap is too "
          "small, reduce the exponent");
    }
  }

  RefinementState state;
  state.left = left;
  state.left_quarter = left_q;
  state.mid = mid;
  state.right_quarter = right_q;
  state.right = right;
  state.iterations_done = done;
  state.budget_remaining = budget - done;

  AngleDiagnostics diag;
  {
    const StateVector final_dir = subtract(right, left);
    const StateVector segment_dir = subtract(segment.right, segment.left);
    diag.far_from_tangency_angle = angle(final_dir, segment_dir);
  }
  diag.per_iterate_angles.reserve(8);
  StateVector l_iter = left;
  StateVector r_iter = right;
  for (int j = 0; j < 8; ++j) {
    if (j > 0) {
      map.iterate_pairs(l_iter, 1);
      map.iterate_pairs(r_iter, 1);
    }
    diag.per_iterate_angles.push_back(
        angle(subtract(l_iter, p_hat), subtract(r_iter, p_hat)));
  }
  diag.verdict = classify_angles(diag.per_iterate_angles);
  return {std::move(state), diag};
}

double expansion_rate(const PopulationMap& map, const StateVector& left,
                      const StateVector& right) {
  const double base = scaled_distance(left, right);
  if (base == 0.0)
    throw std::invalid_argument("expansion_rate: the two points coincide");
  return scaled_distance(map.advance_two(left), map.advance_two(right)) / base;
}

}  // namespace yb
