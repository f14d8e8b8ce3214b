#include <cmath>
#include <random>

#include "doctest.h"
#include "ybpop/homoclinic.hpp"
#include "ybpop/spectral.hpp"

using namespace yb;

namespace {

const PopulationMap& default_map() {
  static PopulationMap map{ModelParams{}};
  return map;
}

const StateVector& p_hat() {
  // Polish to the round-off floor (the tolerance is below what binary64 can
  // reach, so the loop stops at the best achievable residual, ~3e-15). The
  // s=19 segment length is residual * |mu|^19 and needs that floor.
  static StateVector point =
      newton_polish(default_map(),
                    load_state_file(YBPOP_DATA_DIR "/fixed_point_p100.txt", 201),
                    1e-15, 25)
          .point;
  return point;
}

}  // namespace

TEST_CASE("scaled_distance") {
  StateVector a(201, 1.0), b(201, 1.0);
  CHECK(scaled_distance(a, b) == 0.0);
  b[13] = 2.0;
  CHECK(scaled_distance(a, b) == 1.0);

  SUBCASE("exact homogeneity under powers of two") {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> uni(-3.0, 3.0);
    StateVector u(201), v(201);
    for (double& x : u) x = uni(gen);
    for (double& x : v) x = uni(gen);
    const double base = scaled_distance(u, v);
    for (double c : {1024.0, 0x1.0p-40}) {
      StateVector cu = u, cv = v;
      for (double& x : cu) x *= c;
      for (double& x : cv) x *= c;
      CHECK(scaled_distance(cu, cv) == c * base);
    }
  }
  SUBCASE("rescaling guard survives extreme magnitudes") {
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> uni(0.1, 2.0);
    StateVector u(201), v(201);
    for (double& x : u) x = uni(gen);
    for (double& x : v) x = uni(gen);
    const double base = scaled_distance(u, v);
    for (double c : {1e100, 1e-100}) {
      StateVector cu = u, cv = v;
      for (double& x : cu) x *= c;
      for (double& x : cv) x *= c;
      CHECK(scaled_distance(cu, cv) / c == doctest::Approx(base).epsilon(1e-12));
    }
  }
}

TEST_CASE("angle") {
  StateVector u(201, 0.0), v(201, 0.0);
  u[0] = 1.0;
  CHECK(angle(u, u) == 0.0);
  v[0] = -1.0;
  CHECK(angle(u, v) == doctest::Approx(3.14159265358979312).epsilon(1e-14));
  v[0] = 0.0;
  v[1] = 2.0;
  CHECK(angle(u, v) == doctest::Approx(3.14159265358979312 / 2).epsilon(1e-14));

  bool zero = false;
  StateVector z(201, 0.0);
  CHECK(angle(u, z, &zero) == 0.0);
  CHECK(zero);

  SUBCASE("rescaling guard") {
    std::mt19937_64 gen(10);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    StateVector a(201), b(201);
    for (double& x : a) x = uni(gen);
    for (double& x : b) x = uni(gen);
    const double base = angle(a, b);
    StateVector big = a, small = b;
    for (double& x : big) x *= 1e100;
    for (double& x : small) x *= 1e-100;
    CHECK(angle(big, small) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("unstable segment lengths") {
  const PopulationMap& map = default_map();
  const UnstableSegment s19 = unstable_segment(map, p_hat(), 19);
  CHECK(s19.length < 1e-3);
  CHECK(s19.length > 1e-6);

  const UnstableSegment s15 = unstable_segment(map, p_hat(), 15);
  CHECK(s15.length < 1e-4);
  CHECK(s15.length > 0.0);

  const UnstableSegment s0 = unstable_segment(map, p_hat(), 0);
  CHECK(s0.length < 1e-11);  // residual scale
  CHECK(s0.length > 0.0);

  SUBCASE("a bad fixed point is rejected") {
    StateVector fake(201, 2.0);
    CHECK_THROWS_AS(unstable_segment(map, fake, 19), std::runtime_error);
  }
}

TEST_CASE("classify_angles is a pure function of the sequence") {
  const std::vector<double> crossing{1.337, 3.011, 3.139, 3.140,
                                     3.140, 3.139, 3.137, 3.125};
  CHECK(classify_angles(crossing) == Verdict::kCrossingEvidence);

  const std::vector<double> same_side{1.358e-3, 2.922e-5, 4.582e-6, 9.1e-7,
                                      5.0e-7,   8.0e-7,   2.0e-6,   9.0e-6};
  CHECK(classify_angles(same_side) == Verdict::kSameSide);

  const std::vector<double> dips{1.337, 3.011, 3.139, 3.140,
                                 2.900, 3.139, 3.137, 3.125};
  CHECK(classify_angles(dips) == Verdict::kInconclusive);

  const std::vector<double> late_rise{0.4, 0.9, 1.4, 2.0, 3.1, 3.1, 3.1, 3.1};
  CHECK(classify_angles(late_rise) == Verdict::kInconclusive);

  const std::vector<double> non_monotone_decay{1e-3, 2e-3, 1e-4, 1e-5,
                                               1e-5, 1e-5, 1e-5, 1e-5};
  CHECK(classify_angles(non_monotone_decay) == Verdict::kInconclusive);

  CHECK_THROWS_AS(classify_angles(std::vector<double>{1.0, 2.0}),
                  std::invalid_argument);
}

TEST_CASE("expansion rate brackets the dominant eigenvalue") {
  const PopulationMap& map = default_map();
  // [T^16(p), T^18(p)]: a pair separated along the unstable direction, close
  // enough to p-hat that the local rate is the eigenvalue.
  const UnstableSegment seg = unstable_segment(map, p_hat(), 8);
  const double rate = expansion_rate(map, seg.left, seg.right);
  CHECK(rate > 3.1);
  CHECK(rate < 3.5);

  SUBCASE("rate is stable under shrinking the pair gap") {
    StateVector mid(201), inner(201);
    for (int k = 0; k < 201; ++k) {
      const double l = seg.left[static_cast<std::size_t>(k)];
      const double r = seg.right[static_cast<std::size_t>(k)];
      mid[static_cast<std::size_t>(k)] = l + 0.5 * (r - l);
      inner[static_cast<std::size_t>(k)] = l + 0.55 * (r - l);
    }
    const double small_rate = expansion_rate(map, mid, inner);
    CHECK(std::abs(small_rate - rate) / rate < 0.01);
  }
  SUBCASE("a stable-direction pair contracts") {
    const Eigen::MatrixXd jac =
        jacobian_two_year(map, p_hat(), JacobianScheme::kAnalyticChain);
    Eigen::EigenSolver<Eigen::MatrixXd> solver(jac, true);
    int best = -1;
    double best_mod = -1.0;
    for (int k = 0; k < 201; ++k) {
      const double mod = std::abs(solver.eigenvalues()(k));
      if (mod < 1.0 && mod > best_mod) {
        best_mod = mod;
        best = k;
      }
    }
    REQUIRE(best >= 0);
    Eigen::VectorXd direction = solver.eigenvectors().col(best).real();
    if (direction.norm() < 1e-12)
      direction = solver.eigenvectors().col(best).imag();
    direction.normalize();
    StateVector a = p_hat(), b = p_hat();
    for (int k = 0; k < 201; ++k) {
      a[static_cast<std::size_t>(k)] += 1e-8 * direction(k);
      b[static_cast<std::size_t>(k)] -= 1e-8 * direction(k);
    }
    CHECK(expansion_rate(map, a, b) < 1.0);
  }
  SUBCASE("coincident points are rejected") {
    CHECK_THROWS_AS(expansion_rate(map, seg.left, seg.left),
                    std::invalid_argument);
  }
}

TEST_CASE("scan_returns") {
  const PopulationMap& map = default_map();
  const UnstableSegment segment = unstable_segment(map, p_hat(), 19);

  SUBCASE("degenerate segment is inconclusive") {
    UnstableSegment degenerate = segment;
    degenerate.right = degenerate.left = p_hat();
    ScanOptions opt;
    opt.subdivisions = 4;
    opt.max_pairs = 64;
    CHECK_THROWS_AS(scan_returns(map, degenerate, p_hat(), opt),
                    std::runtime_error);
  }

  SUBCASE("doubling the lattice never increases the minimum") {
    ScanOptions coarse;
    coarse.subdivisions = 120;
    coarse.max_pairs = 200;
    coarse.reject_at = 700;
    const ScanResult low = scan_returns(map, segment, p_hat(), coarse);

    ScanOptions fine = coarse;
    fine.subdivisions = 240;
    const ScanResult high = scan_returns(map, segment, p_hat(), fine);

    CHECK(high.best.min_distance <= low.best.min_distance);
    CHECK(low.best.j0 > coarse.skip + 1);
    CHECK(low.best.j0 < coarse.reject_at);
    CHECK(low.table.size() == 121);
    CHECK(high.table.size() == 241);

    SUBCASE("determinism") {
      const ScanResult again = scan_returns(map, segment, p_hat(), coarse);
      CHECK(again.best.m == low.best.m);
      CHECK(again.best.j0 == low.best.j0);
      CHECK(again.best.min_distance == low.best.min_distance);
    }
  }
}

TEST_CASE("refine marches within the documented guards") {
  const PopulationMap& map = default_map();
  const UnstableSegment segment = unstable_segment(map, p_hat(), 19);

  ReturnCandidate candidate;
  candidate.m = 5102;
  candidate.subdivisions = 10000;
  candidate.j0 = 40;  // short march: guard coverage, not evidence

  RefineOptions opt;
  opt.gap_exponent = 10.80;
  std::vector<ChunkLogEntry> log;
  const auto [state, diag] = refine(map, segment, candidate, p_hat(), opt, &log);

  CHECK(state.iterations_done == 40);
  CHECK(state.budget_remaining == 0);
  REQUIRE(!log.empty());
  long long total = 0;
  for (const ChunkLogEntry& entry : log) {
    total += entry.chunk;
    CHECK(entry.length_after <= opt.max_length);
    CHECK(entry.quarter_arc_sum <= opt.ratio_tol * entry.length_after);
  }
  CHECK(total == 40);
  REQUIRE(diag.per_iterate_angles.size() == 8);
  for (double a : diag.per_iterate_angles) {
    CHECK(a >= 0.0);
    CHECK(a <= 3.14159265358979312 + 1e-12);
  }

  SUBCASE("exponent domain is enforced") {
    RefineOptions bad = opt;
    bad.gap_exponent = 25.0;
    CHECK_THROWS_AS(refine(map, segment, candidate, p_hat(), bad),
                    std::invalid_argument);
    bad.gap_exponent = 2.0;
    CHECK_THROWS_AS(refine(map, segment, candidate, p_hat(), bad),
                    std::invalid_argument);
  }
  SUBCASE("collapse guard reports a too-small gap") {
    RefineOptions collapse = opt;
    collapse.min_length = 1e-3;  // force the guard on the first re-centering
    CHECK_THROWS_WITH_AS(refine(map, segment, candidate, p_hat(), collapse),
                         doctest::Contains("gap is too small"),
                         std::runtime_error);
  }
}
