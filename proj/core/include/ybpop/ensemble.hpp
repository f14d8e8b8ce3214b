#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ybpop/model.hpp"
#include "ybpop/rng.hpp"

namespace yb {

struct SnapshotRecord {
  std::uint64_t label = 0;  // iterate count under T
  StateVector state;
};

// One pseudo-random trajectory: the raw initial state (label 0) followed by
// post-burn-in snapshots spaced two years apart.
struct SnapshotFile {
  std::uint32_t file_id = 0;
  std::uint64_t master_seed = 0;
  std::vector<SnapshotRecord> records;
};

// Random initial state: coordinates 0..2p-1 are (500 + u)/55000 with u an
// independent uniform integer in [0, 200000); the last coordinate is
// recomputed through next_component.
StateVector random_initial(const PopulationMap& map, RngStream& rng);

// Burn in burn_pairs two-year steps, then record snapshot_count states two
// years apart: labels 0 (raw initial), 2B, 2B+2, ..., 2B+2*(Q-1).
SnapshotFile generate_file(const PopulationMap& map, std::uint32_t file_id,
                           std::uint64_t master_seed, long long burn_pairs,
                           long long snapshot_count);

// Adds independent uniform noise in [-magnitude, magnitude] to coordinates
// 0..2p-1 and recomputes the last coordinate. A coordinate driven to <= 0 is
// clamped to half its original value and *clamped is set (cannot happen for
// magnitudes <= 1e-8 at attractor scale).
StateVector perturb(const PopulationMap& map, const StateVector& state,
                    double magnitude, RngStream& rng, bool* clamped = nullptr);

// Least b >= 1 with sup_distance_tracked(T^2b a, T^2b b) > d0; cap+1 when the
// pair never separates within cap two-year steps.
long long divergence_time(const PopulationMap& map, const StateVector& a,
                          const StateVector& b, double d0, long long cap);

struct DispersionReport {
  double grand_mean = 0.0;     // <N>
  double abs_deviation = 0.0;  // delta_N, centered at the grand mean
  std::vector<double> per_file_means;
};

// Means over the tracked coordinates of every post-burn snapshot (record 0
// excluded). Throws std::invalid_argument on empty input.
DispersionReport dispersion(std::span<const SnapshotFile> files);

struct SensitivityReport {
  std::vector<long long> per_file_b;
  double mean_b = 0.0;
  double threshold_d0 = 0.0;
  double perturbation_magnitude = 0.0;
};

// For every file: perturb the first post-burn record (stream
// kPerturbStreamBase + file_id) and measure the divergence time.
SensitivityReport sensitivity(const PopulationMap& map,
                              std::span<const SnapshotFile> files,
                              double magnitude, double d0, long long cap,
                              std::uint64_t master_seed);

// Binary snapshot format: magic "YBV1", u32 LE p, u32 LE record count, then
// per record a u64 LE label followed by 2p+1 IEEE-754 binary64 LE values.
void write_snapshot_file(const std::filesystem::path& path,
                         const SnapshotFile& file, int steps_per_year);
SnapshotFile read_snapshot_file(const std::filesystem::path& path,
                                std::uint32_t file_id = 0);

// CSV mirror of the binary content: label, then 2p+1 values at 17
// significant digits per row.
void export_snapshot_csv(const std::filesystem::path& path,
                         const SnapshotFile& file);

}  // namespace yb
