#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ybpop/ensemble.hpp"
#include "ybpop/model.hpp"

namespace yb {

// A near pair of attractor points from two distinct files (file_j < file_i);
// neither side is ever a raw initial (label 0) record.
struct MatchRecord {
  std::uint32_t file_j = 0;
  std::uint64_t iter_j = 0;
  StateVector state_j;
  std::uint32_t file_i = 0;
  std::uint64_t iter_i = 0;
  StateVector state_i;
};

// True iff |a_k - b_k| < d for every tracked coordinate k in 0..2p-1.
// The boundary is exclusive (a difference of exactly d fails) and the last
// coordinate is ignored, both matching the collection program's scan.
bool within(const StateVector& a, const StateVector& b, double d);

// All post-burn snapshot pairs across ordered file pairs (j < i) with
// within(.., d), in the canonical order: file_j asc, snapshot of j asc,
// file_i asc, snapshot of i asc. Deterministic.
std::vector<MatchRecord> collect_matches(std::span<const SnapshotFile> files,
                                         double d);

struct EscapeSample {
  std::uint32_t file_j = 0;
  std::uint64_t iter_j = 0;
  std::uint32_t file_i = 0;
  std::uint64_t iter_i = 0;
  long long b = 0;      // two-year steps until the pair separates beyond d
  bool capped = false;  // never separated within the cap; excluded from estimation
};

// Least b >= 1 with within(..) false after b joint advance_two steps.
// Returns cap with *capped set when the pair never separates.
long long escape_time(const PopulationMap& map, const MatchRecord& match,
                      double d, long long cap, bool* capped = nullptr);

// Consecutive-overlap pass over a stream in canonical order: a sample is
// dropped when it shares file_i with the previously retained sample and
// prev.iter_i + prev.b >= iter_i, or the same with the j side. Idempotent.
std::vector<EscapeSample> dedup(std::span<const EscapeSample> stream);

struct EntropyEstimate {
  double d = 0.0;
  long long sample_count = 0;  // M, retained non-capped samples
  double mean_escape = 0.0;    // b-bar
  double k_hat = 0.0;
  double sigma_k = 0.0;
  double tau_s = 1.0;
  long long capped_count = 0;
};

// Maximum-likelihood estimate K-hat = -(1/tau_s) ln|1 - 1/b-bar| with
// sigma_K = 1/(sqrt(M) * K-hat * sqrt(b-bar*(b-bar-1))).
// Throws std::domain_error when M = 0 or b-bar <= 1.
EntropyEstimate estimate_from_stats(double mean_escape, double sample_count,
                                    double tau_s, double d);
EntropyEstimate estimate(std::span<const EscapeSample> retained, double tau_s,
                         double d);

// Full pipeline for one d over pre-collected matches: filter by within(d),
// compute escape times lazily, dedup, estimate. Samples discarded by dedup
// never have their escape time computed. Returns a flagged estimate
// (sample_count 0, NaN values) instead of throwing when nothing survives.
EntropyEstimate estimate_for_distance(const PopulationMap& map,
                                      std::span<const MatchRecord> matches,
                                      double d, long long cap, double tau_s,
                                      long long* match_count = nullptr);

// The 32 sweep distances: k/2048 for k = 16..1 then k/65536 for k = 16..1.
std::vector<double> sweep_grid();

// One estimate per grid distance; matches are collected once at the largest
// d and re-filtered. Escape cap defaults to 10000 two-year steps.
std::vector<EntropyEstimate> sweep(const PopulationMap& map,
                                   std::span<const SnapshotFile> files,
                                   long long cap = 10000, double tau_s = 1.0);

// Binary match stream: per record u32 LE file_j, u64 LE iter_j, state_j,
// u32 LE file_i, u64 LE iter_i, state_i (values as binary64 LE).
void write_match_file(const std::filesystem::path& path,
                      std::span<const MatchRecord> matches, int dim);
std::vector<MatchRecord> read_match_file(const std::filesystem::path& path,
                                         int dim);

// CSV with header "entropy,sigma,d"; flagged rows carry nan.
void write_sweep_csv(const std::filesystem::path& path,
                     std::span<const EntropyEstimate> estimates);

}  // namespace yb
