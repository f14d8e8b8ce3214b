#include "ybpop/entropy.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace yb {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint32_t take_u32(const unsigned char*& p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  p += 4;
  return v;
}
std::uint64_t take_u64(const unsigned char*& p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  p += 8;
  return v;
}

// Overlap rule of the consecutive-dedup pass. The iterate labels count
// one-year steps while b counts two-year steps; the asymmetry is inherited
// from the collection programs and kept as-is.
bool shadows(const EscapeSample& prev, std::uint32_t file_j, std::uint64_t iter_j,
             std::uint32_t file_i, std::uint64_t iter_i) {
  const std::uint64_t b = static_cast<std::uint64_t>(prev.b);
  if (prev.file_i == file_i && prev.iter_i + b >= iter_i) return true;
  if (prev.file_j == file_j && prev.iter_j + b >= iter_j) return true;
  return false;
}

}  // namespace

bool within(const StateVector& a, const StateVector& b, double d) {
  if (a.size() != b.size())
    throw std::invalid_argument("within: length mismatch");
  const std::size_t tracked = a.size() - 1;
  for (std::size_t k = 0; k < tracked; ++k) {
    if (std::abs(a[k] - b[k]) >= d) return false;
  }
  return true;
}

std::vector<MatchRecord> collect_matches(std::span<const SnapshotFile> files,
                                         double d) {
  if (!(d > 0.0)) throw std::invalid_argument("collect_matches: d must be > 0");
  std::vector<MatchRecord> out;
  for (std::size_t j = 0; j < files.size(); ++j) {
    const SnapshotFile& fj = files[j];
    for (std::size_t rj = 1; rj < fj.records.size(); ++rj) {
      const SnapshotRecord& a = fj.records[rj];
      for (std::size_t i = j + 1; i < files.size(); ++i) {
        const SnapshotFile& fi = files[i];
        for (std::size_t ri = 1; ri < fi.records.size(); ++ri) {
          const SnapshotRecord& b = fi.records[ri];
          if (!within(a.state, b.state, d)) continue;
          MatchRecord match;
          match.file_j = fj.file_id;
          match.iter_j = a.label;
          match.state_j = a.state;
          match.file_i = fi.file_id;
          match.iter_i = b.label;
          match.state_i = b.state;
          out.push_back(std::move(match));
        }
      }
    }
  }
  return out;
}

long long escape_time(const PopulationMap& map, const MatchRecord& match,
                      double d, long long cap, bool* capped) {
  if (capped) *capped = false;
  TwoYearWalker wj(map, match.state_j);
  TwoYearWalker wi(map, match.state_i);
  for (long long b = 1; b <= cap; ++b) {
    wj.step_pair();
    wi.step_pair();
    // within() over the tracked coordinates, inlined on spans.
    const std::span<const double> sj = wj.state();
    const std::span<const double> si = wi.state();
    bool still_within = true;
    for (std::size_t k = 0; k + 1 < sj.size(); ++k) {
      if (std::abs(sj[k] - si[k]) >= d) {
        still_within = false;
        break;
      }
    }
    if (!still_within) return b;
  }
  if (capped) *capped = true;
  return cap;
}

std::vector<EscapeSample> dedup(std::span<const EscapeSample> stream) {
  std::vector<EscapeSample> retained;
  retained.reserve(stream.size());
  for (const EscapeSample& sample : stream) {
    if (!retained.empty() &&
        shadows(retained.back(), sample.file_j, sample.iter_j, sample.file_i,
                sample.iter_i)) {
      continue;
    }
    retained.push_back(sample);
  }
  return retained;
}

EntropyEstimate estimate_from_stats(double mean_escape, double sample_count,
                                    double tau_s, double d) {
  if (!(sample_count >= 1.0))
    throw std::domain_error("estimate: no retained samples");
  if (!(mean_escape > 1.0))
    throw std::domain_error("estimate: mean escape time must exceed 1");
  EntropyEstimate out;
  out.d = d;
  out.tau_s = tau_s;
  out.sample_count = static_cast<long long>(std::llround(sample_count));
  out.mean_escape = mean_escape;
  out.k_hat = -std::log(std::abs(1.0 - 1.0 / mean_escape)) / tau_s;
  out.sigma_k = 1.0 / (std::sqrt(sample_count) * out.k_hat *
                       std::sqrt(mean_escape * (mean_escape - 1.0)));
  return out;
}

EntropyEstimate estimate(std::span<const EscapeSample> retained, double tau_s,
                         double d) {
  double sum = 0.0;
  long long used = 0;
  long long capped = 0;
  for (const EscapeSample& s : retained) {
    if (s.capped) {
      ++capped;
      continue;
    }
    sum += static_cast<double>(s.b);
    ++used;
  }
  if (used == 0) throw std::domain_error("estimate: no retained samples");
  EntropyEstimate out = estimate_from_stats(
      sum / static_cast<double>(used), static_cast<double>(used), tau_s, d);
  out.capped_count = capped;
  return out;
}

EntropyEstimate estimate_for_distance(const PopulationMap& map,
                                      std::span<const MatchRecord> matches,
                                      double d, long long cap, double tau_s,
                                      long long* match_count) {
  long long seen = 0;
  std::vector<EscapeSample> retained;
  for (const MatchRecord& match : matches) {
    if (!within(match.state_j, match.state_i, d)) continue;
    ++seen;
    if (!retained.empty() &&
        shadows(retained.back(), match.file_j, match.iter_j, match.file_i,
                match.iter_i)) {
      continue;  // escape time never computed for shadowed samples
    }
    EscapeSample sample;
    sample.file_j = match.file_j;
    sample.iter_j = match.iter_j;
    sample.file_i = match.file_i;
    sample.iter_i = match.iter_i;
    sample.b = escape_time(map, match, d, cap, &sample.capped);
    retained.push_back(sample);
  }
  if (match_count) *match_count = seen;

  double sum = 0.0;
  long long used = 0;
  long long capped = 0;
  for (const EscapeSample& s : retained) {
    if (s.capped) {
      ++capped;
    } else {
      sum += static_cast<double>(s.b);
      ++used;
    }
  }
  EntropyEstimate out;
  out.d = d;
  out.tau_s = tau_s;
  out.capped_count = capped;
  if (used == 0 || !(sum / static_cast<double>(used) > 1.0)) {
    // Flagged row: nothing usable at this distance.
    out.sample_count = used;
    out.mean_escape = used ? sum / static_cast<double>(used) : 0.0;
    out.k_hat = std::numeric_limits<double>::quiet_NaN();
    out.sigma_k = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const double mean = sum / static_cast<double>(used);
  EntropyEstimate est =
      estimate_from_stats(mean, static_cast<double>(used), tau_s, d);
  est.capped_count = capped;
  return est;
}

std::vector<double> sweep_grid() {
  std::vector<double> grid;
  grid.reserve(32);
  for (int k = 16; k >= 1; --k) grid.push_back(static_cast<double>(k) / 2048.0);
  for (int k = 16; k >= 1; --k) grid.push_back(static_cast<double>(k) / 65536.0);
  return grid;
}

std::vector<EntropyEstimate> sweep(const PopulationMap& map,
                                   std::span<const SnapshotFile> files,
                                   long long cap, double tau_s) {
  const std::vector<double> grid = sweep_grid();
  // One pair scan at the widest distance; every narrower distance filters the
  // same stream (within(d) implies within(d_max)), preserving canonical order.
  const std::vector<MatchRecord> matches = collect_matches(files, grid.front());
  std::vector<EntropyEstimate> out;
  out.reserve(grid.size());
  for (double d : grid) {
    out.push_back(estimate_for_distance(map, matches, d, cap, tau_s));
  }
  return out;
}

void write_match_file(const std::filesystem::path& path,
                      std::span<const MatchRecord> matches, int dim) {
  std::string blob;
  blob.reserve(matches.size() * (2 * (12 + static_cast<std::size_t>(dim) * 8)));
  for (const MatchRecord& m : matches) {
    if (static_cast<int>(m.state_j.size()) != dim ||
        static_cast<int>(m.state_i.size()) != dim)
      throw std::invalid_argument("write_match_file: state dimension mismatch");
    put_u32(blob, m.file_j);
    put_u64(blob, m.iter_j);
    for (double v : m.state_j) put_u64(blob, std::bit_cast<std::uint64_t>(v));
    put_u32(blob, m.file_i);
    put_u64(blob, m.iter_i);
    for (double v : m.state_i) put_u64(blob, std::bit_cast<std::uint64_t>(v));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<MatchRecord> read_match_file(const std::filesystem::path& path,
                                         int dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  const std::size_t record_size = 2 * (12 + static_cast<std::size_t>(dim) * 8);
  if (blob.size() % record_size != 0)
    throw std::runtime_error("truncated match file: " + path.string());
  const std::size_t count = blob.size() / record_size;
  std::vector<MatchRecord> out(count);
  const unsigned char* p = reinterpret_cast<const unsigned char*>(blob.data());
  for (std::size_t r = 0; r < count; ++r) {
    MatchRecord& m = out[r];
    m.file_j = take_u32(p);
    m.iter_j = take_u64(p);
    m.state_j.resize(static_cast<std::size_t>(dim));
    for (double& v : m.state_j) v = std::bit_cast<double>(take_u64(p));
    m.file_i = take_u32(p);
    m.iter_i = take_u64(p);
    m.state_i.resize(static_cast<std::size_t>(dim));
    for (double& v : m.state_i) v = std::bit_cast<double>(take_u64(p));
  }
  return out;
}

void write_sweep_csv(const std::filesystem::path& path,
                     std::span<const EntropyEstimate> estimates) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "entropy,sigma,d\n";
  char buffer[128];
  for (const EntropyEstimate& e : estimates) {
    std::snprintf(buffer, sizeof(buffer), "%.17g,%.17g,%.17g\n", e.k_hat,
                  e.sigma_k, e.d);
    out << buffer;
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace yb
