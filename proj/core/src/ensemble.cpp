#include "ybpop/ensemble.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace yb {

namespace {

constexpr char kMagic[4] = {'Y', 'B', 'V', '1'};
constexpr double kCountScale = 55000.0;  // N = 1 means 55000 rodents
constexpr std::uint64_t kBaseCount = 500;  // at least 500 rodents alive
constexpr std::uint64_t kCountRange = 200000;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
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

double take_f64(const unsigned char*& p) {
  return std::bit_cast<double>(take_u64(p));
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return data;
}

// The padded window used whenever the last coordinate is recomputed from the
// first 2p: window[0] stands for N_{-1} and is never touched by the kernel.
double recompute_last(const PopulationMap& map, const double* first_2p) {
  const int dim = map.dim();
  std::vector<double> window(static_cast<std::size_t>(dim), 0.0);
  std::memcpy(window.data() + 1, first_2p,
              static_cast<std::size_t>(dim - 1) * sizeof(double));
  return next_component(map.params().lifespan_steps(), window, map.params());
}

}  // namespace

StateVector random_initial(const PopulationMap& map, RngStream& rng) {
  const int dim = map.dim();
  StateVector state(static_cast<std::size_t>(dim));
  for (int k = 0; k + 1 < dim; ++k) {
    const std::uint64_t count = kBaseCount + rng.next_below(kCountRange);
    state[static_cast<std::size_t>(k)] =
        static_cast<double>(count) / kCountScale;
  }
  state[static_cast<std::size_t>(dim - 1)] = recompute_last(map, state.data());
  return state;
}

SnapshotFile generate_file(const PopulationMap& map, std::uint32_t file_id,
                           std::uint64_t master_seed, long long burn_pairs,
                           long long snapshot_count) {
  if (burn_pairs < 1 || snapshot_count < 1)
    throw std::invalid_argument("generate_file: counts must be >= 1");
  RngStream rng(master_seed, file_id);
  SnapshotFile out;
  out.file_id = file_id;
  out.master_seed = master_seed;
  out.records.reserve(static_cast<std::size_t>(snapshot_count) + 1);

  StateVector state = random_initial(map, rng);
  out.records.push_back({0, state});

  map.iterate_pairs(state, burn_pairs);
  const std::uint64_t burn_label = 2 * static_cast<std::uint64_t>(burn_pairs);
  out.records.push_back({burn_label, state});
  for (long long q = 1; q < snapshot_count; ++q) {
    map.iterate_pairs(state, 1);
    out.records.push_back({burn_label + 2 * static_cast<std::uint64_t>(q), state});
  }
  return out;
}

StateVector perturb(const PopulationMap& map, const StateVector& state,
                    double magnitude, RngStream& rng, bool* clamped) {
  if (clamped) *clamped = false;
  if (magnitude < 0.0)
    throw std::invalid_argument("perturb: magnitude must be >= 0");
  const int dim = map.dim();
  if (static_cast<int>(state.size()) != dim)
    throw std::invalid_argument("perturb: bad state dimension");
  StateVector out = state;
  for (int k = 0; k + 1 < dim; ++k) {
    const double noisy =
        state[static_cast<std::size_t>(k)] + rng.next_symmetric(magnitude);
    if (noisy <= 0.0) {
      out[static_cast<std::size_t>(k)] = state[static_cast<std::size_t>(k)] / 2.0;
      if (clamped) *clamped = true;
    } else {
      out[static_cast<std::size_t>(k)] = noisy;
    }
  }
  out[static_cast<std::size_t>(dim - 1)] = recompute_last(map, out.data());
  return out;
}

long long divergence_time(const PopulationMap& map, const StateVector& a,
                          const StateVector& b, double d0, long long cap) {
  if (!(d0 > 0.0)) throw std::invalid_argument("divergence_time: d0 must be > 0");
  TwoYearWalker wa(map, a);
  TwoYearWalker wb(map, b);
  for (long long step = 1; step <= cap; ++step) {
    wa.step_pair();
    wb.step_pair();
    if (sup_distance_tracked(wa.state(), wb.state()) > d0) return step;
  }
  return cap + 1;
}

DispersionReport dispersion(std::span<const SnapshotFile> files) {
  if (files.empty())
    throw std::invalid_argument("dispersion: need at least one file");
  DispersionReport report;
  report.per_file_means.reserve(files.size());

  for (const SnapshotFile& file : files) {
    if (file.records.size() < 2)
      throw std::invalid_argument("dispersion: file without post-burn records");
    double file_sum = 0.0;
    long long count = 0;
    for (std::size_t r = 1; r < file.records.size(); ++r) {
      const StateVector& s = file.records[r].state;
      double coord_sum = 0.0;
      const std::size_t tracked = s.size() - 1;
      for (std::size_t k = 0; k < tracked; ++k) coord_sum += s[k];
      file_sum += coord_sum / static_cast<double>(tracked);
      ++count;
    }
    report.per_file_means.push_back(file_sum / static_cast<double>(count));
  }

  double grand = 0.0;
  for (double m : report.per_file_means) grand += m;
  grand /= static_cast<double>(report.per_file_means.size());
  report.grand_mean = grand;

  // Average absolute deviation over every (file, post-burn snapshot, tracked
  // coordinate) triple, centered at the grand mean.
  double dev_sum = 0.0;
  long long dev_count = 0;
  for (const SnapshotFile& file : files) {
    for (std::size_t r = 1; r < file.records.size(); ++r) {
      const StateVector& s = file.records[r].state;
      const std::size_t tracked = s.size() - 1;
      for (std::size_t k = 0; k < tracked; ++k) {
        dev_sum += std::abs(s[k] - grand);
        ++dev_count;
      }
    }
  }
  report.abs_deviation = dev_sum / static_cast<double>(dev_count);
  return report;
}

SensitivityReport sensitivity(const PopulationMap& map,
                              std::span<const SnapshotFile> files,
                              double magnitude, double d0, long long cap,
                              std::uint64_t master_seed) {
  SensitivityReport report;
  report.threshold_d0 = d0;
  report.perturbation_magnitude = magnitude;
  report.per_file_b.reserve(files.size());
  double sum = 0.0;
  for (const SnapshotFile& file : files) {
    if (file.records.size() < 2)
      throw std::invalid_argument("sensitivity: file without post-burn records");
    const StateVector& base = file.records[1].state;
    RngStream rng(master_seed, kPerturbStreamBase + file.file_id);
    const StateVector shifted = perturb(map, base, magnitude, rng);
    const long long b = divergence_time(map, base, shifted, d0, cap);
    report.per_file_b.push_back(b);
    sum += static_cast<double>(b);
  }
  report.mean_b = sum / static_cast<double>(report.per_file_b.size());
  return report;
}

void write_snapshot_file(const std::filesystem::path& path,
                         const SnapshotFile& file, int steps_per_year) {
  const std::size_t dim = 2 * static_cast<std::size_t>(steps_per_year) + 1;
  std::string blob;
  blob.reserve(12 + file.records.size() * (8 + dim * 8));
  blob.append(kMagic, 4);
  put_u32(blob, static_cast<std::uint32_t>(steps_per_year));
  put_u32(blob, static_cast<std::uint32_t>(file.records.size()));
  for (const SnapshotRecord& rec : file.records) {
    if (rec.state.size() != dim)
      throw std::invalid_argument("write_snapshot_file: record dimension mismatch");
    put_u64(blob, rec.label);
    for (double v : rec.state) put_f64(blob, v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

SnapshotFile read_snapshot_file(const std::filesystem::path& path,
                                std::uint32_t file_id) {
  const std::string blob = slurp(path);
  if (blob.size() < 12 || std::memcmp(blob.data(), kMagic, 4) != 0)
    throw std::runtime_error("not a snapshot file: " + path.string());
  const unsigned char* p =
      reinterpret_cast<const unsigned char*>(blob.data()) + 4;
  const std::uint32_t steps = take_u32(p);
  const std::uint32_t count = take_u32(p);
  const std::size_t dim = 2 * static_cast<std::size_t>(steps) + 1;
  const std::size_t expected = 12 + static_cast<std::size_t>(count) * (8 + dim * 8);
  if (blob.size() != expected)
    throw std::runtime_error("truncated snapshot file: " + path.string());
  SnapshotFile file;
  file.file_id = file_id;
  file.records.resize(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    file.records[r].label = take_u64(p);
    file.records[r].state.resize(dim);
    for (std::size_t k = 0; k < dim; ++k)
      file.records[r].state[k] = take_f64(p);
  }
  return file;
}

void export_snapshot_csv(const std::filesystem::path& path,
                         const SnapshotFile& file) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  char buffer[64];
  for (const SnapshotRecord& rec : file.records) {
    out << rec.label;
    for (double v : rec.state) {
      std::snprintf(buffer, sizeof(buffer), ",%.17g", v);
      out << buffer;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace yb
