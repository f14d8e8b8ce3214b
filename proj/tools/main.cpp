#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "config.hpp"
#include "ybpop/ensemble.hpp"
#include "ybpop/entropy.hpp"
#include "ybpop/homoclinic.hpp"
#include "ybpop/model.hpp"
#include "ybpop/rng.hpp"
#include "ybpop/spectral.hpp"

namespace fs = std::filesystem;
using namespace yb;
using ybtool::RunConfig;

namespace {

// Exit codes: 0 success, 1 usage, 2 numerical failure, 3 missing prerequisite.
struct MissingPrerequisite : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt17(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

fs::path prepare_out(const RunConfig& config) {
  fs::create_directories(config.output_dir);
  return config.output_dir;
}

StateVector load_asset(const std::string& path, const PopulationMap& map) {
  if (!fs::exists(path)) {
    throw MissingPrerequisite("fixed-point asset not found: " + path +
                              " (pass --asset or run `ybpop fixed-point`)");
  }
  return load_state_file(path, map.dim());
}

StateVector polished_point(const PopulationMap& map, const std::string& asset) {
  // The homoclinic stages need the residual at the round-off floor; ask for
  // more than binary64 can deliver and accept the best-achievable point.
  const FixedPointResult result =
      newton_polish(map, load_asset(asset, map), 1e-15, 25);
  if (result.sup_residual > 1e-10) {
    throw NumericalFailure("newton polish stalled at sup residual " +
                           fmt17(result.sup_residual));
  }
  return result.point;
}

std::string snapshot_name(std::uint32_t id) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "datos_%04u.ybv", id);
  return buffer;
}

std::vector<SnapshotFile> load_ensemble(const fs::path& dir,
                                        const PopulationMap& map) {
  if (!fs::is_directory(dir)) {
    throw MissingPrerequisite("snapshot directory not found: " + dir.string() +
                              " (run `ybpop ensemble` first)");
  }
  std::vector<std::pair<std::uint32_t, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.starts_with("datos_") && name.ends_with(".ybv")) {
      found.emplace_back(
          static_cast<std::uint32_t>(std::stoul(name.substr(6, name.size() - 10))),
          entry.path());
    }
  }
  if (found.empty()) {
    throw MissingPrerequisite("no datos_*.ybv files in " + dir.string() +
                              " (run `ybpop ensemble` first)");
  }
  std::sort(found.begin(), found.end());
  std::vector<SnapshotFile> files;
  files.reserve(found.size());
  for (const auto& [id, path] : found) {
    SnapshotFile file = read_snapshot_file(path, id);
    if (!file.records.empty() &&
        static_cast<int>(file.records.front().state.size()) != map.dim()) {
      throw std::invalid_argument("snapshot file " + path.string() +
                                  " does not match steps_per_year in the config");
    }
    files.push_back(std::move(file));
  }
  return files;
}

// ---------------------------------------------------------------- commands

int cmd_simulate(const RunConfig& config, int years) {
  const PopulationMap map(config.params);
  const fs::path out_dir = prepare_out(config);
  RngStream rng(config.master_seed, kSimulateStream);
  StateVector state = random_initial(map, rng);

  const int p = config.params.steps_per_year;
  std::ostringstream csv;
  csv << "step,population\n";
  long long step = 0;
  for (double v : state) csv << step++ << ',' << fmt17(v) << '\n';
  for (int year = 0; year < years; ++year) {
    state = map.advance(state);
    for (int j = p + 1; j < map.dim(); ++j)
      csv << step++ << ',' << fmt17(state[static_cast<std::size_t>(j)]) << '\n';
  }
  write_text(out_dir / "simulate.csv", csv.str());
  ybtool::write_manifest(out_dir / "manifest_simulate.txt", config, "simulate");
  std::cout << "simulate: wrote " << (out_dir / "simulate.csv").string() << " ("
            << step << " steps)\n";
  return 0;
}

int cmd_fixed_point(const RunConfig& config, const std::string& asset,
                    double tol, int max_iter) {
  const PopulationMap map(config.params);
  const fs::path out_dir = prepare_out(config);
  const FixedPointResult result =
      newton_polish(map, load_asset(asset, map), tol, max_iter);
  if (!result.converged) {
    throw NumericalFailure("newton polish did not converge (sup residual " +
                           fmt17(result.sup_residual) + ")");
  }
  const Eigen::MatrixXd jac =
      jacobian_two_year(map, result.point, JacobianScheme::kAnalyticChain);
  const SpectrumReport spec = spectrum(jac);

  std::ostringstream report;
  report << "fixed point report\n"
         << "  newton iterations:     " << result.iterations_used << '\n'
         << "  sup residual:          " << fmt17(result.sup_residual) << '\n'
         << "  l1 residual:           " << fmt17(result.l1_residual) << '\n'
         << "  first coordinate:      " << fmt17(result.point.front()) << '\n'
         << "  dominant eigenvalue:   " << fmt17(spec.dominant) << '\n'
         << "  subdominant modulus:   " << fmt17(spec.subdominant_modulus) << '\n'
         << "  smallest singular val: " << fmt17(spec.smallest_singular_value)
         << '\n';
  save_state_file((out_dir / "fixed_point.txt").string(), result.point);
  write_text(out_dir / "fixed_point_report.txt", report.str());
  ybtool::write_manifest(out_dir / "manifest_fixed_point.txt", config,
                         "fixed-point");
  std::cout << report.str();
  return 0;
}

int cmd_ensemble(const RunConfig& config) {
  const PopulationMap map(config.params);
  const fs::path out_dir = prepare_out(config);
  const fs::path snap_dir = out_dir / "snapshots";
  fs::create_directories(snap_dir);
  for (long long id = 1; id <= config.ensemble_size; ++id) {
    const SnapshotFile file =
        generate_file(map, static_cast<std::uint32_t>(id), config.master_seed,
                      config.burn_pairs, config.snapshot_count);
    write_snapshot_file(snap_dir / snapshot_name(static_cast<std::uint32_t>(id)),
                        file, config.params.steps_per_year);
    if (id % 25 == 0 || id == config.ensemble_size) {
      std::cout << "ensemble: " << id << '/' << config.ensemble_size
                << " files written\n";
    }
  }
  ybtool::write_manifest(out_dir / "manifest_ensemble.txt", config, "ensemble");
  return 0;
}

int cmd_perturb(const RunConfig& config, const fs::path& in_dir,
                double magnitude) {
  const PopulationMap map(config.params);
  const fs::path out_dir = prepare_out(config);
  const fs::path pert_dir = out_dir / "perturbed";
  fs::create_directories(pert_dir);
  const std::vector<SnapshotFile> files = load_ensemble(in_dir, map);
  for (const SnapshotFile& file : files) {
    if (file.records.size() < 2)
      throw std::invalid_argument("file without post-burn records");
    RngStream rng(config.master_seed, kPerturbStreamBase + file.file_id);
    SnapshotFile out;
    out.file_id = file.file_id;
    out.master_seed = config.master_seed;
    out.records.push_back(
        {file.records[1].label,
         perturb(map, file.records[1].state, magnitude, rng)});
    char name[32];
    std::snprintf(name, sizeof(name), "pert_%04u.ybv", file.file_id);
    write_snapshot_file(pert_dir / name, out, config.params.steps_per_year);
  }
  ybtool::write_manifest(out_dir / "manifest_perturb.txt", config, "perturb");
  std::cout << "perturb: wrote " << files.size() << " perturbed states to "
            << pert_dir.string() << '\n';
  return 0;
}

int cmd_sensitivity(const RunConfig& config, const fs::path& in_dir,
                    double magnitude, double d0, long long cap) {
  const PopulationMap map(config.params);
  const fs::path out_dir = prepare_out(config);
  const std::vector<SnapshotFile> files = load_ensemble(in_dir, map);
  const SensitivityReport report =
      sensitivity(map, files, magnitude, d0, cap, config.master_seed);

  std::ostringstream csv;
  csv << "file_id,b\n";
  long long max_b = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    csv << files[i].file_id << ',' << report.per_file_b[i] << '\n';
    max_b = std::max(max_b, report.per_file_b[i]);
  }
  write_text(out_dir / "sensitivity.csv", csv.str());
  ybtool::write_manifest(out_dir / "manifest_sensitivity.txt", config,
                         "sensitivity");
  std::cout << "sensitivity: magnitude " << fmt17(magnitude) << ", d0 "
            << fmt17(d0) << "\n  mean b = " << fmt17(report.mean_b)
            << ", max b = " << max_b << " (cap " << cap << ")\n";
  return 0;
}

int cmd_dispersion(const RunConfig& config, const fs::path& in_dir) {
  const PopulationMap map(config.params);
  const fs::path out_dir = prepare_out(config);
  const std::vector<SnapshotFile> files = load_ensemble(in_dir, map);
  const DispersionReport report = dispersion(files);

  std::ostringstream csv;
  csv << "file_id,mean\n";
  for (std::size_t i = 0; i < files.size(); ++i)
    csv << files[i].file_id << ',' << fmt17(report.per_file_means[i]) << '\n';
  write_text(out_dir / "dispersion.csv", csv.str());

  std::ostringstream text;
  text << "grand_mean=" << fmt17(report.grand_mean) << '\n'
       << "abs_deviation=" << fmt17(report.abs_deviation) << '\n';
  write_text(out_dir / "dispersion.txt", text.str());
  ybtool::write_manifest(out_dir / "manifest_dispersion.txt", config,
                         "dispersion");
  std::cout << "dispersion: <N> = " << fmt17(report.grand_mean)
            << ", delta_N = " << fmt17(report.abs_deviation) << '\n';
  return 0;
}

int cmd_entropy_collect(const RunConfig& config, const fs::path& in_dir,
                        const std::string& d_text) {
  const PopulationMap map(config.params);
  const fs::path out_dir = prepare_out(config);
  const double d = ybtool::parse_distance(d_text);
  const std::vector<SnapshotFile> files = load_ensemble(in_dir, map);
  const std::vector<MatchRecord> matches = collect_matches(files, d);
  write_match_file(out_dir / "matches.bin", matches, map.dim());
  ybtool::write_manifest(out_dir / "manifest_entropy_collect.txt", config,
                         "entropy-collect");
  std::cout << "entropy-collect: d = " << fmt17(d) << ", " << matches.size()
            << " near pairs -> " << (out_dir / "matches.bin").string() << '\n';
  return 0;
}

int cmd_entropy_estimate(const RunConfig& config, const fs::path& match_path,
                         const std::string& d_text, long long cap, double tau,
                         bool analytic_sigma) {
  const PopulationMap map(config.params);
  const fs::path out_dir = prepare_out(config);
  if (!fs::exists(match_path)) {
    throw MissingPrerequisite("match file not found: " + match_path.string() +
                              " (run `ybpop entropy-collect` first)");
  }
  const double d = ybtool::parse_distance(d_text);
  const std::vector<MatchRecord> matches =
      read_match_file(match_path, map.dim());
  long long seen = 0;
  const EntropyEstimate est =
      estimate_for_distance(map, matches, d, cap, tau, &seen);
  if (est.sample_count == 0 || std::isnan(est.k_hat)) {
    throw NumericalFailure("no usable samples at d = " + fmt17(d));
  }

  std::ostringstream text;
  text << "d=" << fmt17(est.d) << '\n'
       << "matches=" << seen << '\n'
       << "retained=" << est.sample_count << '\n'
       << "capped=" << est.capped_count << '\n'
       << "mean_escape=" << fmt17(est.mean_escape) << '\n'
       << "k_hat=" << fmt17(est.k_hat) << '\n'
       << "sigma=" << fmt17(est.sigma_k) << '\n'
       << "tau_s=" << fmt17(est.tau_s) << '\n'
       << "t_entropy=" << fmt17(est.k_hat / 2.0) << '\n';
  if (analytic_sigma) {
    // the error-propagation variant differs by the factor k_hat
    text << "sigma_analytic=" << fmt17(est.sigma_k * est.k_hat) << '\n';
  }
  write_text(out_dir / "entropy_estimate.txt", text.str());
  ybtool::write_manifest(out_dir / "manifest_entropy_estimate.txt", config,
                         "entropy-estimate");
  std::cout << text.str();
  return 0;
}

int cmd_entropy_sweep(const RunConfig& config, const fs::path& in_dir,
                      long long cap, double tau) {
  const PopulationMap map(config.params);
  const fs::path out_dir = prepare_out(config);
  const std::vector<SnapshotFile> files = load_ensemble(in_dir, map);
  const std::vector<EntropyEstimate> estimates = sweep(map, files, cap, tau);
  write_sweep_csv(out_dir / "entropy_sweep.csv", estimates);
  ybtool::write_manifest(out_dir / "manifest_entropy_sweep.txt", config,
                         "entropy-sweep");
  long long flagged = 0;
  for (const auto& e : estimates)
    if (std::isnan(e.k_hat)) ++flagged;
  std::cout << "entropy-sweep: " << estimates.size() << " rows ("
            << flagged << " flagged) -> "
            << (out_dir / "entropy_sweep.csv").string() << '\n';
  return 0;
}

int cmd_homoclinic_scan(const RunConfig& config, const std::string& asset,
                        int s, int subdivisions, long long max_pairs,
                        long long skip) {
  const PopulationMap map(config.params);
  const fs::path out_dir = prepare_out(config);
  const StateVector p_hat = polished_point(map, asset);
  const UnstableSegment segment = unstable_segment(map, p_hat, s);

  ScanOptions options;
  options.subdivisions = subdivisions;
  options.max_pairs = max_pairs;
  options.skip = skip;
  ScanResult result;
  try {
    result = scan_returns(map, segment, p_hat, options);
  } catch (const std::runtime_error& e) {
    throw NumericalFailure(e.what());
  }

  std::ostringstream csv;
  csv << "m,best_j,min_distance,accepted\n";
  for (const ScanPoint& point : result.table) {
    csv << point.m << ',' << point.best_j << ',' << fmt17(point.min_distance)
        << ',' << (point.accepted ? 1 : 0) << '\n';
  }
  write_text(out_dir / "homoclinic_scan.csv", csv.str());

  std::ostringstream cand;
  cand << "m=" << result.best.m << '\n'
       << "subdivisions=" << result.best.subdivisions << '\n'
       << "j0=" << result.best.j0 << '\n'
       << "min_distance=" << fmt17(result.best.min_distance) << '\n'
       << "s=" << s << '\n';
  write_text(out_dir / "homoclinic_candidate.txt", cand.str());
  ybtool::write_manifest(out_dir / "manifest_homoclinic_scan.txt", config,
                         "homoclinic-scan");
  std::cout << "homoclinic-scan: segment s=" << s << " length "
            << fmt17(segment.length) << "\n  best m=" << result.best.m << "/"
            << result.best.subdivisions << ", j0=" << result.best.j0
            << ", min distance " << fmt17(result.best.min_distance) << '\n';
  return 0;
}

ReturnCandidate read_candidate(const fs::path& path, int* s_out) {
  std::ifstream in(path);
  if (!in)
    throw MissingPrerequisite("candidate file not found: " + path.string() +
                              " (run `ybpop homoclinic-scan` first)");
  ReturnCandidate candidate;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "m") candidate.m = std::stoi(value);
    if (key == "subdivisions") candidate.subdivisions = std::stoi(value);
    if (key == "j0") candidate.j0 = std::stoll(value);
    if (key == "min_distance") candidate.min_distance = std::stod(value);
    if (key == "s" && s_out) *s_out = std::stoi(value);
  }
  return candidate;
}

int cmd_homoclinic_refine(const RunConfig& config, const std::string& asset,
                          const std::string& candidate_path, int s_flag,
                          int m_flag, long long j0_flag, int subdivisions_flag,
                          double gap_exponent, double ratio_tol) {
  const PopulationMap map(config.params);
  const fs::path out_dir = prepare_out(config);
  const StateVector p_hat = polished_point(map, asset);

  int s = s_flag;
  ReturnCandidate candidate;
  if (!candidate_path.empty()) {
    candidate = read_candidate(candidate_path, &s);
  } else {
    if (m_flag < 0 || j0_flag <= 0) {
      throw CLI::ValidationError(
          "homoclinic-refine",
          "pass --candidate or all of --m/--j0/--subdivisions");
    }
    candidate.m = m_flag;
    candidate.j0 = j0_flag;
    candidate.subdivisions = subdivisions_flag;
  }
  const UnstableSegment segment = unstable_segment(map, p_hat, s);

  RefineOptions options;
  options.gap_exponent = gap_exponent;
  options.ratio_tol = ratio_tol;
  std::vector<ChunkLogEntry> log;
  std::pair<RefinementState, AngleDiagnostics> outcome;
  try {
    outcome = refine(map, segment, candidate, p_hat, options, &log);
  } catch (const std::runtime_error& e) {
    throw NumericalFailure(e.what());
  }
  const RefinementState& state = outcome.first;
  const AngleDiagnostics& diag = outcome.second;

  auto degrees = [](double rad) {
    return static_cast<long long>(std::llround(rad * 180.0 / 3.14159265358979312));
  };

  std::ostringstream transcript;
  transcript << "gap exponent = " << fmt17(gap_exponent)
             << ", gap = " << fmt17(std::exp2(gap_exponent)) << '\n'
             << "candidate m = " << candidate.m << '/' << candidate.subdivisions
             << ", j0 = " << candidate.j0 << ", segment s = " << s << '\n';
  for (const ChunkLogEntry& entry : log) {
    transcript << "iter= " << entry.iterations_done - entry.chunk
               << ", dist(L,R) previous to iteration is "
               << fmt17(entry.length_before) << '\n'
               << "  dist between L and R after applying T^" << 2 * entry.chunk
               << " is " << fmt17(entry.length_after) << '\n'
               << "  dist(L,L1)+dist(L1,M)+dist(M,R1)+dist(R1,R)= "
               << fmt17(entry.quarter_arc_sum) << '\n';
  }
  transcript << "iterates done = " << state.iterations_done << '\n'
             << "euclidean dist from p to M:  "
             << fmt17(scaled_distance(p_hat, state.mid)) << '\n'
             << "euclidean dist from p to L:  "
             << fmt17(scaled_distance(p_hat, state.left)) << '\n'
             << "euclidean dist from p to R:  "
             << fmt17(scaled_distance(p_hat, state.right)) << '\n'
             << "euclidean dist between L and R: "
             << fmt17(scaled_distance(state.left, state.right)) << '\n'
             << "expansion rate of (L,R) under T^2: "
             << fmt17(expansion_rate(map, state.left, state.right)) << '\n'
             << "angle between W_u segment and iterated arc LR = "
             << fmt17(diag.far_from_tangency_angle) << " rad, deg ~ "
             << degrees(diag.far_from_tangency_angle) << '\n';
  for (std::size_t j = 0; j < diag.per_iterate_angles.size(); ++j) {
    transcript << "angle between vectors (p,T^" << 2 * j << "(L)) and (p,T^"
               << 2 * j << "(R)) is " << fmt17(diag.per_iterate_angles[j])
               << " rad, deg ~ " << degrees(diag.per_iterate_angles[j]) << '\n';
  }
  const char* verdict = diag.verdict == Verdict::kCrossingEvidence
                            ? "CROSSING_EVIDENCE"
                            : diag.verdict == Verdict::kSameSide
                                  ? "SAME_SIDE"
                                  : "INCONCLUSIVE";
  transcript << "verdict: " << verdict << '\n';
  write_text(out_dir / "homoclinic_refine.txt", transcript.str());

  std::ostringstream csv;
  csv << "j,angle_rad\n";
  for (std::size_t j = 0; j < diag.per_iterate_angles.size(); ++j)
    csv << j << ',' << fmt17(diag.per_iterate_angles[j]) << '\n';
  write_text(out_dir / "homoclinic_angles.csv", csv.str());
  ybtool::write_manifest(out_dir / "manifest_homoclinic_refine.txt", config,
                         "homoclinic-refine");
  std::cout << transcript.str();
  return 0;
}

int cmd_project(const RunConfig& config, const fs::path& in_dir, bool unstable,
                const std::string& asset, double fraction, int count, int s) {
  const PopulationMap map(config.params);
  const fs::path out_dir = prepare_out(config);
  const int p = config.params.steps_per_year;
  const int x0 = 0;
  const int y0 = p / 2;
  const int z0 = static_cast<int>(
      std::ceil((config.params.winter_fraction + 0.05) * p - 1e-9));

  auto project = [&](const StateVector& state) {
    auto window_mean = [&](int from) {
      double sum = 0.0;
      for (int k = from; k < from + 10; ++k)
        sum += state[static_cast<std::size_t>(k)];
      return sum / 10.0;
    };
    return std::array<double, 3>{window_mean(x0), window_mean(y0),
                                 window_mean(z0)};
  };

  std::ostringstream csv;
  csv << "# projection windows: x=coords " << x0 << ".." << x0 + 9
      << " (year start), y=coords " << y0 << ".." << y0 + 9
      << " (mid-year), z=coords " << z0 << ".." << z0 + 9
      << " (early spring)\n";
  csv << "x,y,z\n";
  std::size_t rows = 0;

  if (unstable) {
    const StateVector p_hat = polished_point(map, asset);
    const UnstableSegment segment = unstable_segment(map, p_hat, s);
    StateVector y(static_cast<std::size_t>(map.dim()));
    for (int k = 0; k < map.dim(); ++k) {
      y[static_cast<std::size_t>(k)] =
          segment.left[static_cast<std::size_t>(k)] +
          fraction * (segment.right[static_cast<std::size_t>(k)] -
                      segment.left[static_cast<std::size_t>(k)]);
    }
    TwoYearWalker walker(map, y);
    for (int i = 0; i < count; ++i) {
      walker.step_pair();
      StateVector snap(walker.state().begin(), walker.state().end());
      const auto [px, py, pz] = project(snap);
      csv << fmt17(px) << ',' << fmt17(py) << ',' << fmt17(pz) << '\n';
      ++rows;
    }
  } else {
    const std::vector<SnapshotFile> files = load_ensemble(in_dir, map);
    for (const SnapshotFile& file : files) {
      for (std::size_t r = 1; r < file.records.size(); ++r) {
        const auto [px, py, pz] = project(file.records[r].state);
        csv << fmt17(px) << ',' << fmt17(py) << ',' << fmt17(pz) << '\n';
        ++rows;
      }
    }
    if (rows == 0) throw std::invalid_argument("project: no snapshots found");
  }
  write_text(out_dir / "projection.csv", csv.str());
  ybtool::write_manifest(out_dir / "manifest_project.txt", config, "project");
  std::cout << "project: wrote " << rows << " rows -> "
            << (out_dir / "projection.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discretized two-year population map: simulation, spectra, "
               "entropy and homoclinic diagnostics"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::string out_flag;
  bool desk = false, paper_scale = false;
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--seed", seed_flag, "master seed (overrides config)");
  app.add_option("--out", out_flag, "output directory (overrides config)");
  app.add_flag("--desk", desk, "desk scale: 50 files, 256 snapshots");
  app.add_flag("--paper-scale", paper_scale,
               "full scale: 400 files, 1024 snapshots");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "seeded trajectory CSV");
  int years = 10;
  simulate->add_option("--years", years, "years to simulate")
      ->check(CLI::PositiveNumber);

  // fixed-point
  auto* fixed_point =
      app.add_subcommand("fixed-point", "polish the period-2 point, report spectrum");
  std::string asset = YBPOP_DEFAULT_ASSET;
  double fp_tol = 1e-12;
  int fp_max_iter = 25;
  fixed_point->add_option("--asset", asset, "fixed-point seed file");
  fixed_point->add_option("--tol", fp_tol, "target sup residual");
  fixed_point->add_option("--max-iter", fp_max_iter, "newton iteration cap");

  // ensemble
  auto* ensemble_cmd =
      app.add_subcommand("ensemble", "generate snapshot files");
  std::optional<long long> files_flag, burn_flag, snaps_flag;
  ensemble_cmd->add_option("--files", files_flag, "number of files");
  ensemble_cmd->add_option("--burn", burn_flag, "burn-in two-year steps");
  ensemble_cmd->add_option("--snapshots", snaps_flag, "snapshots per file");

  // perturb
  auto* perturb_cmd =
      app.add_subcommand("perturb", "perturb each file's first post-burn state");
  std::string pert_in;
  double pert_u = 0x1.0p-50;
  perturb_cmd->add_option("--in", pert_in, "snapshot directory")->required();
  perturb_cmd->add_option("--u", pert_u, "perturbation magnitude");

  // sensitivity
  auto* sens = app.add_subcommand("sensitivity", "divergence times b_i");
  std::string sens_in;
  double sens_u = 0x1.0p-50, sens_d0 = 0.1;
  long long sens_cap = 10000;
  sens->add_option("--in", sens_in, "snapshot directory")->required();
  sens->add_option("--u", sens_u, "perturbation magnitude");
  sens->add_option("--d0", sens_d0, "divergence threshold");
  sens->add_option("--cap", sens_cap, "two-year step cap");

  // dispersion
  auto* disp = app.add_subcommand("dispersion", "grand mean and deviation");
  std::string disp_in;
  disp->add_option("--in", disp_in, "snapshot directory")->required();

  // entropy-collect
  auto* ecollect = app.add_subcommand("entropy-collect", "near-pair search");
  std::string ec_in, ec_d;
  ecollect->add_option("--in", ec_in, "snapshot directory")->required();
  ecollect->add_option("--d", ec_d, "distance (number or a/b)")->required();

  // entropy-estimate
  auto* eest = app.add_subcommand("entropy-estimate", "ML entropy from matches");
  std::string ee_matches, ee_d;
  long long ee_cap = 10000;
  double ee_tau = 1.0;
  bool ee_analytic = false;
  eest->add_option("--matches", ee_matches, "match file")->required();
  eest->add_option("--d", ee_d, "distance (number or a/b)")->required();
  eest->add_option("--cap", ee_cap, "escape-time cap");
  eest->add_option("--tau", ee_tau, "sampling interval tau_s");
  eest->add_flag("--analytic-sigma", ee_analytic,
                 "also print the error-propagation sigma variant");

  // entropy-sweep
  auto* esweep = app.add_subcommand("entropy-sweep", "32-distance estimate table");
  std::string es_in;
  long long es_cap = 10000;
  double es_tau = 1.0;
  esweep->add_option("--in", es_in, "snapshot directory")->required();
  esweep->add_option("--cap", es_cap, "escape-time cap");
  esweep->add_option("--tau", es_tau, "sampling interval tau_s");

  // homoclinic-scan
  auto* hscan = app.add_subcommand("homoclinic-scan", "return scan over the segment");
  std::string hs_asset = YBPOP_DEFAULT_ASSET;
  int hs_s = 19, hs_subdiv = 10000;
  long long hs_pairs = 1024, hs_skip = 20;
  hscan->add_option("--asset", hs_asset, "fixed-point seed file");
  hscan->add_option("--s", hs_s, "segment index s");
  hscan->add_option("--subdivisions", hs_subdiv, "lattice subdivisions");
  hscan->add_option("--max-pairs", hs_pairs, "two-year iterations per point");
  hscan->add_option("--skip", hs_skip, "leading iterates to discard");

  // homoclinic-refine
  auto* hrefine = app.add_subcommand("homoclinic-refine", "march and classify");
  std::string hr_asset = YBPOP_DEFAULT_ASSET, hr_candidate;
  int hr_s = 19, hr_m = -1, hr_subdiv = 10000;
  long long hr_j0 = 0;
  double hr_gap = 10.80, hr_ratio = 1.0001;
  hrefine->add_option("--asset", hr_asset, "fixed-point seed file");
  hrefine->add_option("--candidate", hr_candidate, "candidate file from the scan");
  hrefine->add_option("--s", hr_s, "segment index s");
  hrefine->add_option("--m", hr_m, "lattice index");
  hrefine->add_option("--j0", hr_j0, "two-year iterations to march");
  hrefine->add_option("--subdivisions", hr_subdiv, "lattice subdivisions");
  hrefine->add_option("--gap-exponent", hr_gap, "gap = 2^exponent, in (3,20]");
  hrefine->add_option("--ratio-tol", hr_ratio, "straightness tolerance");

  // project
  auto* project = app.add_subcommand("project", "3D attractor projection CSV");
  std::string pj_in, pj_asset = YBPOP_DEFAULT_ASSET;
  bool pj_unstable = false;
  double pj_fraction = 0.5;
  int pj_count = 1000, pj_s = 19;
  project->add_option("--in", pj_in, "snapshot directory");
  project->add_flag("--unstable", pj_unstable,
                    "project iterates of an unstable-segment point instead");
  project->add_option("--asset", pj_asset, "fixed-point seed file");
  project->add_option("--fraction", pj_fraction, "segment fraction in [0,1]");
  project->add_option("--count", pj_count, "iterates to project");
  project->add_option("--s", pj_s, "segment index s");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) config = ybtool::load_config(config_path);
    if (desk && paper_scale)
      throw std::invalid_argument("--desk and --paper-scale are exclusive");
    if (desk) {
      config.ensemble_size = 50;
      config.snapshot_count = 256;
    }
    if (paper_scale) {
      config.ensemble_size = 400;
      config.snapshot_count = 1024;
    }
    if (seed_flag) config.master_seed = *seed_flag;
    if (!out_flag.empty()) config.output_dir = out_flag;
    if (files_flag) config.ensemble_size = *files_flag;
    if (burn_flag) config.burn_pairs = *burn_flag;
    if (snaps_flag) config.snapshot_count = *snaps_flag;
    config.validate();

    if (simulate->parsed()) return cmd_simulate(config, years);
    if (fixed_point->parsed())
      return cmd_fixed_point(config, asset, fp_tol, fp_max_iter);
    if (ensemble_cmd->parsed()) return cmd_ensemble(config);
    if (perturb_cmd->parsed()) return cmd_perturb(config, pert_in, pert_u);
    if (sens->parsed())
      return cmd_sensitivity(config, sens_in, sens_u, sens_d0, sens_cap);
    if (disp->parsed()) return cmd_dispersion(config, disp_in);
    if (ecollect->parsed()) return cmd_entropy_collect(config, ec_in, ec_d);
    if (eest->parsed())
      return cmd_entropy_estimate(config, ee_matches, ee_d, ee_cap, ee_tau,
                                  ee_analytic);
    if (esweep->parsed()) return cmd_entropy_sweep(config, es_in, es_cap, es_tau);
    if (hscan->parsed())
      return cmd_homoclinic_scan(config, hs_asset, hs_s, hs_subdiv, hs_pairs,
                                 hs_skip);
    if (hrefine->parsed())
      return cmd_homoclinic_refine(config, hr_asset, hr_candidate, hr_s, hr_m,
                                   hr_j0, hr_subdiv, hr_gap, hr_ratio);
    if (project->parsed())
      return cmd_project(config, pj_in, pj_unstable, pj_asset, pj_fraction,
                         pj_count, pj_s);
    std::cerr << "no subcommand\n";
    return 1;
  } catch (const MissingPrerequisite& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
