#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "ybpop/ensemble.hpp"
#include "ybpop/entropy.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const std::string command = std::string(YBPOP_CLI_PATH) + " " + args + " 2>&1";
  RunResult result;
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buffer;
  while (std::size_t got = fread(buffer.data(), 1, buffer.size(), pipe))
    result.output.append(buffer.data(), got);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

const fs::path kScratch = "cli_scratch";

struct ScratchDir {
  ScratchDir() {
    fs::remove_all(kScratch);
    fs::create_directories(kScratch);
  }
};
ScratchDir scratch_dir_guard;

std::string out_arg(const std::string& sub) {
  return "--out " + (kScratch / sub).string();
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
  CHECK(run_cli("--bogus-flag simulate").exit_code == 1);
  CHECK(run_cli("").exit_code == 1);
  CHECK(run_cli("simulate --years -3").exit_code == 1);
  CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("simulate is deterministic and sized correctly") {
  const auto first = run_cli("--seed 7 " + out_arg("sim_a") + " simulate --years 2");
  CHECK(first.exit_code == 0);
  const std::string csv_a = read_file(kScratch / "sim_a" / "simulate.csv");
  // header + 201 initial + 200 fresh
  CHECK(count_lines(csv_a) == 1 + 201 + 200);

  const auto second = run_cli("--seed 7 " + out_arg("sim_b") + " simulate --years 2");
  CHECK(second.exit_code == 0);
  CHECK(read_file(kScratch / "sim_b" / "simulate.csv") == csv_a);

  const auto other_seed =
      run_cli("--seed 8 " + out_arg("sim_c") + " simulate --years 2");
  CHECK(other_seed.exit_code == 0);
  CHECK(read_file(kScratch / "sim_c" / "simulate.csv") != csv_a);
}

TEST_CASE("fixed-point reports the polished point and spectrum") {
  const auto r = run_cli(out_arg("fp") + " fixed-point");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("first coordinate:      1.23264904879") != std::string::npos);
  CHECK(r.output.find("dominant eigenvalue:   -3.3") != std::string::npos);
  CHECK(fs::exists(kScratch / "fp" / "fixed_point.txt"));
  CHECK(fs::exists(kScratch / "fp" / "fixed_point_report.txt"));
}

TEST_CASE("ensemble writes the requested files with default record layout") {
  const auto r = run_cli("--seed 1 " + out_arg("ens") + " ensemble --files 2");
  CHECK(r.exit_code == 0);
  const fs::path snaps = kScratch / "ens" / "snapshots";
  REQUIRE(fs::exists(snaps / "datos_0001.ybv"));
  REQUIRE(fs::exists(snaps / "datos_0002.ybv"));
  int count = 0;
  for (const auto& e : fs::directory_iterator(snaps)) {
    (void)e;
    ++count;
  }
  CHECK(count == 2);
  const yb::SnapshotFile file = yb::read_snapshot_file(snaps / "datos_0001.ybv", 1);
  CHECK(file.records.size() == 1025);
  CHECK(file.records[0].label == 0);
  CHECK(file.records[1].label == 20000);
  CHECK(file.records.back().label == 22046);
}

TEST_CASE("pipeline commands over a small ensemble") {
  const std::string ens_out = out_arg("pipe");
  REQUIRE(run_cli("--seed 5 " + ens_out +
                  " ensemble --files 3 --burn 400 --snapshots 16")
              .exit_code == 0);
  const std::string in_arg =
      "--in " + (kScratch / "pipe" / "snapshots").string();

  SUBCASE("perturb") {
    const auto r = run_cli("--seed 5 " + out_arg("pipe") + " perturb " + in_arg);
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(kScratch / "pipe" / "perturbed" / "pert_0001.ybv"));
  }
  SUBCASE("sensitivity") {
    const auto r = run_cli("--seed 5 " + out_arg("pipe") + " sensitivity " +
                           in_arg + " --u 1e-9 --cap 400");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("mean b =") != std::string::npos);
    const std::string csv = read_file(kScratch / "pipe" / "sensitivity.csv");
    CHECK(count_lines(csv) == 1 + 3);
  }
  SUBCASE("dispersion lands near the attractor mean") {
    const auto r = run_cli("--seed 5 " + out_arg("pipe") + " dispersion " + in_arg);
    CHECK(r.exit_code == 0);
    const std::string text = read_file(kScratch / "pipe" / "dispersion.txt");
    const double grand = std::stod(text.substr(text.find('=') + 1));
    CHECK(grand > 1.5);
    CHECK(grand < 3.2);
  }
  SUBCASE("entropy collect runs (match count may be zero at this scale)") {
    const auto r = run_cli("--seed 5 " + out_arg("pipe") +
                           " entropy-collect " + in_arg + " --d 1/64");
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(kScratch / "pipe" / "matches.bin"));
  }
  SUBCASE("project rows equal the post-burn snapshot count") {
    const auto r = run_cli("--seed 5 " + out_arg("pipe") + " project " + in_arg);
    CHECK(r.exit_code == 0);
    const std::string csv = read_file(kScratch / "pipe" / "projection.csv");
    CHECK(count_lines(csv) == 2 + 3 * 16);  // comment + header + rows
  }
}

TEST_CASE("entropy-estimate works on a crafted match file") {
  // Two real nearby attractor states presented as a cross-file pair.
  const yb::PopulationMap map{yb::ModelParams{}};
  const yb::SnapshotFile file = yb::generate_file(map, 1, 5, 400, 2);
  yb::MatchRecord match;
  match.file_j = 1;
  match.iter_j = 800;
  match.state_j = file.records[1].state;
  match.file_i = 2;
  match.iter_i = 800;
  match.state_i = file.records[1].state;
  for (std::size_t k = 0; k + 1 < match.state_i.size(); ++k)
    match.state_i[k] += 1e-6 * (k % 2 ? 1.0 : -1.0);
  fs::create_directories(kScratch / "est");
  yb::write_match_file(kScratch / "est" / "crafted.bin",
                       std::vector<yb::MatchRecord>{match}, map.dim());

  const auto r = run_cli(out_arg("est") + " entropy-estimate --matches " +
                         (kScratch / "est" / "crafted.bin").string() +
                         " --d 1/128 --analytic-sigma");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("k_hat=") != std::string::npos);
  CHECK(r.output.find("sigma_analytic=") != std::string::npos);
  CHECK(r.output.find("retained=1") != std::string::npos);
}

TEST_CASE("missing prerequisites exit with code 3") {
  CHECK(run_cli(out_arg("missing") + " sensitivity --in no_such_dir").exit_code == 3);
  CHECK(run_cli(out_arg("missing") + " dispersion --in no_such_dir").exit_code == 3);
  CHECK(run_cli(out_arg("missing") +
                " entropy-estimate --matches nope.bin --d 1/128")
            .exit_code == 3);
  CHECK(run_cli(out_arg("missing") + " fixed-point --asset nope.txt").exit_code == 3);
}

TEST_CASE("manifest reproduces the run byte for byte") {
  const fs::path cfg = kScratch / "run.cfg";
  {
    std::ofstream out(cfg);
    out << "# test config\nmaster_seed=99\noutput_dir="
        << (kScratch / "man_a").string() << "\n";
  }
  REQUIRE(run_cli("--config " + cfg.string() + " simulate --years 1").exit_code == 0);
  const std::string bytes_a = read_file(kScratch / "man_a" / "simulate.csv");

  // replay from the manifest alone, redirecting only the output directory
  const auto replay =
      run_cli("--config " + (kScratch / "man_a" / "manifest_simulate.txt").string() +
              " " + out_arg("man_b") + " simulate --years 1");
  CHECK(replay.exit_code == 0);
  CHECK(read_file(kScratch / "man_b" / "simulate.csv") == bytes_a);

  SUBCASE("config rejects unknown keys") {
    const fs::path bad = kScratch / "bad.cfg";
    {
      std::ofstream out(bad);
      out << "no_such_key=1\n";
    }
    CHECK(run_cli("--config " + bad.string() + " simulate").exit_code == 1);
  }
}

TEST_CASE("homoclinic scan and refine smoke") {
  const auto scan = run_cli(out_arg("hom") +
                            " homoclinic-scan --subdivisions 40 --max-pairs 600");
  CHECK(scan.exit_code == 0);
  REQUIRE(fs::exists(kScratch / "hom" / "homoclinic_candidate.txt"));
  const std::string table = read_file(kScratch / "hom" / "homoclinic_scan.csv");
  CHECK(count_lines(table) == 1 + 41);

  // A short explicit march; a coarse 40-point candidate is generally not a
  // true return and its full-length march may legitimately abort.
  const auto refine = run_cli(out_arg("hom") +
                              " homoclinic-refine --m 20 --subdivisions 40 "
                              "--j0 40 --gap-exponent 10.8");
  CHECK(refine.exit_code == 0);
  CHECK(refine.output.find("verdict:") != std::string::npos);
  const std::string angles = read_file(kScratch / "hom" / "homoclinic_angles.csv");
  CHECK(count_lines(angles) == 1 + 8);
}

TEST_CASE("project --unstable emits the requested iterate count") {
  const auto r = run_cli(out_arg("proj_u") +
                         " project --unstable --count 50 --fraction 0.5");
  CHECK(r.exit_code == 0);
  const std::string csv = read_file(kScratch / "proj_u" / "projection.csv");
  CHECK(count_lines(csv) == 2 + 50);
  CHECK(csv.find("x=coords 0..9") != std::string::npos);
  CHECK(csv.find("z=coords 35..44") != std::string::npos);
}
