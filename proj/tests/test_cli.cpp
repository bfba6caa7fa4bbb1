#include "doctest.h"
#include "tree_hash.hpp"

#include "sparsefoot/cli.hpp"
#include "sparsefoot/harness.hpp"
#include "sparsefoot/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace sparsefoot;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  return fs::temp_directory_path() / ("sparsefoot_cli_" + std::to_string(::getpid())) / name;
}

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("generate writes the terrain artifacts") {
  const auto dir = scratch("gen");
  const Run r = cli({"generate", "--out", dir.string(), "--kind", "gaps", "--seed", "3"});
  REQUIRE(r.code == kExitOk);
  for (const char* f : {"heightfield.pgm", "heightfield.csv", "safety.pgm", "edge_dist.csv", "config.resolved.txt"})
    CHECK(fs::exists(dir / f));
  const std::string resolved = slurp(dir / "config.resolved.txt");
  CHECK(resolved.find("kind = gaps\n") != std::string::npos);
  CHECK(resolved.find("seed = 3\n") != std::string::npos);
  CHECK(r.out.find("generated gaps 120x80") != std::string::npos);
}

TEST_CASE("config file plus overrides; later wins") {
  const auto dir = scratch("cfg");
  write_text_file(dir / "run.cfg", "kind = stepping_beams\ndifficulty = 0.5\n");
  const Run r = cli({"generate", "--config", (dir / "run.cfg").string(), "--out", (dir / "o").string(),
                     "--difficulty=0.25"});
  REQUIRE(r.code == kExitOk);
  const std::string resolved = slurp(dir / "o" / "config.resolved.txt");
  CHECK(resolved.find("kind = stepping_beams\n") != std::string::npos);
  CHECK(resolved.find("difficulty = 0.25\n") != std::string::npos);
}

TEST_CASE("exit codes") {
  const auto dir = scratch("codes").string();
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"teleport"}).code == kExitConfig);
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({"generate", "--out", dir, "--colour", "red"}).code == kExitConfig);
  CHECK(cli({"generate", "--out", dir, "--difficulty", "7"}).code == kExitConfig);
  CHECK(cli({"generate", "--out", dir, "--kind", "lava"}).code == kExitConfig);
  CHECK(cli({"generate", "--out", dir, "stray"}).code == kExitConfig);
  CHECK(cli({"generate", "--out", dir, "--config", "/nonexistent.cfg"}).code == kExitConfig);
  CHECK(cli({"report", "--out", dir, "--input", "/nonexistent.csv"}).code == kExitRuntime);
  // A terrain too short for one gap period is a runtime infeasibility.
  CHECK(cli({"generate", "--out", dir, "--kind", "gaps", "--length_m", "2.5"}).code == kExitRuntime);
  const Run bad = cli({"generate", "--out", dir, "--colour", "red"});
  CHECK(bad.err.find("colour") != std::string::npos);
}

TEST_CASE("report gates on ordering violations") {
  const auto dir = scratch("gate");
  write_text_file(dir / "evaluation.csv",
                  "kind,difficulty,perception,success_rate,trav_mean,trav_sd,mev,mae_cm\n"
                  "gaps,1.000,ground_truth,0.2,0.5,0.1,0.0,nan\n"
                  "gaps,1.000,reconstructed,0.4,0.5,0.1,0.0,1.0\n"
                  "gaps,1.000,blind,0.0,0.5,0.1,0.0,nan\n");
  CHECK(cli({"report", "--out", dir.string()}).code == kExitOk);
  CHECK(slurp(dir / "report.md").find("success(ground_truth)=0.200 < success(reconstructed)=0.400") !=
        std::string::npos);
  CHECK(cli({"report", "--out", dir.string(), "--check_ordering"}).code == kExitPropertyGate);
  CHECK(cli({"report", "--out", dir.string(), "--check-ordering", "on"}).code == kExitPropertyGate);
}

TEST_CASE("evaluate, then report its output") {
  const auto dir = scratch("eval");
  const Run r = cli({"evaluate", "--out", dir.string(), "--kinds", "balance_beams", "--difficulties", "0.5",
                     "--n_seeds", "2", "--check_ordering"});
  REQUIRE(r.code == kExitOk);
  std::ifstream in(dir / "evaluation.csv");
  const auto rows = read_aggregate_csv(in);
  CHECK(rows.size() == 3);
  CHECK(fs::exists(dir / "summary.txt"));
  CHECK(cli({"report", "--out", dir.string()}).code == kExitOk);
  CHECK(fs::exists(dir / "report.md"));
}

TEST_CASE("sweep stacks one block per value") {
  const auto dir = scratch("sweep");
  const Run r = cli({"sweep", "--out", dir.string(), "--kinds", "gaps", "--difficulties", "0.2",
                     "--perceptions", "ground_truth", "--n_seeds", "1", "--sweep_values", "0,2"});
  REQUIRE(r.code == kExitOk);
  const std::string csv = slurp(dir / "sweep.csv");
  CHECK(csv.rfind("sweep_key,sweep_value,kind,difficulty,perception", 0) == 0);
  CHECK(csv.find("edge_margin_weight,0,gaps") != std::string::npos);
  CHECK(csv.find("edge_margin_weight,2,gaps") != std::string::npos);
  CHECK(cli({"sweep", "--out", dir.string(), "--sweep_key", "nonsense"}).code == kExitConfig);
}

TEST_CASE("walk and curriculum outputs") {
  const auto dir = scratch("walk");
  REQUIRE(cli({"walk", "--out", dir.string(), "--distance_m", "0.5", "--dump_depth"}).code == kExitOk);
  for (const char* f : {"mae_trace.csv", "recon_heights.csv", "recon_valid.csv", "gt_heights.csv", "gt_valid.csv",
                        "memory_heights.csv", "memory_valid.csv", "memory_age.csv", "depth/depth_000000.pgm"})
    CHECK(fs::exists(dir / f));
  const std::string trace = slurp(dir / "mae_trace.csv");
  CHECK(trace.rfind("tick,mae_cm,valid_fraction\n", 0) == 0);

  const auto cdir = scratch("curr");
  REQUIRE(cli({"curriculum", "--out", cdir.string(), "--episodes", "200"}).code == kExitOk);
  const std::string sched = slurp(cdir / "schedule_trace.csv");
  CHECK(std::count(sched.begin(), sched.end(), '\n') == 201);
}

TEST_CASE("reruns are byte identical") {
  const auto a = scratch("det_a"), b = scratch("det_b");
  for (const auto& d : {a, b}) {
    REQUIRE(cli({"generate", "--out", (d / "g").string(), "--kind", "stepping_stones", "--seed", "9"}).code == 0);
    REQUIRE(cli({"curriculum", "--out", (d / "c").string(), "--episodes", "100"}).code == 0);
  }
  CHECK(tree_hash(a / "g") == tree_hash(b / "g"));
  CHECK(tree_hash(a / "c") == tree_hash(b / "c"));
  fs::remove_all(scratch(""));
}
