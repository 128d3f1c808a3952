#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#ifndef MGCN_CLI_PATH
#error "MGCN_CLI_PATH must point at the command-line binary"
#endif

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MGCN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string sub(const std::string& name) const { return (path / name).string(); }
};

// small but non-trivial settings shared by the pipeline-level cases
const char* kTinyTrainFlags =
    " --regions 40 --iters 60 --lr 0.01 --per-class 6 --fallback 3 --seed 1";

}  // namespace

TEST_CASE("synth writes the dataset files and is reproducible") {
  TempDir dir("mgcn_cli_synth");
  const std::string flags = "synth --h 24 --w 24 --bands 6 --classes 3 --seed 1 --out ";
  CHECK(run_cli(flags + dir.sub("a")) == 0);
  for (const char* name : {"cube.raw", "cube.hdr", "labels.raw", "labels.hdr"}) {
    CHECK(fs::exists(fs::path(dir.sub("a")) / name));
  }

  CHECK(run_cli(flags + dir.sub("b")) == 0);
  CHECK(slurp(fs::path(dir.sub("a")) / "cube.raw") == slurp(fs::path(dir.sub("b")) / "cube.raw"));
  CHECK(slurp(fs::path(dir.sub("a")) / "labels.raw") ==
        slurp(fs::path(dir.sub("b")) / "labels.raw"));
}

TEST_CASE("synth rejects infeasible layouts with exit code 2") {
  TempDir dir("mgcn_cli_synth_bad");
  CHECK(run_cli("synth --h 8 --w 8 --bands 4 --classes 2 --seed 1 --out " + dir.sub("x")) == 2);
}

TEST_CASE("unknown flags exit with the config code") {
  CHECK(run_cli("train --no-such-flag 1") == 2);
  CHECK(run_cli("definitely-not-a-subcommand") == 2);
}

TEST_CASE("train writes checkpoint, history, report, map and provenance") {
  TempDir dir("mgcn_cli_train");
  REQUIRE(run_cli("synth --h 24 --w 24 --bands 6 --classes 3 --seed 1 --out " + dir.sub("data")) ==
          0);
  REQUIRE(run_cli("train --data " + dir.sub("data") + " --out " + dir.sub("run") +
                  kTinyTrainFlags) == 0);
  for (const char* name :
       {"model.ckpt", "history.csv", "report.txt", "map.ppm", "run_config.json", "summary.txt"}) {
    CHECK(fs::exists(fs::path(dir.sub("run")) / name));
  }
  const std::string report = slurp(fs::path(dir.sub("run")) / "report.txt");
  CHECK(report.find("model MGCN-AGL\n") != std::string::npos);
  CHECK(report.find("oa ") != std::string::npos);

  SUBCASE("rerunning from the written config reproduces outputs bit-exactly") {
    const std::string ckpt = slurp(fs::path(dir.sub("run")) / "model.ckpt");
    const std::string history = slurp(fs::path(dir.sub("run")) / "history.csv");
    const std::string map = slurp(fs::path(dir.sub("run")) / "map.ppm");
    REQUIRE(run_cli("train --config " + (fs::path(dir.sub("run")) / "run_config.json").string()) ==
            0);
    CHECK(slurp(fs::path(dir.sub("run")) / "model.ckpt") == ckpt);
    CHECK(slurp(fs::path(dir.sub("run")) / "history.csv") == history);
    CHECK(slurp(fs::path(dir.sub("run")) / "map.ppm") == map);
  }
}

TEST_CASE("missing dataset files exit with the data code") {
  TempDir dir("mgcn_cli_missing");
  CHECK(run_cli("train --data " + dir.sub("nowhere") + " --out " + dir.sub("run") +
                kTinyTrainFlags) == 3);
}

TEST_CASE("the ablation switch labels the report") {
  TempDir dir("mgcn_cli_ablation");
  REQUIRE(run_cli("synth --h 24 --w 24 --bands 6 --classes 3 --seed 2 --out " + dir.sub("data")) ==
          0);
  REQUIRE(run_cli("train --data " + dir.sub("data") + " --out " + dir.sub("run") +
                  " --global-enabled=false" + kTinyTrainFlags) == 0);
  const std::string report = slurp(fs::path(dir.sub("run")) / "report.txt");
  CHECK(report.find("model MGCN-AGL-Loc\n") != std::string::npos);
}

TEST_CASE("multi-seed runs produce per-seed reports plus a mean/std summary") {
  TempDir dir("mgcn_cli_seeds");
  REQUIRE(run_cli("synth --h 24 --w 24 --bands 6 --classes 3 --seed 3 --out " + dir.sub("data")) ==
          0);
  REQUIRE(run_cli("train --data " + dir.sub("data") + " --out " + dir.sub("run") + " --seeds 3" +
                  kTinyTrainFlags) == 0);
  for (const char* seed_dir : {"seed_1", "seed_2", "seed_3"}) {
    CHECK(fs::exists(fs::path(dir.sub("run")) / seed_dir / "report.txt"));
  }
  const std::string summary = slurp(fs::path(dir.sub("run")) / "summary.txt");
  CHECK(summary.find("mean_oa ") != std::string::npos);
  CHECK(summary.find("std_oa ") != std::string::npos);
}

TEST_CASE("eval reproduces the train-time report and honors render-only") {
  TempDir dir("mgcn_cli_eval");
  REQUIRE(run_cli("synth --h 24 --w 24 --bands 6 --classes 3 --seed 4 --out " + dir.sub("data")) ==
          0);
  REQUIRE(run_cli("train --data " + dir.sub("data") + " --out " + dir.sub("run") +
                  kTinyTrainFlags) == 0);

  REQUIRE(run_cli("eval --checkpoint " + (fs::path(dir.sub("run")) / "model.ckpt").string() +
                  " --out " + dir.sub("eval")) == 0);
  CHECK(slurp(fs::path(dir.sub("eval")) / "report.txt") ==
        slurp(fs::path(dir.sub("run")) / "report.txt"));
  CHECK(slurp(fs::path(dir.sub("eval")) / "map.ppm") ==
        slurp(fs::path(dir.sub("run")) / "map.ppm"));

  SUBCASE("render-only emits just the map") {
    REQUIRE(run_cli("eval --render-only --checkpoint " +
                    (fs::path(dir.sub("run")) / "model.ckpt").string() + " --out " +
                    dir.sub("render")) == 0);
    CHECK(fs::exists(fs::path(dir.sub("render")) / "map.ppm"));
    CHECK_FALSE(fs::exists(fs::path(dir.sub("render")) / "report.txt"));
  }

  SUBCASE("region-level flag adds the debugging report") {
    REQUIRE(run_cli("eval --region-level --checkpoint " +
                    (fs::path(dir.sub("run")) / "model.ckpt").string() + " --out " +
                    dir.sub("regions")) == 0);
    const std::string regions = slurp(fs::path(dir.sub("regions")) / "report_regions.txt");
    CHECK(regions.find("(region-level)") != std::string::npos);
  }

  SUBCASE("mismatched band count exits with the data code") {
    REQUIRE(run_cli("synth --h 24 --w 24 --bands 4 --classes 3 --seed 4 --out " +
                    dir.sub("data4")) == 0);
    CHECK(run_cli("eval --checkpoint " + (fs::path(dir.sub("run")) / "model.ckpt").string() +
                  " --data " + dir.sub("data4") + " --out " + dir.sub("eval4")) == 3);
  }
}

TEST_CASE("label sweep emits the table and degenerates cleanly to one value") {
  TempDir dir("mgcn_cli_sweep");
  REQUIRE(run_cli("synth --h 24 --w 24 --bands 6 --classes 3 --seed 5 --out " + dir.sub("data")) ==
          0);

  SUBCASE("two label counts give two table rows with sane accuracy ordering") {
    REQUIRE(run_cli("sweep --what labels --values 3,6 --data " + dir.sub("data") + " --out " +
                    dir.sub("run") + kTinyTrainFlags) == 0);
    std::ifstream in(fs::path(dir.sub("run")) / "sweep.csv");
    std::string header, row3, row6;
    REQUIRE(std::getline(in, header));
    REQUIRE(std::getline(in, row3));
    REQUIRE(std::getline(in, row6));
    CHECK(header.rfind("labels,", 0) == 0);
    CHECK(row3.rfind("3,", 0) == 0);
    CHECK(row6.rfind("6,", 0) == 0);
    const double oa3 = std::stod(row3.substr(2));
    const double oa6 = std::stod(row6.substr(2));
    // more labels should not hurt beyond noise
    CHECK(oa6 >= oa3 - 0.15);
  }

  SUBCASE("a single value degenerates to one train run") {
    REQUIRE(run_cli("sweep --what labels --values 6 --data " + dir.sub("data") + " --out " +
                    dir.sub("single") + kTinyTrainFlags) == 0);
    CHECK(fs::exists(fs::path(dir.sub("single")) / "labels_6" / "report.txt"));
  }

  SUBCASE("s2 sweeps force s1 to one") {
    REQUIRE(run_cli("sweep --what s2 --values 2,3 --s1 2 --data " + dir.sub("data") + " --out " +
                    dir.sub("s2run") + kTinyTrainFlags) == 0);
    const std::string cfg = slurp(fs::path(dir.sub("s2run")) / "s2_3" / "run_config.json");
    CHECK(cfg.find("\"s1\": 1") != std::string::npos);
    CHECK(cfg.find("\"s2\": 3") != std::string::npos);
  }
}
