// End-to-end checks of the command-line front end. Each case shells out to
// the built binary inside a scratch directory and inspects exit codes and
// produced files.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
  if (ok) {
    std::cout << "[ok] " << what << "\n";
  } else {
    ++failures;
    std::cout << "[FAILED] " << what << "\n";
  }
}

int run(const std::string& args) {
  const std::string command = std::string(FEDET_CLI_PATH) + " " + args +
                              " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream file(path);
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return buffer.str();
}

void write_config(const fs::path& path, const std::string& extra) {
  std::ofstream file(path);
  file << "K = 6\n"
          "m = 2\n"
          "U = 2\n"
          "N = 4\n"
          "d = 6\n"
          "u = 8\n"
          "alpha = 0.5\n"
          "tau = 4\n"
          "b = 8\n"
          "eta = 0.05\n"
          "tau_s = 4\n"
          "b_s = 12\n"
          "eta_s = 0.02\n"
          "lambda = 0.05\n"
          "seed = 5\n"
          "small_widths = 4 | 8\n"
          "server_widths = 20,12\n"
          "train_per_class = 50\n"
          "public_per_class = 10\n"
          "test_per_class = 15\n"
       << extra;
}

}  // namespace

int main() {
  fs::path dir = fs::temp_directory_path() /
                 ("fedet-cli-" + std::to_string(::getpid()));
  fs::create_directories(dir);

  check(run("definitely-not-a-command") == 1, "unknown command exits 1");
  check(run("train") == 1, "train without --config exits 1");
  check(run("--help") == 0, "--help exits 0");

  const fs::path t0 = dir / "t0.cfg";
  write_config(t0, "T = 0\nmetrics_path = " + (dir / "t0.csv").string() +
                       "\ncheckpoint_path = " + (dir / "t0.ckpt").string() +
                       "\n");
  check(run("train --config " + t0.string()) == 0, "T=0 train exits 0");
  {
    const std::string metrics = slurp(dir / "t0.csv");
    check(metrics.find('\n') == metrics.size() - 1,
          "T=0 metrics file is header-only");
  }

  check(run("train --config " + (dir / "absent.cfg").string()) == 2,
        "missing config file exits 2");

  const fs::path bad = dir / "bad.cfg";
  {
    std::ofstream file(bad);
    file << "K = 4\nwhatever = 1\n";
  }
  check(run("train --config " + bad.string()) == 2,
        "unknown config key exits 2");

  // gen-data writes the three splits; partition writes K shard files.
  const fs::path gen = dir / "gen.cfg";
  write_config(gen, "T = 1\n");
  check(run("gen-data --config " + gen.string() + " --out " +
            (dir / "data").string()) == 0,
        "gen-data exits 0");
  check(fs::exists(dir / "data" / "train.csv") &&
            fs::exists(dir / "data" / "public.csv") &&
            fs::exists(dir / "data" / "test.csv"),
        "gen-data writes train/public/test CSVs");
  check(run("partition --config " + gen.string() + " --out " +
            (dir / "shards").string()) == 0,
        "partition exits 0");
  {
    std::size_t shard_files = 0;
    for (const auto& entry : fs::directory_iterator(dir / "shards")) {
      (void)entry;
      ++shard_files;
    }
    check(shard_files == 6, "partition writes one CSV per client");
  }

  // A short train, then eval on the written checkpoint, then the library
  // path equivalence: --out must override the metrics path.
  const fs::path trained = dir / "train.cfg";
  write_config(trained,
               "T = 2\nmetrics_path = " + (dir / "train.csv").string() +
                   "\ncheckpoint_path = " + (dir / "train.ckpt").string() +
                   "\n");
  check(run("train --config " + trained.string()) == 0, "train exits 0");
  check(run("eval --checkpoint " + (dir / "train.ckpt").string() +
            " --data " + (dir / "data" / "test.csv").string()) == 0,
        "eval exits 0 on the checkpoint");
  {
    // Data of the wrong dimensionality cannot be evaluated.
    std::ofstream file(dir / "narrow.csv");
    file << "label,f0,f1\n0,0.5,0.5\n";
  }
  check(run("eval --checkpoint " + (dir / "train.ckpt").string() +
            " --data " + (dir / "narrow.csv").string()) == 2,
        "eval on mismatched data exits 2");
  check(run("train --config " + trained.string() + " --out " +
            (dir / "override.csv").string()) == 0 &&
            fs::exists(dir / "override.csv"),
        "--out overrides the metrics path");
  check(slurp(dir / "override.csv") == slurp(dir / "train.csv"),
        "flag override reproduces the config-path run byte for byte");

  check(run("bound-report --config " + trained.string() + " --checkpoint " +
            (dir / "train.ckpt").string() + " --out " +
            (dir / "bound").string()) == 0,
        "bound-report exits 0");
  check(fs::exists(dir / "bound.csv") && fs::exists(dir / "bound.txt"),
        "bound-report writes CSV and text outputs");

  // Training from the exported CSVs must reproduce the generated-in-memory
  // run byte for byte: the 17-digit CSV round trip is exact.
  const fs::path loaded = dir / "loaded.cfg";
  write_config(loaded,
               "T = 2\nmetrics_path = " + (dir / "loaded.csv").string() +
                   "\ncheckpoint_path = " + (dir / "loaded.ckpt").string() +
                   "\ntrain_path = " + (dir / "data" / "train.csv").string() +
                   "\npublic_path = " + (dir / "data" / "public.csv").string() +
                   "\ntest_path = " + (dir / "data" / "test.csv").string() +
                   "\n");
  check(run("train --config " + loaded.string()) == 0,
        "train from dataset CSVs exits 0");
  check(slurp(dir / "loaded.csv") == slurp(dir / "train.csv"),
        "CSV-loaded run reproduces the generated run byte for byte");

  // Sweep over three lambda values: three metrics files plus the
  // comparison CSV.
  const fs::path sweep = dir / "sweep.cfg";
  write_config(sweep, "T = 1\nmetrics_path = " + (dir / "s.csv").string() +
                          "\ncheckpoint_path = " + (dir / "s.ckpt").string() +
                          "\n");
  check(run("sweep-lambda --config " + sweep.string() +
            " --values 0,0.05,0.5 --out " + (dir / "sweep").string()) == 0,
        "sweep-lambda exits 0");
  {
    std::size_t metric_files = 0;
    for (const auto& entry : fs::directory_iterator(dir / "sweep")) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("metrics_lambda_", 0) == 0) ++metric_files;
    }
    check(metric_files == 3, "sweep writes one metrics file per lambda");
    const std::string comparison = slurp(dir / "sweep" / "sweep_comparison.csv");
    std::size_t rows = 0;
    for (char c : comparison) {
      if (c == '\n') ++rows;
    }
    check(rows == 4, "sweep comparison has a header plus three rows");
  }

  fs::remove_all(dir);
  if (failures == 0) {
    std::cout << "all cli checks passed\n";
    return 0;
  }
  std::cout << failures << " cli check(s) failed\n";
  return 1;
}
