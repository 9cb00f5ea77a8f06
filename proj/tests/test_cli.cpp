#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using std::filesystem::path;

namespace {

const char* kDir = "cli_test_tmp";

struct TmpDir {
  TmpDir() {
    std::filesystem::remove_all(kDir);
    std::filesystem::create_directories(kDir);
  }
  ~TmpDir() { std::filesystem::remove_all(kDir); }
};

int run(const std::string& args, const std::string& log = "") {
  std::string cmd = std::string(TASNN_CLI_PATH) + " " + args;
  if (!log.empty()) {
    cmd += " >" + log + " 2>&1";
  } else {
    cmd += " >/dev/null 2>&1";
  }
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_tiny_config(const std::string& p) {
  std::ofstream out(p);
  out << R"({
    "aggregation": {"dt_us": 4000, "T": 10},
    "network": {"structure": "Input-MP4-4C3-8FC-3", "strategy": "S2",
                "neuron": "lif"},
    "train": {"epochs": 2, "batch": 6, "lr": 0.002, "seed": 5},
    "synth": {"width": 16, "height": 16, "classes": 3,
              "samples_per_class": 8, "duration_us": 80000,
              "signal_windows_us": [[0, 20000], [40000, 20000]],
              "noise_rate_per_pixel_us": 2e-6,
              "bar_length": 6, "bar_width": 2, "seed": 3,
              "train_fraction": 0.75}
  })";
}

}  // namespace

TEST_CASE("cli end-to-end: gen, train, eval, info, sweep") {
  TmpDir tmp;
  const std::string cfg = std::string(kDir) + "/cfg.json";
  const std::string data = std::string(kDir) + "/data";
  const std::string ckpt = std::string(kDir) + "/model.ckpt";
  write_tiny_config(cfg);

  CHECK(run("gen --config " + cfg + " --out " + data) == 0);
  CHECK(std::filesystem::exists(data + "/dataset.json"));
  CHECK(std::filesystem::exists(data + "/index.csv"));

  const std::string train_log = std::string(kDir) + "/train.log";
  CHECK(run("train --config " + cfg + " --data " + data + " --out " + ckpt,
            train_log) == 0);
  const std::string log = slurp(train_log);
  CHECK(log.find("resolved_config=") != std::string::npos);
  CHECK(log.find("epoch=1 ") != std::string::npos);
  CHECK(log.find("epoch=2 ") != std::string::npos);
  CHECK(std::filesystem::exists(ckpt));

  // identity pruning: --iap 0 equals no pruning
  const std::string ev_none = std::string(kDir) + "/e0.log";
  const std::string ev_iap0 = std::string(kDir) + "/e1.log";
  CHECK(run("eval --ckpt " + ckpt + " --data " + data + " --crops 4 --out " +
                std::string(kDir) + "/r0.csv",
            ev_none) == 0);
  CHECK(run("eval --ckpt " + ckpt + " --data " + data +
                " --crops 4 --iap 0 --out " + std::string(kDir) + "/r1.csv",
            ev_iap0) == 0);
  const auto pick_acc = [](const std::string& text) {
    const std::size_t at = text.find("\naccuracy=");
    return text.substr(at + 1, text.find('\n', at + 1) - at - 1);
  };
  CHECK(pick_acc(slurp(ev_none)) == pick_acc(slurp(ev_iap0)));

  const std::string info_log = std::string(kDir) + "/info.log";
  CHECK(run("info --ckpt " + ckpt + " --proportion 0.5", info_log) == 0);
  CHECK(slurp(info_log).find("ta_overhead_pct=") != std::string::npos);

  const std::string sweep_csv = std::string(kDir) + "/sweep.csv";
  CHECK(run("sweep --ckpt " + ckpt + " --data " + data +
            " --proportions 0,0.5 --method iap --crops 2 --out " +
            sweep_csv) == 0);
  const std::string sweep = slurp(sweep_csv);
  CHECK(sweep.find("proportion,accuracy_mean,accuracy_std,"
                   "flops_reduction_pct") == 0);

  // irp path with seeds
  CHECK(run("eval --ckpt " + ckpt + " --data " + data +
            " --crops 2 --irp 0.5 --seeds 3 --out " + std::string(kDir) +
            "/r2.csv") == 0);
}

TEST_CASE("cli training is reproducible byte for byte") {
  TmpDir tmp;
  const std::string cfg = std::string(kDir) + "/cfg.json";
  const std::string data = std::string(kDir) + "/data";
  write_tiny_config(cfg);
  REQUIRE(run("gen --config " + cfg + " --out " + data) == 0);

  const std::string a = std::string(kDir) + "/a.ckpt";
  const std::string b = std::string(kDir) + "/b.ckpt";
  CHECK(run("train --config " + cfg + " --data " + data + " --out " + a +
            " --seed 7 --deterministic") == 0);
  CHECK(run("train --config " + cfg + " --data " + data + " --out " + b +
            " --seed 7 --deterministic") == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(!slurp(a).empty());
}

TEST_CASE("cli gradcheck on the shipped tiny analog config") {
  const std::string log = std::string("gradcheck.log");
  const int rc = run(std::string("gradcheck --config ") + TASNN_CONFIG_DIR +
                         "/tiny_liaf.json",
                     log);
  const std::string text = slurp(log);
  INFO(text);
  CHECK(rc == 0);
  CHECK(text.find("max_rel_error=") != std::string::npos);
  std::filesystem::remove(log);
}

TEST_CASE("cli exit codes distinguish config and data errors") {
  TmpDir tmp;
  const std::string bad_cfg = std::string(kDir) + "/bad.json";
  {
    std::ofstream out(bad_cfg);
    out << R"({"train":{"momentum":0.9}})";
  }
  CHECK(run("gen --config " + bad_cfg + " --out " + kDir + "/x") == 1);
  CHECK(run("eval --ckpt no_such.ckpt --data nowhere") == 2);
  CHECK(run("definitely-not-a-subcommand") == 1);
}
