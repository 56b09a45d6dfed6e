#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "fixtures.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string output;
};

Run cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "cli.log";
  const std::string cmd = std::string(MAXCORR_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t lines(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& extra_train,
                      const std::string& data = "") {
  const fs::path p = dir / name;
  const std::string data_block =
      data.empty() ? R"("synthetic": {"patients": 60, "feature_dims": [6, 8, 5], "latent_dim": 4})"
                   : data;
  std::ofstream(p) << R"({"data": {)" << data_block << R"(},
 "model": {"projection_dim": 8, "hidden_width": 8, "mgnn_width": 8},
 "train": {"lr": 0.01, "epochs": 6, "pretrain_epochs": 4, "batch_size": 16)"
                   << extra_train << R"(},
 "output": {"dir": ")" << (dir / "run").string() << R"("},
 "eval": {"report": ")" << (dir / "report.csv").string() << R"("}})";
  return p;
}

}  // namespace

TEST_CASE("synth writes a dataset and refuses to overwrite without --force") {
  fixture::TempDir dir("cli_synth");
  const auto cfg = write_config(dir.path, "c.json", "");
  const fs::path out = dir.path / "data";
  auto r = cli("synth --config " + cfg.string() + " --out " + out.string(), dir.path);
  CHECK(r.code == 0);
  CHECK(fs::exists(out / "labels.csv"));
  CHECK(lines(out / "labels.csv") == 61);
  CHECK(fs::exists(out / "modality_00.csv"));
  r = cli("synth --config " + cfg.string() + " --out " + out.string(), dir.path);
  CHECK(r.code == 1);
  CHECK(r.output.find("--force") != std::string::npos);
  CHECK(cli("synth --config " + cfg.string() + " --out " + out.string() + " --force", dir.path).code == 0);

  // The written dataset trains from a path config.
  const auto from_disk = write_config(dir.path, "disk.json", "", R"("path": ")" + out.string() + "\"");
  CHECK(cli("train --config " + from_disk.string(), dir.path).code == 0);
}

TEST_CASE("train, eval, compare and export-graph end to end") {
  fixture::TempDir dir("cli_e2e");
  const auto cfg = write_config(dir.path, "full.json", "");
  const auto abl = write_config(dir.path, "abl.json", R"(, "lambda": 0.0)");
  const fs::path run = dir.path / "run";

  auto r = cli("train --config " + cfg.string(), dir.path);
  REQUIRE(r.code == 0);
  CHECK(lines(run / "history.csv") == 7);
  const std::string ckpt_a = (dir.path / "a.json").string();
  fs::copy_file(run / "checkpoint.json", ckpt_a);
  REQUIRE(cli("train --config " + abl.string(), dir.path).code == 0);
  const std::string ckpt_b = (dir.path / "b.json").string();
  fs::copy_file(run / "checkpoint.json", ckpt_b);

  SUBCASE("eval") {
    r = cli("eval --config " + cfg.string() + " --checkpoint " + ckpt_a, dir.path);
    CHECK(r.code == 0);
    const std::string report = slurp(dir.path / "report.csv");
    CHECK(report.rfind("split,n,weighted_auc,auc_Died,", 0) == 0);
    CHECK(lines(dir.path / "report.csv") == 2);

    r = cli("eval --config " + cfg.string() + " --checkpoint " + ckpt_a + " --on-train --out " +
                (dir.path / "train_report.csv").string(),
            dir.path);
    CHECK(r.code == 0);
    CHECK(r.output.find("train weighted AUROC") != std::string::npos);

    r = cli("eval --config " + cfg.string() + " --checkpoint " + (dir.path / "nope.json").string(),
            dir.path);
    CHECK(r.code == 1);
  }

  SUBCASE("eval over several splits adds mean and stderr rows") {
    const fs::path multi = dir.path / "multi.json";
    std::string text = slurp(cfg);
    text.replace(text.find(R"("eval": {)"), 9, R"("eval": {"n_splits": 2, )");
    std::ofstream(multi) << text;
    r = cli("eval --config " + multi.string() + " --checkpoint " + ckpt_a, dir.path);
    CHECK(r.code == 0);
    const std::string report = slurp(dir.path / "report.csv");
    CHECK(lines(dir.path / "report.csv") == 5);
    CHECK(report.find("\nmean,") != std::string::npos);
    CHECK(report.find("\nstderr,") != std::string::npos);
  }

  SUBCASE("compare") {
    r = cli("compare --config " + cfg.string() + " --checkpoint " + ckpt_a + " --checkpoint " + ckpt_b,
            dir.path);
    CHECK(r.code == 0);
    CHECK(slurp(dir.path / "report.csv").rfind("class,auc_a,auc_b,auc_diff,variance,z,p_value,significant\n", 0) == 0);
    CHECK(lines(dir.path / "report.csv") == 6);

    // A checkpoint trained on another split cannot be paired.
    REQUIRE(cli("train --config " + cfg.string() + " --seed 99", dir.path).code == 0);
    r = cli("compare --config " + cfg.string() + " --checkpoint " + ckpt_a + " --checkpoint " +
                (run / "checkpoint.json").string(),
            dir.path);
    CHECK(r.code == 1);
    CHECK(r.output.find("split") != std::string::npos);
  }

  SUBCASE("export-graph") {
    const fs::path edges = dir.path / "g.csv";
    r = cli("export-graph --config " + cfg.string() + " --checkpoint " + ckpt_a + " --out " +
                edges.string() + " --threshold-offset -0.5",
            dir.path);
    CHECK(r.code == 0);
    CHECK(fs::exists(dir.path / "g.thresholds.csv"));
    const std::size_t dense = lines(edges);
    r = cli("export-graph --config " + cfg.string() + " --checkpoint " + ckpt_a + " --out " +
                edges.string() + " --threshold-offset 0.3",
            dir.path);
    CHECK(r.code == 0);
    CHECK(lines(edges) <= dense);
  }
}

TEST_CASE("configuration and data errors exit with status 1") {
  fixture::TempDir dir("cli_err");
  const fs::path bad = dir.path / "bad.json";
  std::ofstream(bad) << R"({"data": {"synthetic": {}}, "train": {"lamda": 0.1}})";
  auto r = cli("train --config " + bad.string(), dir.path);
  CHECK(r.code == 1);
  CHECK(r.output.find("train.lamda") != std::string::npos);

  CHECK(cli("train", dir.path).code == 1);
  CHECK(cli("train --config " + (dir.path / "none.json").string(), dir.path).code == 1);

  // A checkpoint scored against data with a different feature count.
  const auto cfg = write_config(dir.path, "c.json", R"(, "epochs": 1, "pretrain_epochs": 0)");
  REQUIRE(cli("train --config " + cfg.string(), dir.path).code == 0);
  const auto wider = write_config(
      dir.path, "w.json", "",
      R"("synthetic": {"patients": 60, "feature_dims": [7, 8, 5], "latent_dim": 4})");
  r = cli("eval --config " + wider.string() + " --checkpoint " + (dir.path / "run/checkpoint.json").string(),
          dir.path);
  CHECK(r.code == 1);
  CHECK(r.output.find("proj.0.fc1.weight") != std::string::npos);
}

TEST_CASE("a diverging run exits with status 2 and leaves a diagnostic") {
  fixture::TempDir dir("cli_nan");
  const fs::path data = dir.path / "data";
  fs::create_directories(data);
  std::ofstream labels(data / "labels.csv"), a(data / "a.csv"), b(data / "b.csv");
  labels << "patient_id,label\n";
  a << "patient_id,x,y\n";
  b << "patient_id,u\n";
  for (int i = 0; i < 30; ++i) {
    labels << "p" << i << "," << i % 5 << "\n";
    a << "p" << i << "," << (i % 2 ? 1e300 : -1e300) << ",1e300\n";
    b << "p" << i << "," << (i % 3 ? 1e300 : -1e300) << "\n";
  }
  labels.close();
  a.close();
  b.close();
  const auto cfg = write_config(dir.path, "c.json", "", R"("path": ")" + data.string() + "\"");
  const auto r = cli("train --config " + cfg.string(), dir.path);
  CHECK(r.code == 2);
  CHECK(fs::exists(dir.path / "run" / "diagnostic.txt"));
}
