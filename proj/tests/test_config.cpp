#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>

#include "cil/analysis.hpp"
#include "cil/config.hpp"
#include "cil/errors.hpp"

using namespace cil;

namespace {

RunConfig fast_config() {
  RunConfig cfg;
  cfg.blobs_classes = 4;
  cfg.blobs_per_class = 20;
  cfg.blobs_dim = 8;
  cfg.split_base = 2;
  cfg.split_inc = 2;
  cfg.schedule.epochs_base = 15;
  cfg.schedule.epochs_inc = 10;
  cfg.schedule.batch = 16;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("parse: defaults, comments, whitespace") {
  RunConfig cfg = parse_config_text(
      "# comment line\n"
      "\n"
      "  dataset = blobs  \n"
      "blobs.classes = 6\n"
      "loss.lambda = 0.25\n"
      "wiring = serial\n"
      "seed = 42\n");
  CHECK(cfg.dataset == "blobs");
  CHECK(cfg.blobs_classes == 6);
  CHECK(cfg.loss.lambda == 0.25);
  CHECK(cfg.wiring == "serial");
  CHECK(cfg.seed == 42);
  CHECK(cfg.schedule.seed == 42);
  CHECK(cfg.schedule.epochs_base == 100);  // untouched default
}

TEST_CASE("parse: diagnostics name the key and line") {
  try {
    parse_config_text("blobs.classes = 6\nnonsense.key = 1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("nonsense.key") != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config_text("schedule.lr0 = fast\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("loss.lambda = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("schedule.batch = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("just a line\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("head = mlp\n"), ConfigError);
}

TEST_CASE("normalize round-trips through the parser") {
  RunConfig cfg = fast_config();
  cfg.loss.lambda = 0.7;
  cfg.wiring = "serial";
  const std::string text = normalize_config(cfg);
  RunConfig again = parse_config_text(text);
  CHECK(normalize_config(again) == text);
}

TEST_CASE("run_config completes and reports are deterministic") {
  RunConfig cfg = fast_config();
  RunReport a = run_config(cfg);
  RunReport b = run_config(cfg);
  a.config_echo = b.config_echo;  // identical anyway
  CHECK(report_to_json(a) == report_to_json(b));
  CHECK(a.stages.size() == 2);
  CHECK(a.forbidden_reads == 0);
}

TEST_CASE("run_config rejects undersized classifiers before running") {
  RunConfig cfg = fast_config();
  cfg.etf_dim = 2;
  try {
    run_config(cfg);
    FAIL("expected CapacityError");
  } catch (const CapacityError& e) {
    CHECK(std::string(e.what()).find("capacity") != std::string::npos);
  }
}

TEST_CASE("delimited dataset feeds a run") {
  Dataset ds = make_blobs(4, 20, 6, 2.0, 0.2, 5);
  const std::string path = "/tmp/cil_cfg_data.csv";
  save_delimited(ds, path);

  RunConfig cfg = fast_config();
  cfg.dataset = "delimited";
  cfg.data_path = path;
  RunReport r = run_config(cfg);
  CHECK(r.stages.size() == 2);
  std::remove(path.c_str());
}

TEST_CASE("report files land in the output directory") {
  RunConfig cfg = fast_config();
  RunReport r = run_config(cfg);
  const std::string dir = "/tmp/cil_report_dir";
  write_report(r, dir);
  for (const char* name : {"report.json", "accuracy.csv", "cka.csv", "drift.csv"}) {
    std::ifstream f(dir + "/" + name);
    CHECK(f.good());
  }
  std::ifstream f(dir + "/report.json");
  std::ostringstream os;
  os << f.rdbuf();
  CHECK(os.str() == report_to_json(r));
}
