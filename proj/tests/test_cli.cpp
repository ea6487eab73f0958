#include "doctest.h"

#include <cstdlib>
#include <fstream>

#include <sys/wait.h>

#include "cogmark/features.hpp"
#include "cogmark/learners.hpp"
#include "support.hpp"

using namespace cogmark;

namespace {

struct Result {
  int status;
  std::string out;
};

Result cli(const test::TempDir& dir, const std::string& args) {
  const auto log = dir / "cli.log";
  const std::string cmd = std::string(COGMARK_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, test::read_bytes(log)};
}

void write_spec(const test::TempDir& dir) {
  std::ofstream(dir / "spec.json") << R"({"train_counts": [9, 8, 6], "dev_counts": [4, 4, 3],
    "embedding_dim": 32, "informative_dims": 8, "frames": [2, 3], "separation": 3.0, "seed": 2})";
}

}  // namespace

TEST_CASE("cli: end to end on a small cohort") {
  test::TempDir dir("cli");
  write_spec(dir);
  const std::string c = (dir / "cohort").string();
  auto r = cli(dir, "synth --spec " + (dir / "spec.json").string() + " --out " + c);
  REQUIRE_MESSAGE(r.status == 0, r.out);
  CHECK(r.out.find("participants\t34") != std::string::npos);

  r = cli(dir, "validate --manifest " + c + "/manifest.csv");
  CHECK_MESSAGE(r.status == 0, r.out);

  r = cli(dir, "features --manifest " + c + "/manifest.csv --out " + (dir / "features.csv").string());
  REQUIRE_MESSAGE(r.status == 0, r.out);
  const auto table = load_feature_table(dir / "features.csv");
  CHECK(table.columns.size() == 42);
  CHECK(table.rows.size() == 34);

  const std::string rc = (dir / "run.json").string();
  std::ofstream(rc) << R"({"embedding_dim": 32, "k": 3, "grid_search": false})";

  r = cli(dir, "cv --config " + rc + " --manifest " + c + "/train.csv --dev-manifest " + c +
                   "/dev.csv --model-config cls1 --out " + (dir / "cv.json").string());
  REQUIRE_MESSAGE(r.status == 0, r.out);
  CHECK(r.out.find("fold\t2\tmacro_f1") != std::string::npos);

  r = cli(dir, "train --config " + rc + " --manifest " + c + "/train.csv --model-config cls2 --out " +
                   (dir / "model").string());
  REQUIRE_MESSAGE(r.status == 0, r.out);
  r = cli(dir, "predict --config " + rc + " --model " + (dir / "model" / "model.bin").string() + " --manifest " + c +
                   "/dev.csv --out " + (dir / "pred.csv").string());
  REQUIRE_MESSAGE(r.status == 0, r.out);
  r = cli(dir, "evaluate --manifest " + c + "/dev.csv --predictions " + (dir / "pred.csv").string() + " --out " +
                   (dir / "eval.json").string());
  REQUIRE_MESSAGE(r.status == 0, r.out);
  const auto report = Json::parse(test::read_bytes(dir / "eval.json"));
  CHECK(report["n"] == 11);

  // Two runs with the same seed write the same bytes.
  for (const char* out : {"run1", "run2"}) {
    r = cli(dir, "run --config " + rc + " --seed 4 --manifest " + c + "/train.csv --test-manifest " + c +
                     "/dev.csv --model-config cls1 --out " + (dir / out).string());
    REQUIRE_MESSAGE(r.status == 0, r.out);
  }
  for (const char* f : {"predictions.csv", "report.json", "model.bin"}) {
    CHECK(test::read_bytes(dir / "run1" / f) == test::read_bytes(dir / "run2" / f));
  }
}

TEST_CASE("cli: errors are typed and exit nonzero") {
  test::TempDir dir("cli_err");
  auto r = cli(dir, "train --model-config cls9 --manifest nowhere.csv --out x");
  CHECK(r.status != 0);
  CHECK(r.out.find("error\t") != std::string::npos);

  std::ofstream(dir / "bad.json") << R"({"k": 5, "mystery": true})";
  r = cli(dir, "config --check " + (dir / "bad.json").string());
  CHECK(r.status == 1);
  CHECK(r.out.find("InvalidConfig") != std::string::npos);

  r = cli(dir, "validate --manifest " + (dir / "missing.csv").string());
  CHECK(r.status == 2);
  CHECK(r.out.find("IoFailure") != std::string::npos);

  r = cli(dir, "config --dump");
  CHECK(r.status == 0);
  std::ofstream(dir / "dumped.json") << r.out;
  CHECK(cli(dir, "config --check " + (dir / "dumped.json").string()).status == 0);

  CHECK(cli(dir, "frobnicate").status != 0);
}
