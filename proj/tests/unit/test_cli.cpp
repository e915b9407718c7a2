#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>

#include "pgc/graph.hpp"
#include "../support/test_graphs.hpp"

namespace fs = std::filesystem;
using namespace pgc;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(PGC_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct ToyDir {
  fs::path root = fs::temp_directory_path() / ("pgc_cli_" + std::to_string(std::random_device{}()));
  ToyDir() {
    Dataset ds;
    ds.name = "TOY";
    ds.num_classes = 2;
    ds.feature_dim = 2;
    ds.has_node_labels = true;
    for (std::size_t n = 4; n < 12; ++n) {
      std::vector<int> labels(n, 0);
      labels[0] = 1;
      ds.graphs.push_back(testing::cycle_graph(n, 0, testing::one_hot(labels, 2)));
      ds.graphs.push_back(testing::path_graph(n, 1, testing::one_hot(labels, 2)));
    }
    write_tu_dataset(ds, root / "TOY");
  }
  ~ToyDir() {
    std::error_code ec;
    fs::remove_all(root, ec);
  }
};

}  // namespace

TEST_CASE("successful training writes the report files") {
  ToyDir toy;
  const fs::path out = toy.root / "out";
  const Run r = run("train --dataset TOY --data-dir " + toy.root.string() +
                    " --folds 2 --repeats 1 --epochs 2 --out " + out.string());
  INFO(r.out);
  CHECK(r.code == 0);
  CHECK(fs::exists(out / "folds.csv"));
  CHECK(fs::exists(out / "summary.txt"));
}

TEST_CASE("configuration errors exit with 1") {
  ToyDir toy;
  const std::string base = "train --dataset TOY --data-dir " + toy.root.string();
  CHECK(run(base + " --mode ecc").code == 1);
  CHECK(run(base + " --k abc").code == 1);
  CHECK(run(base + " --folds 1").code == 1);
  CHECK(run(base + " --r -2").code == 1);
  CHECK(run("train").code == 1);
  CHECK(run("no-such-command").code == 1);
}

TEST_CASE("data errors exit with 2") {
  ToyDir toy;
  const Run r = run("inspect-dataset --dataset NOPE --data-dir " + toy.root.string());
  CHECK(r.code == 2);
  CHECK(r.out.find("NOPE") != std::string::npos);
}

TEST_CASE("numerical failures exit with 3") {
  ToyDir toy;
  const Run r = run("train --dataset TOY --data-dir " + toy.root.string() +
                    " --folds 2 --repeats 1 --epochs 3 --lr 1e300 --out " +
                    (toy.root / "out").string());
  CHECK(r.code == 3);
}

TEST_CASE("inspect-dataset prints the statistics table") {
  ToyDir toy;
  const Run r = run("inspect-dataset --dataset TOY --data-dir " + toy.root.string());
  CHECK(r.code == 0);
  CHECK(r.out.find("16") != std::string::npos);
}

TEST_CASE("gradcheck passes") {
  const Run r = run("gradcheck");
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
}
