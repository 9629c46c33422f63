#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "ngil/csbm.hpp"
#include "ngil/errors.hpp"
#include "ngil/io.hpp"
#include "ngil/sha256.hpp"

using namespace ngil;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           fs::path("ngil-test-" + std::to_string(::getpid()) + "-" +
                    std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string str() const { return path.string(); }
};

BundleData tiny_bundle() {
  BundleData data;
  VertexBatch b;
  b.task_index = 1;
  b.classes = {0, 1};
  b.vertices = {0, 1, 2};
  b.labels = {0, 0, 1};
  b.split.assign(3, Split::unassigned);
  data.batches.push_back(b);
  data.edges = {{0, 1}};
  data.features = Matrix::Zero(3, 2);
  data.features << 0.25, -1.5, 3.141592653589793, 0.1, -0.75, 2.0;
  data.labels = {0, 0, 1};
  data.tasks.push_back({1, 0, 1});
  return data;
}

void corrupt_line(const fs::path& file, const std::string& new_content) {
  std::ofstream out(file, std::ios::binary);
  out << new_content;
}

}  // namespace

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("minimal bundle round-trips identically") {
  TempDir dir;
  const BundleData data = tiny_bundle();
  write_graph_bundle(dir.str(), data);
  const BundleData loaded = load_graph_bundle(dir.str());
  CHECK(loaded.edges == data.edges);
  CHECK(loaded.labels == data.labels);
  CHECK(loaded.tasks == data.tasks);
  CHECK((loaded.features - data.features).lpNorm<Eigen::Infinity>() == 0.0);
  REQUIRE(loaded.batches.size() == 1);
  CHECK(loaded.batches[0].vertices == data.batches[0].vertices);
  CHECK(loaded.batches[0].classes == data.batches[0].classes);
}

TEST_CASE("bundle validation errors") {
  TempDir dir;
  write_graph_bundle(dir.str(), tiny_bundle());

  SUBCASE("checksum mismatch") {
    corrupt_line(dir.path / "features.csv", "9,9\n9,9\n9,9\n");
    CHECK_THROWS_WITH_AS(load_graph_bundle(dir.str()), doctest::Contains("checksum"),
                         BundleError);
  }
  SUBCASE("u >= v rejected at write time") {
    BundleData bad = tiny_bundle();
    bad.edges = {{1, 0}};
    TempDir dir2;
    CHECK_THROWS_AS(write_graph_bundle(dir2.str(), bad), BundleError);
  }
}

TEST_CASE("duplicate edge line is named when checksums agree") {
  TempDir dir;
  BundleData data = tiny_bundle();
  data.edges = {{0, 1}, {0, 1}};
  write_graph_bundle(dir.str(), data);
  CHECK_THROWS_WITH_AS(load_graph_bundle(dir.str()), doctest::Contains("line 2"), BundleError);
}

TEST_CASE("label with a class outside every task is rejected") {
  TempDir dir;
  BundleData data = tiny_bundle();
  data.labels[2] = 9;
  data.batches[0].labels[2] = 9;
  write_graph_bundle(dir.str(), data);
  CHECK_THROWS_WITH_AS(load_graph_bundle(dir.str()), doctest::Contains("line 3"), BundleError);
}

TEST_CASE("csbm bundle reloads into the generated sequence") {
  CsbmParams params = CsbmParams::symmetric(2, 1.0, 1.0, 0.2, 0.1, {{10, 10}, {8, 12}});
  const CsbmSequence seq = generate_csbm(params, 99);
  TempDir dir;
  write_graph_bundle(dir.str(), bundle_from_sequence(seq));
  const SequenceData loaded = load_bundle_sequence(dir.str());
  REQUIRE(loaded.snapshots.size() == 2);
  for (std::size_t t = 0; t < 2; ++t) {
    const GraphSnapshot& a = seq.snapshots[t];
    const GraphSnapshot& b = loaded.snapshots[t];
    CHECK(a.size() == b.size());
    CHECK(a.edge_count() == b.edge_count());
    CHECK((a.features - b.features).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(a.adjacency == b.adjacency);
    CHECK(loaded.batches[t].vertices == seq.batches[t].vertices);
    CHECK(loaded.batches[t].labels == seq.batches[t].labels);
  }
}

TEST_CASE("performance matrix round-trip and artifact consistency") {
  TempDir dir;
  PerformanceMatrix m;
  m.append_row({0.9});
  m.append_row({0.8, 0.85});
  const std::string path = (dir.path / "matrix.csv").string();
  write_performance_matrix(m, path);
  const PerformanceMatrix loaded = load_performance_matrix(path);
  REQUIRE(loaded.tasks() == 2);
  CHECK(loaded.entry(2, 1) == doctest::Approx(0.8).epsilon(1e-9));

  const MetricsReport r = compute_metrics(loaded);
  CHECK(r.fap == doctest::Approx(0.825).epsilon(1e-9));
}

TEST_CASE("run artifacts: write, reload, recompute") {
  TempDir dir;
  RunResult result;
  result.config.csbm_plan = "4:4,4:4";
  result.config.out_dir = dir.str();
  result.matrix.append_row({0.9});
  result.matrix.append_row({0.8, 0.85});
  result.metrics = compute_metrics(result.matrix);
  result.losses.push_back({1, 0, 1.0, 1.0, 0.0, 0.0, 0.0});
  result.status = "ok";
  write_run_artifacts(result, dir.str());

  for (const char* name : {"config.json", "matrix.csv", "metrics.json", "losses.csv",
                           "manifest.json"}) {
    CHECK(fs::exists(dir.path / name));
  }
  // stored metrics must be recomputable from the stored matrix to 1e-9
  const PerformanceMatrix stored = load_performance_matrix((dir.path / "matrix.csv").string());
  const MetricsReport recomputed = compute_metrics(stored);
  std::ifstream metrics_in(dir.path / "metrics.json");
  std::string metrics_text((std::istreambuf_iterator<char>(metrics_in)),
                           std::istreambuf_iterator<char>());
  const double stored_fap = std::stod(metrics_text.substr(metrics_text.find("\"fap\": ") + 7));
  CHECK(std::abs(stored_fap - recomputed.fap) <= 1e-9);

  // config echo replays into the same config
  const ExperimentConfig echoed = config_from_json_file((dir.path / "config.json").string());
  CHECK(echoed.csbm_plan == "4:4,4:4");
  CHECK(config_to_json(echoed) == config_to_json(result.config));
}

TEST_CASE("aborted runs leave partial artifacts and a marker") {
  TempDir dir;
  RunResult result;
  result.config.csbm_plan = "4:4";
  result.matrix.append_row({0.5});
  result.status = "aborted";
  result.error = "non-finite loss at task 2 epoch 3";
  write_run_artifacts(result, dir.str());
  std::ifstream in(dir.path / "manifest.json");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find("\"status\": \"aborted\"") != std::string::npos);
  CHECK(text.find("non-finite loss") != std::string::npos);
  CHECK(fs::exists(dir.path / "matrix.csv"));
}
