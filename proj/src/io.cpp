#include "ngil/io.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"

#include "ngil/errors.hpp"
#include "ngil/sha256.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace ngil {

namespace {

constexpr const char* kBundleVersion = "ngil-bundle/1";
constexpr const char* kRunVersion = "ngil-run/1";

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BundleError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw BundleError("cannot write " + path.string());
  out << content;
}

std::string format_double(double v, const char* fmt = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw BundleError("bad number '" + s + "' in " + context);
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  while (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

}  // namespace

BundleData bundle_from_sequence(const CsbmSequence& seq) {
  BundleData data;
  data.batches = seq.batches;
  for (const auto& task_edges : seq.edges_by_task) {
    data.edges.insert(data.edges.end(), task_edges.begin(), task_edges.end());
  }
  const GraphSnapshot& final_snapshot = seq.snapshots.back();
  data.features = final_snapshot.features;
  data.labels.resize(static_cast<std::size_t>(final_snapshot.size()));
  for (const VertexBatch& b : seq.batches) {
    for (std::size_t i = 0; i < b.vertices.size(); ++i) {
      data.labels[static_cast<std::size_t>(b.vertices[i])] = b.labels[i];
    }
    data.tasks.push_back({b.task_index, b.classes.first, b.classes.second});
  }
  return data;
}

void write_graph_bundle(const std::string& dir, const BundleData& data) {
  const fs::path root(dir);
  if (fs::exists(root)) {
    if (!fs::is_directory(root)) throw BundleError(dir + " exists and is not a directory");
    if (!fs::is_empty(root) && !fs::exists(root / "manifest.json")) {
      throw BundleError(dir + " is a nonempty directory without a bundle manifest");
    }
  } else {
    fs::create_directories(root);
  }

  std::ostringstream edges;
  for (const Edge& e : data.edges) {
    if (e.first >= e.second) throw BundleError("edge not normalized to u < v");
    edges << e.first << " " << e.second << "\n";
  }

  std::ostringstream feats;
  for (Index i = 0; i < data.features.rows(); ++i) {
    for (Index j = 0; j < data.features.cols(); ++j) {
      if (j) feats << ",";
      feats << format_double(data.features(i, j));
    }
    feats << "\n";
  }

  std::ostringstream labels;
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    labels << i << "," << data.labels[i] << "\n";
  }

  std::ostringstream tasks;
  for (const auto& t : data.tasks) {
    tasks << t[0] << "," << t[1] << "," << t[2] << "\n";
  }

  const std::map<std::string, std::string> files = {{"edges.txt", edges.str()},
                                                    {"features.csv", feats.str()},
                                                    {"labels.csv", labels.str()},
                                                    {"tasks.csv", tasks.str()}};
  ordered_json manifest;
  manifest["format"] = kBundleVersion;
  manifest["vertices"] = data.features.rows();
  manifest["edges"] = data.edges.size();
  manifest["tasks"] = data.tasks.size();
  manifest["feature_dim"] = data.features.cols();
  ordered_json checksums;
  for (const auto& [name, content] : files) {
    write_file(root / name, content);
    checksums[name] = sha256_hex(content);
  }
  manifest["sha256"] = checksums;
  write_file(root / "manifest.json", manifest.dump(2) + "\n");
}

BundleData load_graph_bundle(const std::string& dir) {
  const fs::path root(dir);
  ordered_json manifest;
  try {
    manifest = ordered_json::parse(read_file(root / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw BundleError("bad manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != kBundleVersion) {
    throw BundleError("unsupported bundle format '" + manifest.value("format", "") + "'");
  }

  std::map<std::string, std::string> contents;
  for (const char* name : {"edges.txt", "features.csv", "labels.csv", "tasks.csv"}) {
    const std::string content = read_file(root / name);
    const std::string expect = manifest["sha256"].value(name, "");
    if (sha256_hex(content) != expect) {
      throw BundleError(std::string("checksum mismatch for ") + name);
    }
    contents[name] = content;
  }

  const auto n_vertices = manifest["vertices"].get<Index>();
  const auto n_edges = manifest["edges"].get<std::size_t>();
  const auto n_tasks = manifest["tasks"].get<std::size_t>();
  const auto dim = manifest["feature_dim"].get<Index>();

  BundleData data;

  // tasks.csv
  {
    const auto rows = lines_of(contents["tasks.csv"]);
    if (rows.size() != n_tasks) throw BundleError("tasks.csv row count disagrees with manifest");
    std::set<int> seen_classes;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto cells = split_csv(rows[i]);
      if (cells.size() != 3) throw BundleError("tasks.csv line " + std::to_string(i + 1));
      const int task = std::stoi(cells[0]);
      const int a = std::stoi(cells[1]);
      const int b = std::stoi(cells[2]);
      if (task != static_cast<int>(i) + 1) {
        throw BundleError("tasks.csv line " + std::to_string(i + 1) +
                          ": task indices must be consecutive from 1");
      }
      if (a == b || seen_classes.count(a) || seen_classes.count(b)) {
        throw BundleError("tasks.csv line " + std::to_string(i + 1) +
                          ": class pairs must be disjoint");
      }
      seen_classes.insert(a);
      seen_classes.insert(b);
      data.tasks.push_back({task, a, b});
    }
  }

  // labels.csv
  data.labels.assign(static_cast<std::size_t>(n_vertices), -1);
  std::map<int, int> task_of_class;
  for (const auto& t : data.tasks) {
    task_of_class[t[1]] = t[0];
    task_of_class[t[2]] = t[0];
  }
  {
    const auto rows = lines_of(contents["labels.csv"]);
    if (rows.size() != static_cast<std::size_t>(n_vertices)) {
      throw BundleError("labels.csv row count disagrees with manifest");
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto cells = split_csv(rows[i]);
      if (cells.size() != 2) throw BundleError("labels.csv line " + std::to_string(i + 1));
      const long id = std::stol(cells[0]);
      const int label = std::stoi(cells[1]);
      if (id < 0 || id >= n_vertices) {
        throw BundleError("labels.csv line " + std::to_string(i + 1) + ": id out of range");
      }
      if (data.labels[static_cast<std::size_t>(id)] != -1) {
        throw BundleError("labels.csv line " + std::to_string(i + 1) + ": duplicate id");
      }
      if (!task_of_class.count(label)) {
        throw BundleError("labels.csv line " + std::to_string(i + 1) +
                          ": class absent from every task");
      }
      data.labels[static_cast<std::size_t>(id)] = label;
    }
  }

  // features.csv
  {
    const auto rows = lines_of(contents["features.csv"]);
    if (rows.size() != static_cast<std::size_t>(n_vertices)) {
      throw BundleError("features.csv row count disagrees with manifest");
    }
    data.features.resize(n_vertices, dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto cells = split_csv(rows[i]);
      if (static_cast<Index>(cells.size()) != dim) {
        throw BundleError("features.csv line " + std::to_string(i + 1) + ": wrong column count");
      }
      for (Index j = 0; j < dim; ++j) {
        data.features(static_cast<Index>(i), j) =
            parse_double(cells[static_cast<std::size_t>(j)],
                         "features.csv line " + std::to_string(i + 1));
      }
    }
  }

  // edges.txt
  {
    const auto rows = lines_of(contents["edges.txt"]);
    if (rows.size() != n_edges) throw BundleError("edges.txt row count disagrees with manifest");
    std::set<Edge> seen;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::istringstream ss(rows[i]);
      long u = -1, v = -1;
      if (!(ss >> u >> v)) throw BundleError("edges.txt line " + std::to_string(i + 1));
      std::string rest;
      if (ss >> rest) throw BundleError("edges.txt line " + std::to_string(i + 1));
      if (u >= v) {
        throw BundleError("edges.txt line " + std::to_string(i + 1) + ": requires u < v");
      }
      if (u < 0 || v >= n_vertices) {
        throw BundleError("edges.txt line " + std::to_string(i + 1) + ": id out of range");
      }
      const Edge e{static_cast<VertexId>(u), static_cast<VertexId>(v)};
      if (!seen.insert(e).second) {
        throw BundleError("edges.txt line " + std::to_string(i + 1) + ": duplicate edge");
      }
      data.edges.push_back(e);
    }
  }

  // Batches: membership through the task's class pair; ids must arrive in
  // task order.
  data.batches.resize(data.tasks.size());
  for (std::size_t t = 0; t < data.tasks.size(); ++t) {
    data.batches[t].task_index = data.tasks[t][0];
    data.batches[t].classes = {data.tasks[t][1], data.tasks[t][2]};
  }
  int prev_task = 1;
  for (Index id = 0; id < n_vertices; ++id) {
    const int label = data.labels[static_cast<std::size_t>(id)];
    const int task = task_of_class.at(label);
    if (task < prev_task) {
      throw BundleError("vertex ids are not grouped by task in arrival order (id " +
                        std::to_string(id) + ")");
    }
    prev_task = task;
    auto& batch = data.batches[static_cast<std::size_t>(task - 1)];
    batch.vertices.push_back(static_cast<VertexId>(id));
    batch.labels.push_back(label);
  }
  for (auto& batch : data.batches) {
    if (batch.vertices.empty()) {
      throw BundleError("task " + std::to_string(batch.task_index) + " has no vertices");
    }
    batch.split.assign(batch.vertices.size(), Split::unassigned);
  }
  return data;
}

SequenceData assemble_sequence(const BundleData& data) {
  SequenceData out;
  std::vector<int> batch_of(static_cast<std::size_t>(data.features.rows()), 0);
  for (const VertexBatch& b : data.batches) {
    for (VertexId v : b.vertices) batch_of[static_cast<std::size_t>(v)] = b.task_index;
  }
  std::vector<std::vector<Edge>> arriving(data.batches.size());
  for (const Edge& e : data.edges) {
    const int t = std::max(batch_of[static_cast<std::size_t>(e.first)],
                           batch_of[static_cast<std::size_t>(e.second)]);
    arriving[static_cast<std::size_t>(t - 1)].push_back(e);
  }
  GraphSnapshot snapshot;
  for (std::size_t t = 0; t < data.batches.size(); ++t) {
    const VertexBatch& b = data.batches[t];
    Matrix feats(b.size(), data.features.cols());
    for (Index i = 0; i < b.size(); ++i) {
      feats.row(i) = data.features.row(b.vertices[static_cast<std::size_t>(i)]);
    }
    snapshot = accumulate_snapshot(snapshot, b, arriving[t], feats);
    out.snapshots.push_back(snapshot);
  }
  out.batches = data.batches;
  return out;
}

SequenceData load_bundle_sequence(const std::string& dir) {
  return assemble_sequence(load_graph_bundle(dir));
}

void write_performance_matrix(const PerformanceMatrix& matrix, const std::string& path) {
  std::ostringstream out;
  for (const auto& row : matrix.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ",";
      out << format_double(row[j], "%.6f");
    }
    out << "\n";
  }
  write_file(path, out.str());
}

PerformanceMatrix load_performance_matrix(const std::string& path) {
  PerformanceMatrix matrix;
  const auto rows = lines_of(read_file(path));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto cells = split_csv(rows[i]);
    std::vector<double> row;
    for (const auto& cell : cells) {
      row.push_back(parse_double(cell, path + " line " + std::to_string(i + 1)));
    }
    matrix.append_row(std::move(row));
  }
  matrix.validate();
  return matrix;
}

std::string config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["bundle"] = c.bundle;
  j["csbm_plan"] = c.csbm_plan;
  j["csbm_p_in"] = c.csbm_p_in;
  j["csbm_p_out"] = c.csbm_p_out;
  j["csbm_mu_scale"] = c.csbm_mu_scale;
  j["csbm_sigma"] = c.csbm_sigma;
  j["csbm_dim"] = c.csbm_dim;
  j["trainer"] = c.trainer;
  j["mode"] = c.mode;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["budget"] = c.budget;
  j["subsample"] = c.subsample;
  j["kernel_alphas"] = c.kernel_alphas;
  j["kernel_norm"] = c.kernel_norm;
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  j["hidden"] = c.hidden;
  j["layers"] = c.layers;
  j["activation"] = c.activation;
  j["memory_strategy"] = c.memory_strategy;
  j["train_ratio"] = c.train_ratio;
  j["valid_ratio"] = c.valid_ratio;
  j["test_ratio"] = c.test_ratio;
  j["bound_q"] = c.bound_q;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["trials"] = c.trials;
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json_file(const std::string& path) {
  ordered_json j;
  try {
    j = ordered_json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw BundleError("bad config file " + path + ": " + e.what());
  }
  ExperimentConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "bundle") c.bundle = value.get<std::string>();
      else if (key == "csbm_plan") c.csbm_plan = value.get<std::string>();
      else if (key == "csbm_p_in") c.csbm_p_in = value.get<double>();
      else if (key == "csbm_p_out") c.csbm_p_out = value.get<double>();
      else if (key == "csbm_mu_scale") c.csbm_mu_scale = value.get<double>();
      else if (key == "csbm_sigma") c.csbm_sigma = value.get<double>();
      else if (key == "csbm_dim") c.csbm_dim = value.get<int>();
      else if (key == "trainer") c.trainer = value.get<std::string>();
      else if (key == "mode") c.mode = value.get<std::string>();
      else if (key == "alpha") c.alpha = value.get<double>();
      else if (key == "beta") c.beta = value.get<double>();
      else if (key == "budget") c.budget = value.get<int>();
      else if (key == "subsample") c.subsample = value.get<long>();
      else if (key == "kernel_alphas") c.kernel_alphas = value.get<std::string>();
      else if (key == "kernel_norm") c.kernel_norm = value.get<std::string>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "hidden") c.hidden = value.get<int>();
      else if (key == "layers") c.layers = value.get<int>();
      else if (key == "activation") c.activation = value.get<std::string>();
      else if (key == "memory_strategy") c.memory_strategy = value.get<std::string>();
      else if (key == "train_ratio") c.train_ratio = value.get<double>();
      else if (key == "valid_ratio") c.valid_ratio = value.get<double>();
      else if (key == "test_ratio") c.test_ratio = value.get<double>();
      else if (key == "bound_q") c.bound_q = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "out_dir") c.out_dir = value.get<std::string>();
      else if (key == "trials") c.trials = value.get<int>();
      else throw BundleError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw BundleError("bad config value in " + path + ": " + e.what());
  }
  return c;
}

std::string write_run_artifacts(const RunResult& result, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root);

  const std::string config_json = config_to_json(result.config);
  write_file(root / "config.json", config_json);

  // The stored matrix is the contract: artifact metrics are recomputed from
  // the 6-decimal entries so the documents stay mutually consistent.
  if (!result.matrix.rows.empty()) {
    write_performance_matrix(result.matrix, (root / "matrix.csv").string());
  } else if (!result.joint_row.empty()) {
    std::ostringstream out;
    for (std::size_t j = 0; j < result.joint_row.size(); ++j) {
      if (j) out << ",";
      out << format_double(result.joint_row[j], "%.6f");
    }
    out << "\n";
    write_file(root / "matrix.csv", out.str());
  }

  ordered_json metrics;
  if (!result.matrix.rows.empty()) {
    const PerformanceMatrix stored = load_performance_matrix((root / "matrix.csv").string());
    const MetricsReport report = compute_metrics(stored);
    metrics["tasks"] = stored.tasks();
    metrics["fap"] = report.fap;
    if (report.faf) metrics["faf"] = *report.faf;
    else metrics["faf"] = "NA";
    for (std::size_t i = 0; i < report.aps.size(); ++i) {
      metrics["aps_" + std::to_string(i + 1)] = report.aps[i];
    }
    for (std::size_t i = 0; i < report.afs.size(); ++i) {
      metrics["afs_" + std::to_string(i + 2)] = report.afs[i];
    }
  } else if (!result.joint_row.empty()) {
    metrics["tasks"] = result.joint_row.size();
    metrics["fap"] = result.metrics.fap;
    metrics["faf"] = "NA";
  }
  write_file(root / "metrics.json", metrics.dump(2) + "\n");

  if (result.bound) {
    ordered_json bound;
    bound["q"] = result.bound->q;
    bound["new_task_risk"] = result.bound->new_task_risk;
    bound["mmd_drift"] = result.bound->mmd_drift;
    bound["mmd_crosstask"] = result.bound->mmd_crosstask;
    if (result.bound->lambda_hat) bound["lambda_hat"] = *result.bound->lambda_hat;
    else bound["lambda_hat"] = "NA";
    bound["observed_cfr"] = result.bound->observed_cfr;
    if (auto rhs = result.bound->bound_rhs()) bound["bound_rhs"] = *rhs;
    if (auto margin = result.bound->margin()) bound["margin"] = *margin;
    write_file(root / "bound.json", bound.dump(2) + "\n");
  }

  std::ostringstream losses;
  losses << "task,epoch,total,task_loss,replay_loss,reg\n";
  for (const EpochLogRow& row : result.losses) {
    losses << row.task << "," << row.epoch << "," << format_double(row.total) << ","
           << format_double(row.task_loss) << "," << format_double(row.replay_loss) << ","
           << format_double(row.reg) << "\n";
  }
  write_file(root / "losses.csv", losses.str());

  ordered_json manifest;
  manifest["format"] = kRunVersion;
  manifest["seed"] = result.config.seed;
  manifest["config_sha256"] = sha256_hex(config_json);
  manifest["status"] = result.status;
  if (!result.error.empty()) manifest["error"] = result.error;
  manifest["epochs"] = result.timing.epochs;
  manifest["epoch_seconds"] = result.timing.epoch_seconds;
  manifest["reg_seconds"] = result.timing.reg_seconds;
  const fs::path manifest_path = root / "manifest.json";
  write_file(manifest_path, manifest.dump(2) + "\n");
  return manifest_path.string();
}

}  // namespace ngil
