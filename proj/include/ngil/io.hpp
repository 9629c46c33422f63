// On-disk formats: graph bundles, experiment configs and run artifacts.
// Everything is plain text with "\n" line endings and "." decimals; bundle
// files are checksummed (SHA-256) through a JSON manifest.
//
// Bundle layout (format version "ngil-bundle/1"):
//   edges.txt     one "u v" pair per line, u < v, 0-based decimal ids
//   features.csv  one row per vertex in id order
//   labels.csv    "id,label" rows
//   tasks.csv     "task_index,class_a,class_b" rows
//   manifest.json counts and per-file checksums
//
// Run artifacts (format version "ngil-run/1"):
//   config.json   resolved config echo (flat key/value, replayable)
//   matrix.csv    row i holds r_{i,1..i} at 6 decimal places
//   metrics.json  flat key/value metrics document
//   bound.json    bound diagnostics (two-task runs)
//   losses.csv    per-epoch loss terms
//   manifest.json seed, config hash, status
#pragma once

#include <array>
#include <string>
#include <vector>

#include "ngil/graph.hpp"
#include "ngil/train.hpp"
#include "ngil/types.hpp"

namespace ngil {

struct BundleData {
  std::vector<VertexBatch> batches;   // labels filled, splits unassigned
  std::vector<Edge> edges;            // final accumulated edge list
  Matrix features;                    // one row per vertex
  std::vector<int> labels;            // per vertex
  std::vector<std::array<int, 3>> tasks;  // (task_index, class_a, class_b)
};

/// Writes a bundle directory; refuses to write over a non-bundle directory.
void write_graph_bundle(const std::string& dir, const BundleData& data);

BundleData bundle_from_sequence(const CsbmSequence& seq);

/// Loads and validates a bundle (checksums, id ranges, edge normalization,
/// class coverage). Throws BundleError with the offending line on failure.
BundleData load_graph_bundle(const std::string& dir);

struct SequenceData {
  std::vector<VertexBatch> batches;
  std::vector<GraphSnapshot> snapshots;
};

/// Replays a bundle into accumulated snapshots: each edge arrives with the
/// later of its endpoints' batches.
SequenceData assemble_sequence(const BundleData& data);

SequenceData load_bundle_sequence(const std::string& dir);

/// Writes the artifact set for a finished (or aborted) run and returns the
/// manifest path. Artifacts are sufficient to recompute the metrics from the
/// matrix alone.
std::string write_run_artifacts(const RunResult& result, const std::string& dir);

/// Round-trips a performance matrix through the artifact CSV format.
void write_performance_matrix(const PerformanceMatrix& matrix, const std::string& path);
PerformanceMatrix load_performance_matrix(const std::string& path);

/// Flat key/value JSON config document (the same schema as the echo).
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json_file(const std::string& path);

}  // namespace ngil
