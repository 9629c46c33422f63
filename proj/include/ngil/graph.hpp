// Evolving-graph data model: vertex batches, accumulated snapshots,
// ego-graph extraction and per-task splits.
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ngil/types.hpp"

namespace ngil {

enum class Split : std::uint8_t { unassigned, train, valid, test };

/// One arriving task's vertex set with labels and (once assigned) splits.
/// Vertex ids are dense 0-based integers in arrival order, so ids are
/// disjoint across batches by construction.
struct VertexBatch {
  int task_index = 0;  // 1-based
  VertexList vertices;              // ascending global ids
  std::vector<int> labels;          // global class ids, aligned with vertices
  std::vector<Split> split;         // aligned; unassigned before split_vertices
  std::pair<int, int> classes{0, 1};  // the task's two class ids (class index 0, 1)

  Index size() const { return static_cast<Index>(vertices.size()); }

  /// Global ids carrying the given split tag.
  VertexList members(Split s) const;

  /// 0/1 class index within this task for the vertex at position `pos`.
  int class_index(Index pos) const;
};

/// Accumulated undirected graph at a training task. `vertex_ids` holds the
/// ascending global ids of the rows; adjacency is stored with local indices
/// and sorted neighbor lists, no self loops, no duplicates. For full
/// snapshots `vertex_ids` is the identity 0..n-1.
struct GraphSnapshot {
  VertexList vertex_ids;
  std::vector<std::vector<Index>> adjacency;  // local indices, sorted
  Matrix features;                            // one row per local vertex
  int task_horizon = 0;

  Index size() const { return static_cast<Index>(vertex_ids.size()); }
  Index edge_count() const;
  bool contains(VertexId global) const;
  /// Local row index of a global id; throws NotFoundError when absent.
  Index local_index(VertexId global) const;

  /// Structural invariants: symmetry, sortedness, no self loops/duplicates.
  void validate() const;
};

/// k-hop ego graph of a root vertex: the exact BFS ball with restricted
/// adjacency and features.
struct EgoGraph {
  VertexId root = 0;  // global id
  int hops = 0;
  GraphSnapshot graph;
};

/// Returns base plus the batch's vertices and the new edges. Every new edge
/// must touch the arriving batch; edges between two pre-existing vertices
/// are rejected as malformed ingestion. `batch_features` rows align with
/// `batch.vertices`.
GraphSnapshot accumulate_snapshot(const GraphSnapshot& base, const VertexBatch& batch,
                                  const std::vector<Edge>& new_edges,
                                  const Matrix& batch_features);

EgoGraph ego_graph(const GraphSnapshot& snapshot, VertexId root, int hops);

/// Subgraph induced by `keep` (global ids): only edges with both endpoints
/// in `keep` survive; features restricted.
GraphSnapshot induced_subgraph(const GraphSnapshot& snapshot, const VertexList& keep);

struct SplitRatios {
  double train = 0.6;
  double valid = 0.2;
  double test = 0.2;
};

/// Per-class stratified split assignment, deterministic for a fixed seed.
/// A class with fewer than 3 members is assigned entirely to train (with a
/// warning on stderr).
VertexBatch split_vertices(const VertexBatch& batch, const SplitRatios& ratios,
                           std::uint64_t seed);

/// 0/1 class indices of the given members of a batch, resolved by id.
std::vector<int> class_indices(const VertexBatch& batch, const VertexList& subset);

}  // namespace ngil
