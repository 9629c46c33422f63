#include "ngil/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iostream>
#include <map>
#include <set>
#include <string>

#include "ngil/errors.hpp"
#include "ngil/rng.hpp"

namespace ngil {

VertexList VertexBatch::members(Split s) const {
  VertexList out;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (split[i] == s) out.push_back(vertices[i]);
  }
  return out;
}

int VertexBatch::class_index(Index pos) const {
  const int label = labels[static_cast<std::size_t>(pos)];
  if (label == classes.first) return 0;
  if (label == classes.second) return 1;
  throw NotFoundError("label " + std::to_string(label) + " not in task " +
                      std::to_string(task_index) + "'s class pair");
}

Index GraphSnapshot::edge_count() const {
  std::size_t twice = 0;
  for (const auto& nbrs : adjacency) twice += nbrs.size();
  return static_cast<Index>(twice / 2);
}

bool GraphSnapshot::contains(VertexId global) const {
  return std::binary_search(vertex_ids.begin(), vertex_ids.end(), global);
}

Index GraphSnapshot::local_index(VertexId global) const {
  auto it = std::lower_bound(vertex_ids.begin(), vertex_ids.end(), global);
  if (it == vertex_ids.end() || *it != global) {
    throw NotFoundError("vertex " + std::to_string(global) + " not in snapshot");
  }
  return static_cast<Index>(it - vertex_ids.begin());
}

void GraphSnapshot::validate() const {
  const Index n = size();
  if (static_cast<Index>(adjacency.size()) != n) {
    throw StructuralError("adjacency size does not match vertex count");
  }
  if (features.rows() != n) {
    throw StructuralError("feature rows do not match vertex count");
  }
  for (Index v = 0; v < n; ++v) {
    const auto& nbrs = adjacency[static_cast<std::size_t>(v)];
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      const Index u = nbrs[k];
      if (u < 0 || u >= n) throw StructuralError("neighbor index out of range");
      if (u == v) throw StructuralError("self loop in adjacency");
      if (k > 0 && nbrs[k - 1] >= u) {
        throw StructuralError("neighbor list unsorted or duplicated");
      }
      const auto& back = adjacency[static_cast<std::size_t>(u)];
      if (!std::binary_search(back.begin(), back.end(), v)) {
        throw StructuralError("adjacency not symmetric");
      }
    }
  }
}

GraphSnapshot accumulate_snapshot(const GraphSnapshot& base, const VertexBatch& batch,
                                  const std::vector<Edge>& new_edges,
                                  const Matrix& batch_features) {
  const Index n_base = base.size();
  const Index n_batch = batch.size();
  if (batch_features.rows() != n_batch) {
    throw StructuralError("batch feature rows do not match batch size");
  }
  if (n_base > 0 && n_batch > 0 && base.features.cols() != batch_features.cols()) {
    throw StructuralError("feature dimension mismatch between base and batch");
  }

  // Dense ids in arrival order: the batch must continue the id range.
  for (Index i = 0; i < n_batch; ++i) {
    if (batch.vertices[static_cast<std::size_t>(i)] != static_cast<VertexId>(n_base + i)) {
      throw StructuralError("batch vertex ids must continue the snapshot id range");
    }
  }

  GraphSnapshot out;
  const Index n = n_base + n_batch;
  out.vertex_ids.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) out.vertex_ids[static_cast<std::size_t>(i)] = static_cast<VertexId>(i);
  out.adjacency = base.adjacency;
  out.adjacency.resize(static_cast<std::size_t>(n));
  const Index dim = n_batch > 0 ? batch_features.cols() : base.features.cols();
  out.features.resize(n, dim);
  if (n_base > 0) out.features.topRows(n_base) = base.features;
  if (n_batch > 0) out.features.bottomRows(n_batch) = batch_features;
  out.task_horizon = base.task_horizon + 1;

  for (const Edge& e : new_edges) {
    const VertexId u = e.first;
    const VertexId v = e.second;
    if (u == v) throw StructuralError("self loop rejected");
    if (u < 0 || v < 0 || u >= n || v >= n) {
      throw StructuralError("edge references unknown vertex (" + std::to_string(u) + "," +
                            std::to_string(v) + ")");
    }
    if (u < n_base && v < n_base) {
      throw StructuralError("edge between two pre-existing vertices (" + std::to_string(u) +
                            "," + std::to_string(v) + ")");
    }
    auto& au = out.adjacency[static_cast<std::size_t>(u)];
    auto it = std::lower_bound(au.begin(), au.end(), static_cast<Index>(v));
    if (it != au.end() && *it == static_cast<Index>(v)) {
      throw StructuralError("duplicate edge (" + std::to_string(u) + "," + std::to_string(v) +
                            ")");
    }
    au.insert(it, static_cast<Index>(v));
    auto& av = out.adjacency[static_cast<std::size_t>(v)];
    av.insert(std::lower_bound(av.begin(), av.end(), static_cast<Index>(u)),
              static_cast<Index>(u));
  }
  return out;
}

EgoGraph ego_graph(const GraphSnapshot& snapshot, VertexId root, int hops) {
  const Index root_local = snapshot.local_index(root);  // throws when absent
  if (hops < 0) throw StructuralError("hop count must be nonnegative");

  std::vector<int> dist(static_cast<std::size_t>(snapshot.size()), -1);
  std::deque<Index> frontier{root_local};
  dist[static_cast<std::size_t>(root_local)] = 0;
  std::vector<Index> ball{root_local};
  while (!frontier.empty()) {
    const Index v = frontier.front();
    frontier.pop_front();
    const int dv = dist[static_cast<std::size_t>(v)];
    if (dv == hops) continue;
    for (Index u : snapshot.adjacency[static_cast<std::size_t>(v)]) {
      if (dist[static_cast<std::size_t>(u)] < 0) {
        dist[static_cast<std::size_t>(u)] = dv + 1;
        ball.push_back(u);
        frontier.push_back(u);
      }
    }
  }
  std::sort(ball.begin(), ball.end());

  VertexList keep(ball.size());
  for (std::size_t i = 0; i < ball.size(); ++i) {
    keep[i] = snapshot.vertex_ids[static_cast<std::size_t>(ball[i])];
  }
  EgoGraph ego;
  ego.root = root;
  ego.hops = hops;
  ego.graph = induced_subgraph(snapshot, keep);
  return ego;
}

GraphSnapshot induced_subgraph(const GraphSnapshot& snapshot, const VertexList& keep) {
  VertexList sorted = keep;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<Index> local_of(static_cast<std::size_t>(snapshot.size()), -1);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const Index src = snapshot.local_index(sorted[i]);  // throws on unknown id
    local_of[static_cast<std::size_t>(src)] = static_cast<Index>(i);
  }

  GraphSnapshot out;
  out.vertex_ids = sorted;
  out.task_horizon = snapshot.task_horizon;
  const Index n = static_cast<Index>(sorted.size());
  out.adjacency.resize(static_cast<std::size_t>(n));
  out.features.resize(n, snapshot.features.cols());
  for (Index i = 0; i < n; ++i) {
    const Index src = snapshot.local_index(sorted[static_cast<std::size_t>(i)]);
    out.features.row(i) = snapshot.features.row(src);
    for (Index u : snapshot.adjacency[static_cast<std::size_t>(src)]) {
      const Index lu = local_of[static_cast<std::size_t>(u)];
      if (lu >= 0) out.adjacency[static_cast<std::size_t>(i)].push_back(lu);
    }
    // source lists are sorted by global id and the remap preserves order
  }
  return out;
}

VertexBatch split_vertices(const VertexBatch& batch, const SplitRatios& ratios,
                           std::uint64_t seed) {
  if (batch.vertices.empty()) throw StructuralError("cannot split an empty batch");
  const double sum = ratios.train + ratios.valid + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9) throw StructuralError("split ratios must sum to 1");

  VertexBatch out = batch;
  out.split.assign(batch.vertices.size(), Split::unassigned);

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < batch.vertices.size(); ++i) {
    by_class[batch.labels[i]].push_back(i);
  }

  for (auto& [label, positions] : by_class) {
    if (positions.size() < 3 && ratios.train < 1.0) {
      std::cerr << "warning: class " << label << " in task " << batch.task_index << " has "
                << positions.size() << " members; assigning all to train\n";
      for (std::size_t p : positions) out.split[p] = Split::train;
      continue;
    }
    Rng rng = make_rng(seed, "split", static_cast<std::uint64_t>(label));
    std::shuffle(positions.begin(), positions.end(), rng);
    const std::size_t n = positions.size();
    const auto n_train = static_cast<std::size_t>(std::llround(ratios.train * static_cast<double>(n)));
    const auto n_valid = static_cast<std::size_t>(std::llround(ratios.valid * static_cast<double>(n)));
    for (std::size_t k = 0; k < n; ++k) {
      out.split[positions[k]] =
          k < n_train ? Split::train : (k < n_train + n_valid ? Split::valid : Split::test);
    }
  }
  return out;
}

std::vector<int> class_indices(const VertexBatch& batch, const VertexList& subset) {
  std::vector<int> out;
  out.reserve(subset.size());
  for (VertexId v : subset) {
    const auto it = std::lower_bound(batch.vertices.begin(), batch.vertices.end(), v);
    if (it == batch.vertices.end() || *it != v) {
      throw NotFoundError("vertex " + std::to_string(v) + " not in task batch");
    }
    out.push_back(batch.class_index(static_cast<Index>(it - batch.vertices.begin())));
  }
  return out;
}

}  // namespace ngil
