#include <algorithm>
#include <deque>
#include <set>

#include "doctest.h"
#include "ngil/csbm.hpp"
#include "ngil/errors.hpp"
#include "ngil/graph.hpp"
#include "ngil/rng.hpp"

using namespace ngil;

namespace {

VertexBatch make_batch(int task, VertexId first, const std::vector<int>& labels) {
  VertexBatch b;
  b.task_index = task;
  b.classes = {2 * (task - 1), 2 * (task - 1) + 1};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    b.vertices.push_back(first + static_cast<VertexId>(i));
    b.labels.push_back(labels[i]);
  }
  b.split.assign(labels.size(), Split::unassigned);
  return b;
}

GraphSnapshot triangle() {
  GraphSnapshot base;
  return accumulate_snapshot(base, make_batch(1, 0, {0, 0, 1}), {{0, 1}, {0, 2}, {1, 2}},
                             Matrix::Zero(3, 1));
}

// Independent BFS oracle over an explicit edge set.
std::set<VertexId> bfs_ball(const std::vector<Edge>& edges, VertexId root, int hops, Index n) {
  std::vector<std::vector<VertexId>> adj(static_cast<std::size_t>(n));
  for (const Edge& e : edges) {
    adj[static_cast<std::size_t>(e.first)].push_back(e.second);
    adj[static_cast<std::size_t>(e.second)].push_back(e.first);
  }
  std::vector<int> dist(static_cast<std::size_t>(n), -1);
  dist[static_cast<std::size_t>(root)] = 0;
  std::deque<VertexId> q{root};
  std::set<VertexId> ball{root};
  while (!q.empty()) {
    const VertexId v = q.front();
    q.pop_front();
    if (dist[static_cast<std::size_t>(v)] == hops) continue;
    for (VertexId u : adj[static_cast<std::size_t>(v)]) {
      if (dist[static_cast<std::size_t>(u)] < 0) {
        dist[static_cast<std::size_t>(u)] = dist[static_cast<std::size_t>(v)] + 1;
        ball.insert(u);
        q.push_back(u);
      }
    }
  }
  return ball;
}

std::vector<Edge> random_graph_edges(Index n, double p, std::uint64_t seed) {
  Rng rng = make_rng(seed, "test-graph");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> edges;
  for (VertexId u = 0; u < n; ++u) {
    for (VertexId v = u + 1; v < n; ++v) {
      if (unit(rng) < p) edges.emplace_back(u, v);
    }
  }
  return edges;
}

GraphSnapshot snapshot_from_edges(Index n, const std::vector<Edge>& edges) {
  GraphSnapshot base;
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  return accumulate_snapshot(base, make_batch(1, 0, labels), edges, Matrix::Zero(n, 1));
}

}  // namespace

TEST_CASE("accumulate: smallest union and empty base") {
  GraphSnapshot base;
  GraphSnapshot one = accumulate_snapshot(base, make_batch(1, 0, {0}), {}, Matrix::Zero(1, 1));
  CHECK(one.size() == 1);
  CHECK(one.edge_count() == 0);
  CHECK(one.task_horizon == 1);

  GraphSnapshot two =
      accumulate_snapshot(one, make_batch(2, 1, {2}), {{0, 1}}, Matrix::Zero(1, 1));
  CHECK(two.size() == 2);
  CHECK(two.edge_count() == 1);
  CHECK(two.task_horizon == 2);
  CHECK(one.size() == 1);  // base unmodified

  GraphSnapshot three =
      accumulate_snapshot(base, make_batch(1, 0, {0, 0, 1}), {{0, 1}}, Matrix::Zero(3, 1));
  CHECK(three.size() == 3);
  CHECK(three.edge_count() == 1);
  CHECK(three.task_horizon == 1);
  three.validate();
}

TEST_CASE("accumulate: malformed edges rejected") {
  GraphSnapshot base =
      accumulate_snapshot({}, make_batch(1, 0, {0, 0}), {{0, 1}}, Matrix::Zero(2, 1));
  const VertexBatch b2 = make_batch(2, 2, {2});
  CHECK_THROWS_AS(accumulate_snapshot(base, b2, {{0, 5}}, Matrix::Zero(1, 1)), StructuralError);
  CHECK_THROWS_AS(accumulate_snapshot(base, b2, {{0, 1}}, Matrix::Zero(1, 1)), StructuralError);
  CHECK_THROWS_AS(accumulate_snapshot(base, b2, {{2, 2}}, Matrix::Zero(1, 1)), StructuralError);
  CHECK_THROWS_AS(accumulate_snapshot(base, b2, {{1, 2}, {1, 2}}, Matrix::Zero(1, 1)),
                  StructuralError);
}

TEST_CASE("snapshot monotonicity over generated sequences") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    CsbmParams params = CsbmParams::symmetric(1, 1.0, 1.0, 0.2, 0.1, {{6, 4}, {5, 5}});
    CsbmSequence seq = generate_csbm(params, seed);
    REQUIRE(seq.snapshots.size() == 2);
    const GraphSnapshot& s1 = seq.snapshots[0];
    const GraphSnapshot& s2 = seq.snapshots[1];
    CHECK(s2.size() >= s1.size());
    for (Index v = 0; v < s1.size(); ++v) {
      const auto& n1 = s1.adjacency[static_cast<std::size_t>(v)];
      const auto& n2 = s2.adjacency[static_cast<std::size_t>(v)];
      for (Index u : n1) {
        CHECK(std::binary_search(n2.begin(), n2.end(), u));
      }
    }
  }
}

TEST_CASE("ego graph: triangle and path") {
  GraphSnapshot tri = triangle();
  EgoGraph ball = ego_graph(tri, 0, 1);
  CHECK(ball.graph.size() == 3);
  CHECK(ball.graph.edge_count() == 3);

  GraphSnapshot path = accumulate_snapshot({}, make_batch(1, 0, {0, 0, 1}), {{0, 1}, {1, 2}},
                                           Matrix::Zero(3, 1));
  EgoGraph hop1 = ego_graph(path, 0, 1);
  CHECK(hop1.graph.vertex_ids == VertexList{0, 1});
  CHECK(hop1.graph.edge_count() == 1);

  EgoGraph hop0 = ego_graph(path, 1, 0);
  CHECK(hop0.graph.vertex_ids == VertexList{1});
  CHECK(hop0.graph.edge_count() == 0);

  CHECK_THROWS_AS(ego_graph(path, 99, 1), NotFoundError);
}

TEST_CASE("ego graph equals BFS oracle on random graphs") {
  const Index n = 200;
  const auto edges = random_graph_edges(n, 0.02, 7);
  GraphSnapshot snap = snapshot_from_edges(n, edges);
  Rng rng = make_rng(3, "roots");
  std::uniform_int_distribution<VertexId> pick(0, static_cast<VertexId>(n - 1));
  for (int k : {1, 2}) {
    for (int rep = 0; rep < 20; ++rep) {
      const VertexId root = pick(rng);
      EgoGraph ego = ego_graph(snap, root, k);
      const std::set<VertexId> oracle = bfs_ball(edges, root, k, n);
      CHECK(std::set<VertexId>(ego.graph.vertex_ids.begin(), ego.graph.vertex_ids.end()) ==
            oracle);
      // edge set equality: every induced edge of the oracle ball is present
      Index expected_edges = 0;
      for (const Edge& e : edges) {
        if (oracle.count(e.first) && oracle.count(e.second)) ++expected_edges;
      }
      CHECK(ego.graph.edge_count() == expected_edges);
      ego.graph.validate();
    }
  }
}

TEST_CASE("induced subgraph basics") {
  GraphSnapshot tri = triangle();
  GraphSnapshot sub = induced_subgraph(tri, {0, 1});
  CHECK(sub.size() == 2);
  CHECK(sub.edge_count() == 1);

  GraphSnapshot all = induced_subgraph(tri, {0, 1, 2});
  CHECK(all.size() == tri.size());
  CHECK(all.edge_count() == tri.edge_count());
  CHECK((all.features.array() == tri.features.array()).all());

  CHECK_THROWS_AS(induced_subgraph(tri, {0, 7}), NotFoundError);
}

TEST_CASE("induced subgraph matches generator bookkeeping") {
  CsbmParams params = CsbmParams::symmetric(1, 1.0, 1.0, 0.3, 0.1, {{10, 10}, {8, 12}});
  CsbmSequence seq = generate_csbm(params, 11);
  GraphSnapshot sub = induced_subgraph(seq.snapshots[1], seq.batches[0].vertices);
  CHECK(sub.edge_count() == static_cast<Index>(seq.edges_by_task[0].size()));
}

TEST_CASE("transductive view is contained in the inductive one") {
  CsbmParams params = CsbmParams::symmetric(1, 1.0, 1.0, 0.2, 0.1, {{8, 8}, {8, 8}});
  CsbmSequence seq = generate_csbm(params, 5);
  GraphSnapshot sub = induced_subgraph(seq.snapshots[1], seq.batches[0].vertices);
  for (VertexId v : seq.batches[0].vertices) {
    EgoGraph inner = ego_graph(sub, v, 2);
    EgoGraph outer = ego_graph(seq.snapshots[1], v, 2);
    const std::set<VertexId> outer_set(outer.graph.vertex_ids.begin(),
                                       outer.graph.vertex_ids.end());
    for (VertexId u : inner.graph.vertex_ids) CHECK(outer_set.count(u) == 1);
  }
}

TEST_CASE("split_vertices: ratios, saturation, determinism") {
  std::vector<int> labels;
  for (int i = 0; i < 100; ++i) labels.push_back(i < 50 ? 0 : 1);
  VertexBatch batch = make_batch(1, 0, labels);

  VertexBatch split = split_vertices(batch, {0.6, 0.2, 0.2}, 7);
  CHECK(split.members(Split::train).size() == 60);
  CHECK(split.members(Split::valid).size() == 20);
  CHECK(split.members(Split::test).size() == 20);

  VertexBatch all_train = split_vertices(batch, {1.0, 0.0, 0.0}, 7);
  CHECK(all_train.members(Split::train).size() == 100);

  VertexBatch again = split_vertices(batch, {0.6, 0.2, 0.2}, 7);
  CHECK(split.split == again.split);
  VertexBatch other = split_vertices(batch, {0.6, 0.2, 0.2}, 8);
  CHECK(split.split != other.split);

  // tiny class goes entirely to train
  VertexBatch tiny = make_batch(1, 0, {0, 0, 0, 1, 1});
  VertexBatch tiny_split = split_vertices(tiny, {0.6, 0.2, 0.2}, 1);
  for (std::size_t i = 3; i < 5; ++i) CHECK(tiny_split.split[i] == Split::train);

  CHECK_THROWS_AS(split_vertices(batch, {0.5, 0.2, 0.2}, 7), StructuralError);
}
