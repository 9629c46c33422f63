#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "ngil/csbm.hpp"
#include "ngil/errors.hpp"
#include "ngil/nn.hpp"
#include "ngil/rng.hpp"

using namespace ngil;

namespace {

GraphSnapshot star(Index leaves) {
  GraphSnapshot s;
  const Index n = leaves + 1;
  s.vertex_ids.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) s.vertex_ids[static_cast<std::size_t>(i)] = static_cast<VertexId>(i);
  s.adjacency.resize(static_cast<std::size_t>(n));
  for (Index leaf = 1; leaf < n; ++leaf) {
    s.adjacency[0].push_back(leaf);
    s.adjacency[static_cast<std::size_t>(leaf)].push_back(0);
  }
  s.features = Matrix::Ones(n, 1);
  s.features(0, 0) = 0.0;
  s.task_horizon = 1;
  return s;
}

GnnParams identity_1d() {
  GnnParams p;
  p.activation = Activation::linear;
  GnnLayer layer;
  layer.weight = Matrix::Identity(1, 1);
  layer.bias = RowVector::Zero(1);
  p.layers.push_back(layer);
  return p;
}

GraphSnapshot random_snapshot(Index n, double p, Index dim, std::uint64_t seed) {
  GraphSnapshot s;
  s.vertex_ids.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) s.vertex_ids[static_cast<std::size_t>(i)] = static_cast<VertexId>(i);
  s.adjacency.resize(static_cast<std::size_t>(n));
  Rng rng = make_rng(seed, "nn-test-graph");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index u = 0; u < n; ++u) {
    for (Index v = u + 1; v < n; ++v) {
      if (unit(rng) < p) {
        s.adjacency[static_cast<std::size_t>(u)].push_back(v);
        s.adjacency[static_cast<std::size_t>(v)].push_back(u);
      }
    }
  }
  std::normal_distribution<double> noise(0.0, 1.0);
  s.features.resize(n, dim);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < dim; ++j) s.features(i, j) = noise(rng);
  s.task_horizon = 1;
  return s;
}

}  // namespace

TEST_CASE("star mean with self-inclusion") {
  GraphSnapshot s = star(4);
  const Matrix emb = gnn_forward(identity_1d(), s, {0});
  CHECK(emb(0, 0) == doctest::Approx(0.8).epsilon(1e-15));  // (0+1+1+1+1)/5
}

TEST_CASE("isolated vertex embeds its own features") {
  GraphSnapshot s;
  s.vertex_ids = {0};
  s.adjacency.resize(1);
  s.features = Matrix::Constant(1, 1, 0.25);
  GnnParams p = identity_1d();
  p.activation = Activation::tanh;
  const Matrix emb = gnn_forward(p, s, {0});
  CHECK(emb(0, 0) == doctest::Approx(std::tanh(0.25)).epsilon(1e-15));
}

TEST_CASE("full-graph forward equals per-target ego forward") {
  for (int depth : {1, 2}) {
    GraphSnapshot snap = random_snapshot(100, 0.04, 3, 77 + depth);
    GnnParams params = GnnParams::init(3, 5, depth, Activation::relu, 13);
    const Matrix full = gnn_forward_all(params, snap);
    Rng rng = make_rng(5, "targets");
    std::uniform_int_distribution<VertexId> pick(0, 99);
    for (int rep = 0; rep < 15; ++rep) {
      const VertexId root = pick(rng);
      EgoGraph ego = ego_graph(snap, root, depth);
      const Matrix local = gnn_forward(params, ego.graph, {root});
      CHECK((full.row(snap.local_index(root)) - local.row(0)).lpNorm<Eigen::Infinity>() <
            1e-10);
    }
  }
}

TEST_CASE("feature changes outside the ball leave embeddings bitwise unchanged") {
  const int depth = 2;
  GraphSnapshot snap = random_snapshot(80, 0.03, 2, 3);
  GnnParams params = GnnParams::init(2, 4, depth, Activation::tanh, 29);
  const VertexId root = 0;
  EgoGraph ego = ego_graph(snap, root, depth);
  const Matrix before = gnn_forward(params, snap, {root});

  // perturb every vertex outside the ball
  GraphSnapshot perturbed = snap;
  std::set<VertexId> ball(ego.graph.vertex_ids.begin(), ego.graph.vertex_ids.end());
  bool changed_any = false;
  for (Index v = 0; v < snap.size(); ++v) {
    if (!ball.count(static_cast<VertexId>(v))) {
      perturbed.features.row(v).array() += 10.0;
      changed_any = true;
    }
  }
  REQUIRE(changed_any);
  const Matrix after = gnn_forward(params, perturbed, {root});
  CHECK((before - after).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("permutation of neighbor insertion order does not change embeddings") {
  // same graph built with edges inserted in different order
  GraphSnapshot a = random_snapshot(40, 0.1, 2, 11);
  GraphSnapshot b = a;
  // adjacency lists are sorted by construction; rebuilding from shuffled
  // edges must produce identical lists
  for (auto& nbrs : b.adjacency) {
    auto copy = nbrs;
    std::reverse(copy.begin(), copy.end());
    std::sort(copy.begin(), copy.end());
    CHECK(copy == nbrs);
  }
  GnnParams params = GnnParams::init(2, 4, 2, Activation::relu, 31);
  CHECK((gnn_forward_all(params, a) - gnn_forward_all(params, b)).lpNorm<Eigen::Infinity>() ==
        0.0);
}

TEST_CASE("head_forward: zeros, identity, random oracle") {
  HeadParams zero;
  zero.weight = Matrix::Zero(2, 2);
  zero.bias = RowVector::Zero(2);
  Matrix emb(1, 2);
  emb << 1.0, 0.0;
  CHECK(head_forward(zero, emb).lpNorm<Eigen::Infinity>() == 0.0);

  HeadParams ident;
  ident.weight = Matrix::Identity(2, 2);
  ident.bias = RowVector::Zero(2);
  const Matrix logits = head_forward(ident, emb);
  CHECK(logits(0, 0) == 1.0);
  CHECK(logits(0, 1) == 0.0);

  HeadParams rnd = HeadParams::init(3, 2, 5);
  Matrix e2(4, 3);
  Rng rng = make_rng(6, "head");
  std::normal_distribution<double> noise(0.0, 1.0);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 3; ++j) e2(i, j) = noise(rng);
  const Matrix got = head_forward(rnd, e2);
  for (Index i = 0; i < 4; ++i) {
    for (Index c = 0; c < 2; ++c) {
      double manual = rnd.bias(c);
      for (Index j = 0; j < 3; ++j) manual += e2(i, j) * rnd.weight(j, c);
      CHECK(got(i, c) == doctest::Approx(manual).epsilon(1e-12));
    }
  }

  CHECK_THROWS_AS(head_forward(rnd, emb), StructuralError);
}

TEST_CASE("cross entropy: uniform logits, stability, high-precision oracle") {
  Matrix logits(1, 2);
  logits << 0.0, 0.0;
  CHECK(cross_entropy(logits, {1}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Matrix big(1, 2);
  big << 1000.0, 0.0;
  const double stable = cross_entropy(big, {0});
  CHECK(std::isfinite(stable));
  CHECK(stable == doctest::Approx(0.0).epsilon(1e-12));

  // long-double oracle on a random batch
  Rng rng = make_rng(8, "ce");
  std::normal_distribution<double> noise(0.0, 3.0);
  Matrix batch(6, 4);
  std::vector<int> labels;
  std::uniform_int_distribution<int> lab(0, 3);
  for (Index i = 0; i < 6; ++i) {
    for (Index j = 0; j < 4; ++j) batch(i, j) = noise(rng);
    labels.push_back(lab(rng));
  }
  long double oracle = 0.0L;
  for (Index i = 0; i < 6; ++i) {
    long double z = 0.0L;
    for (Index j = 0; j < 4; ++j) z += expl(static_cast<long double>(batch(i, j)));
    oracle += -(static_cast<long double>(batch(i, labels[static_cast<std::size_t>(i)])) -
                logl(z));
  }
  oracle /= 6.0L;
  CHECK(cross_entropy(batch, labels) ==
        doctest::Approx(static_cast<double>(oracle)).epsilon(1e-10));
}

TEST_CASE("adam: zero grads, first-step magnitude, divergence, determinism") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  Matrix p = Matrix::Constant(1, 1, 0.0);
  AdamState st = AdamState::zeros_like(p);
  adam_step(p, Matrix::Zero(1, 1), st, cfg);
  CHECK(p(0, 0) == 0.0);

  // hand-evaluated first step: m_hat = g, v_hat = g^2, step = lr*g/(|g|+eps)
  Matrix q = Matrix::Constant(1, 1, 0.0);
  AdamState st2 = AdamState::zeros_like(q);
  adam_step(q, Matrix::Constant(1, 1, 1.0), st2, cfg);
  CHECK(q(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));

  Matrix bad = Matrix::Constant(1, 1, std::nan(""));
  AdamState st3 = AdamState::zeros_like(q);
  CHECK_THROWS_AS(adam_step(q, bad, st3, cfg), DivergenceError);

  // two identical runs agree bitwise
  auto run = [&]() {
    Matrix w = Matrix::Constant(2, 2, 0.5);
    AdamState s = AdamState::zeros_like(w);
    for (int i = 0; i < 25; ++i) {
      adam_step(w, 0.1 * w, s, cfg);
    }
    return w;
  };
  const Matrix w1 = run();
  const Matrix w2 = run();
  CHECK((w1 - w2).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("grad_check: exact quadratic sanity") {
  Vector at(5);
  at << 0.3, -1.2, 0.7, 2.0, -0.4;
  const auto objective = [](const Vector& p) { return p.squaredNorm(); };
  const Vector analytic = 2.0 * at;
  const GradCheckReport report = grad_check(objective, at, analytic, 1e-5);
  CHECK(report.coordinates_checked == 5);
  CHECK(report.max_relative_error < 1e-8);
}

TEST_CASE("grad_check: cross entropy through a 1-layer encoder") {
  GraphSnapshot snap = random_snapshot(10, 0.3, 3, 55);
  GnnParams params = GnnParams::init(3, 4, 1, Activation::tanh, 19);
  std::vector<HeadParams> heads{HeadParams::init(4, 2, 23)};
  std::vector<int> labels;
  Rng rng = make_rng(24, "labels");
  std::uniform_int_distribution<int> lab(0, 1);
  VertexList targets;
  for (Index v = 0; v < snap.size(); ++v) {
    targets.push_back(static_cast<VertexId>(v));
    labels.push_back(lab(rng));
  }

  const auto objective = [&](const Vector& flat) {
    GnnParams g = params;
    std::vector<HeadParams> h = heads;
    unpack_params(flat, g, h);
    const Matrix logits = head_forward(h[0], gnn_forward(g, snap, targets));
    return cross_entropy(logits, labels);
  };

  // analytic gradient
  GnnForwardCache cache;
  const Matrix emb = gnn_forward_all(params, snap, &cache);
  Matrix d_logits;
  cross_entropy_grad(head_forward(heads[0], emb), labels, d_logits);
  HeadGrads hg;
  const Matrix d_emb = head_backward(heads[0], emb, d_logits, hg);
  const GnnGrads eg = gnn_backward(params, snap, cache, d_emb);

  const Vector at = pack_params(params, heads);
  const Vector analytic = pack_grads(eg, {hg});
  const GradCheckReport report = grad_check(objective, at, analytic, 1e-5);
  CHECK(report.max_relative_error < 1e-4);
}
