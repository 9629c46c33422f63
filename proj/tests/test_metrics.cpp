#include <cmath>
#include <random>

#include "doctest.h"
#include "ngil/errors.hpp"
#include "ngil/metrics.hpp"
#include "ngil/rng.hpp"

using namespace ngil;

TEST_CASE("compute_metrics: definitional hand example") {
  PerformanceMatrix m;
  m.append_row({0.9});
  m.append_row({0.8, 0.85});
  const MetricsReport r = compute_metrics(m);
  CHECK(r.fap == doctest::Approx(0.825).epsilon(1e-12));
  REQUIRE(r.faf.has_value());
  CHECK(*r.faf == doctest::Approx(-0.05).epsilon(1e-12));
  CHECK(r.aps.size() == 2);
  CHECK(r.aps[0] == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(r.afs.size() == 1);
  CHECK(*r.faf == r.afs.back());
  CHECK(r.fap == r.aps.back());
}

TEST_CASE("compute_metrics: constant matrix has zero forgetting") {
  PerformanceMatrix m;
  const double c = 0.77;
  for (int i = 1; i <= 5; ++i) m.append_row(std::vector<double>(static_cast<std::size_t>(i), c));
  const MetricsReport r = compute_metrics(m);
  CHECK(r.fap == doctest::Approx(c).epsilon(1e-12));
  CHECK(*r.faf == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("compute_metrics: single task has no forgetting metric") {
  PerformanceMatrix m;
  m.append_row({0.5});
  const MetricsReport r = compute_metrics(m);
  CHECK(r.fap == 0.5);
  CHECK_FALSE(r.faf.has_value());
  CHECK(r.afs.empty());
}

TEST_CASE("compute_metrics matches an independent arithmetic oracle") {
  Rng rng = make_rng(4, "matrix");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PerformanceMatrix m;
  for (int i = 1; i <= 5; ++i) {
    std::vector<double> row;
    for (int j = 0; j < i; ++j) row.push_back(unit(rng));
    m.append_row(std::move(row));
  }
  const MetricsReport r = compute_metrics(m);

  // spreadsheet-style recomputation
  for (int i = 1; i <= 5; ++i) {
    double acc = 0.0;
    for (int j = 1; j <= i; ++j) acc += m.entry(i, j);
    CHECK(r.aps[static_cast<std::size_t>(i - 1)] == doctest::Approx(acc / i).epsilon(1e-12));
  }
  double forget = 0.0;
  for (int j = 1; j <= 5; ++j) forget += m.entry(5, j) - m.entry(j, j);
  CHECK(*r.faf == doctest::Approx(forget / 5.0).epsilon(1e-12));
}

TEST_CASE("matrix validation") {
  PerformanceMatrix m;
  m.append_row({0.9});
  CHECK_THROWS_AS(m.append_row({0.9}), StructuralError);       // wrong length
  CHECK_THROWS_AS(m.append_row({0.5, 0.5, 0.5}), StructuralError);
  m.rows.push_back({1.5, 0.2});
  CHECK_THROWS_AS(m.validate(), StructuralError);              // out of range
  PerformanceMatrix empty;
  CHECK_THROWS_AS(compute_metrics(empty), StructuralError);
}

TEST_CASE("evaluate_accuracy: trivial and tie cases, loop oracle") {
  // 4 isolated vertices, identity-ish setup
  GraphSnapshot snap;
  snap.vertex_ids = {0, 1, 2, 3};
  snap.adjacency.resize(4);
  snap.features.resize(4, 2);
  snap.features << 2.0, 0.0, 0.0, 2.0, 3.0, 0.0, 0.0, 3.0;
  snap.task_horizon = 1;

  VertexBatch batch;
  batch.task_index = 1;
  batch.classes = {0, 1};
  batch.vertices = {0, 1, 2, 3};
  batch.labels = {0, 1, 0, 1};
  batch.split.assign(4, Split::test);

  ModelState model;
  model.horizon = 1;
  GnnLayer layer;
  layer.weight = Matrix::Identity(2, 2);
  layer.bias = RowVector::Zero(2);
  model.encoder.layers.push_back(layer);
  model.encoder.activation = Activation::linear;
  HeadParams head;
  head.weight = Matrix::Identity(2, 2);
  head.bias = RowVector::Zero(2);
  model.heads.push_back(head);

  CHECK(evaluate_accuracy(model, snap, batch, batch.vertices) == 1.0);

  // constant prediction on a balanced set: ties resolve to class 0
  ModelState constant = model;
  constant.heads[0].weight = Matrix::Zero(2, 2);
  CHECK(evaluate_accuracy(constant, snap, batch, batch.vertices) == 0.5);

  CHECK_THROWS_AS(evaluate_accuracy(model, snap, batch, {}), StructuralError);

  // random model vs a per-vertex loop oracle
  Rng rng = make_rng(12, "acc");
  std::normal_distribution<double> noise(0.0, 1.0);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 2; ++j) constant.heads[0].weight(i % 2, j) = noise(rng);
  const Matrix emb = gnn_forward(constant.encoder, snap, batch.vertices);
  const Matrix logits = head_forward(constant.heads[0], emb);
  Index correct = 0;
  for (Index i = 0; i < 4; ++i) {
    const int pred = logits(i, 0) >= logits(i, 1) ? 0 : 1;  // lower id wins ties
    if (pred == batch.labels[static_cast<std::size_t>(i)]) ++correct;
  }
  CHECK(evaluate_accuracy(constant, snap, batch, batch.vertices) ==
        doctest::Approx(static_cast<double>(correct) / 4.0));
}
