#include "ngil/metrics.hpp"

#include <cmath>
#include <string>

#include "ngil/errors.hpp"
#include "ngil/rng.hpp"

namespace ngil {

const HeadParams& ModelState::head_for(int task_index) const {
  if (task_index < 1 || task_index > static_cast<int>(heads.size())) {
    throw NotFoundError("no head for task " + std::to_string(task_index));
  }
  return heads[static_cast<std::size_t>(task_index - 1)];
}

HeadParams& ModelState::head_for(int task_index) {
  if (task_index < 1 || task_index > static_cast<int>(heads.size())) {
    throw NotFoundError("no head for task " + std::to_string(task_index));
  }
  return heads[static_cast<std::size_t>(task_index - 1)];
}

void PerformanceMatrix::append_row(std::vector<double> row) {
  if (row.size() != rows.size() + 1) {
    throw StructuralError("performance matrix row has wrong length");
  }
  rows.push_back(std::move(row));
}

void PerformanceMatrix::validate() const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != i + 1) throw StructuralError("performance matrix is not triangular");
    for (double r : rows[i]) {
      if (!(r >= 0.0 && r <= 1.0)) throw StructuralError("accuracy entry outside [0,1]");
    }
  }
}

MetricsReport compute_metrics(const PerformanceMatrix& matrix) {
  matrix.validate();
  const int m = matrix.tasks();
  if (m == 0) throw StructuralError("empty performance matrix");

  MetricsReport report;
  for (int i = 1; i <= m; ++i) {
    double acc = 0.0;
    double forget = 0.0;
    for (int j = 1; j <= i; ++j) {
      acc += matrix.entry(i, j);
      forget += matrix.entry(i, j) - matrix.entry(j, j);
    }
    report.aps.push_back(acc / i);
    if (i >= 2) report.afs.push_back(forget / i);
  }
  report.fap = report.aps.back();
  if (m >= 2) report.faf = report.afs.back();
  return report;
}

namespace {

Index argmax_low_tie(const RowVector& row) {
  Index best = 0;
  for (Index c = 1; c < row.size(); ++c) {
    if (row(c) > row(best)) best = c;
  }
  return best;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    RowVector ex = (logits.row(i).array() - m).exp();
    out.row(i) = ex / ex.sum();
  }
  return out;
}

// Mean over rows of sum_c |p_c - onehot_c|^q.
double lq_risk(const Matrix& probs, const std::vector<int>& labels, double q) {
  double total = 0.0;
  for (Index i = 0; i < probs.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    for (Index c = 0; c < probs.cols(); ++c) {
      const double target = c == y ? 1.0 : 0.0;
      total += std::pow(std::abs(probs(i, c) - target), q);
    }
  }
  return total / static_cast<double>(probs.rows());
}

}  // namespace

double evaluate_accuracy(const ModelState& model, const GraphSnapshot& view,
                         const VertexBatch& task_batch, const VertexList& test_vertices) {
  if (test_vertices.empty()) throw StructuralError("empty evaluation set");
  const HeadParams& head = model.head_for(task_batch.task_index);
  const Matrix emb = gnn_forward(model.encoder, view, test_vertices);
  const Matrix logits = head_forward(head, emb);
  const std::vector<int> truth = class_indices(task_batch, test_vertices);
  Index correct = 0;
  for (Index i = 0; i < logits.rows(); ++i) {
    if (argmax_low_tie(logits.row(i)) == truth[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

BoundDiagnostics bound_components(const ModelState& model, const GraphSnapshot& view1_old,
                                  const GraphSnapshot& view1_new, const GraphSnapshot& view2,
                                  const VertexBatch& batch1, const VertexBatch& batch2,
                                  double q, const KernelConfig& kernel, std::uint64_t seed) {
  BoundDiagnostics diag;
  diag.q = q;

  // Latent samples: all of V1 under both views, all of V2 under its view.
  const Matrix z1_old = gnn_forward(model.encoder, view1_old, batch1.vertices);
  const Matrix z1_new = gnn_forward(model.encoder, view1_new, batch1.vertices);
  const Matrix z2_new = gnn_forward(model.encoder, view2, batch2.vertices);

  diag.mmd_drift = std::sqrt(std::max(0.0, mmd2_hat(z1_old, z1_new, kernel)));
  diag.mmd_crosstask = std::sqrt(std::max(0.0, mmd2_hat(z1_old, z2_new, kernel)));

  // Single-classifier risks with the first task's head.
  const HeadParams& head1 = model.head_for(1);
  const VertexList v1_test = batch1.members(Split::test);
  const VertexList v2_test = batch2.members(Split::test);
  if (v1_test.empty() || v2_test.empty()) {
    throw StructuralError("bound_components requires test splits on both batches");
  }
  const Matrix e1_test = gnn_forward(model.encoder, view1_new, v1_test);
  const Matrix e2_test = gnn_forward(model.encoder, view2, v2_test);
  diag.observed_cfr =
      lq_risk(softmax_rows(head_forward(head1, e1_test)), class_indices(batch1, v1_test), q);
  diag.new_task_risk =
      lq_risk(softmax_rows(head_forward(head1, e2_test)), class_indices(batch2, v2_test), q);

  // Lambda proxy: a fresh head trained on the pooled train splits of both
  // batches (class indices, frozen encoder), summing its two test risks.
  const VertexList v1_train = batch1.members(Split::train);
  const VertexList v2_train = batch2.members(Split::train);
  if (!v1_train.empty() && !v2_train.empty()) {
    Matrix emb(static_cast<Index>(v1_train.size() + v2_train.size()),
               model.encoder.output_dim());
    emb.topRows(static_cast<Index>(v1_train.size())) =
        gnn_forward(model.encoder, view1_new, v1_train);
    emb.bottomRows(static_cast<Index>(v2_train.size())) =
        gnn_forward(model.encoder, view2, v2_train);
    std::vector<int> pooled_labels = class_indices(batch1, v1_train);
    const std::vector<int> l2 = class_indices(batch2, v2_train);
    pooled_labels.insert(pooled_labels.end(), l2.begin(), l2.end());

    HeadParams ref = HeadParams::init(emb.cols(), 2, derive_seed(seed, "lambda-head"));
    AdamState opt_w = AdamState::zeros_like(ref.weight);
    AdamState opt_b = AdamState::zeros_like(ref.bias);
    AdamConfig adam;
    adam.lr = 1e-2;
    for (int epoch = 0; epoch < 200; ++epoch) {
      Matrix d_logits;
      cross_entropy_grad(head_forward(ref, emb), pooled_labels, d_logits);
      HeadGrads grads;
      head_backward(ref, emb, d_logits, grads);
      adam_step(ref.weight, grads.weight, opt_w, adam);
      adam_step(ref.bias, grads.bias, opt_b, adam);
    }
    const double r1 =
        lq_risk(softmax_rows(head_forward(ref, e1_test)), class_indices(batch1, v1_test), q);
    const double r2 =
        lq_risk(softmax_rows(head_forward(ref, e2_test)), class_indices(batch2, v2_test), q);
    diag.lambda_hat = r1 + r2;
  }
  return diag;
}

}  // namespace ngil
