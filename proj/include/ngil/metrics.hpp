// Performance matrix, APS/AFS/FAP/FAF, l^q risks, and the latent-space
// bound-component diagnostics for two-task runs.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ngil/graph.hpp"
#include "ngil/kernels.hpp"
#include "ngil/model.hpp"
#include "ngil/types.hpp"

namespace ngil {

/// Lower-triangular accuracy record: entry(i, j) is the accuracy on task j
/// after training through task i (1-based, j <= i).
struct PerformanceMatrix {
  std::vector<std::vector<double>> rows;

  int tasks() const { return static_cast<int>(rows.size()); }
  double entry(int i, int j) const { return rows[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)]; }
  void append_row(std::vector<double> row);
  void validate() const;
};

/// APS_i = mean_{j<=i} r_ij; AFS_i = mean_{j<=i} (r_ij - r_jj), defined for
/// i >= 2 so that AFS_m = FAF. FAF is absent when m = 1.
struct MetricsReport {
  std::vector<double> aps;
  std::vector<double> afs;  // afs[k] corresponds to i = k+2
  double fap = 0.0;
  std::optional<double> faf;
};

MetricsReport compute_metrics(const PerformanceMatrix& matrix);

/// Fraction of argmax-correct predictions on the batch's test vertices under
/// the given view, using the batch's task head. Ties break toward the lower
/// class index.
double evaluate_accuracy(const ModelState& model, const GraphSnapshot& view,
                         const VertexBatch& task_batch, const VertexList& test_vertices);

/// Latent-space components of the two-task forgetting bound:
///   observed_cfr <= new_task_risk + 2*mmd_drift + mmd_crosstask + lambda_hat
/// Risks are empirical l^q distances between softmax outputs and one-hot
/// labels under the first task's head (the bound holds for a single
/// classifier); lambda_hat is the proxy obtained by training a fresh head on
/// pooled train data atop the frozen encoder and summing its two risks.
struct BoundDiagnostics {
  double q = 1.0;
  double new_task_risk = 0.0;
  double mmd_drift = 0.0;      // first batch's embeddings, old vs new graph
  double mmd_crosstask = 0.0;  // first batch under old graph vs second batch
  std::optional<double> lambda_hat;
  double observed_cfr = 0.0;

  std::optional<double> bound_rhs() const {
    if (!lambda_hat) return std::nullopt;
    return new_task_risk + 2.0 * mmd_drift + mmd_crosstask + *lambda_hat;
  }
  /// rhs - cfr; negative means the proxy bound is violated.
  std::optional<double> margin() const {
    auto rhs = bound_rhs();
    if (!rhs) return std::nullopt;
    return *rhs - observed_cfr;
  }
};

/// Computes the diagnostics after a completed two-task run. `view1_old` and
/// `view1_new` are the graphs the first batch was observed under before and
/// after the second task arrived; `view2` is the second batch's graph (all
/// three coincide with the accumulated snapshots in inductive mode, and are
/// per-task induced views in transductive mode).
BoundDiagnostics bound_components(const ModelState& model, const GraphSnapshot& view1_old,
                                  const GraphSnapshot& view1_new, const GraphSnapshot& view2,
                                  const VertexBatch& batch1, const VertexBatch& batch2,
                                  double q, const KernelConfig& kernel, std::uint64_t seed);

}  // namespace ngil
