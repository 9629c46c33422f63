// Minimal neural stack: mean-aggregation GNN encoder, per-task linear heads,
// cross-entropy, exact backpropagation, Adam, and finite-difference checking.
//
// Layer rule: h^{l+1}_v = act(W_l' * mean({h^l_u : u in N(v) + {v}}) + b_l),
// so each target's embedding depends only on its depth-hop ego graph.
// Neighbor sums run in ascending local-id order with the self row merged at
// its sorted position; restricting to a subgraph that contains a vertex's
// full ball reproduces its embedding bit for bit.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ngil/graph.hpp"
#include "ngil/types.hpp"

namespace ngil {

enum class Activation : std::uint8_t { linear, relu, tanh };

Activation parse_activation(const std::string& name);
std::string activation_name(Activation act);

struct GnnLayer {
  Matrix weight;   // in x out
  RowVector bias;  // 1 x out
};

struct GnnParams {
  std::vector<GnnLayer> layers;
  Activation activation = Activation::relu;

  int depth() const { return static_cast<int>(layers.size()); }
  Index input_dim() const { return layers.front().weight.rows(); }
  Index output_dim() const { return layers.back().weight.cols(); }

  /// Uniform init in +-sqrt(6/(fan_in+fan_out)), seed-controlled; hidden
  /// width is used for every layer past the first.
  static GnnParams init(Index input_dim, Index hidden_dim, int depth, Activation act,
                        std::uint64_t seed);
};

struct HeadParams {
  Matrix weight;   // embed x classes
  RowVector bias;  // 1 x classes

  Index class_count() const { return weight.cols(); }
  static HeadParams init(Index embed_dim, Index classes, std::uint64_t seed);
};

/// mean({H.row(u) : u in N(v) + {v}}) per local vertex, in sorted-id order.
Matrix aggregate_mean(const GraphSnapshot& graph, const Matrix& rows);

/// Adjoint of aggregate_mean: out[u] += in[v]/(deg(v)+1) for u in N(v)+{v}.
Matrix aggregate_mean_adjoint(const GraphSnapshot& graph, const Matrix& rows);

/// Intermediate activations of one forward pass over all local vertices.
struct GnnForwardCache {
  std::vector<Matrix> inputs;      // H^0 .. H^{L-1}
  std::vector<Matrix> aggregated;  // mean-aggregated inputs per layer
  std::vector<Matrix> preacts;     // aggregated*W + b per layer
  Matrix embeddings;               // H^L
};

/// Forward pass over every vertex of `graph`; fills `cache` when non-null.
Matrix gnn_forward_all(const GnnParams& params, const GraphSnapshot& graph,
                       GnnForwardCache* cache = nullptr);

/// Embedding rows for the given global-id targets.
Matrix gnn_forward(const GnnParams& params, const GraphSnapshot& graph,
                   const VertexList& targets);

struct GnnGrads {
  std::vector<GnnLayer> layers;  // same shapes as the parameters

  static GnnGrads zeros_like(const GnnParams& params);
  void accumulate(const GnnGrads& other);
};

/// Backpropagates d(loss)/d(embeddings) — rows aligned with the forward's
/// local vertices, zero rows for untouched vertices — into parameter grads.
GnnGrads gnn_backward(const GnnParams& params, const GraphSnapshot& graph,
                      const GnnForwardCache& cache, const Matrix& d_embeddings);

Matrix head_forward(const HeadParams& head, const Matrix& embeddings);

struct HeadGrads {
  Matrix weight;
  RowVector bias;
};

/// d(logits) backward through the affine head; returns d(embeddings).
Matrix head_backward(const HeadParams& head, const Matrix& embeddings, const Matrix& d_logits,
                     HeadGrads& grads);

/// Mean over rows of -log softmax(logits)[label], max-stabilized.
double cross_entropy(const Matrix& logits, const std::vector<int>& labels);

/// Loss plus d(loss)/d(logits).
double cross_entropy_grad(const Matrix& logits, const std::vector<int>& labels,
                          Matrix& d_logits);

struct AdamConfig {
  double lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment accumulators for one parameter tensor.
struct AdamState {
  Matrix m;
  Matrix v;
  long step = 0;

  static AdamState zeros_like(const Eigen::Ref<const Matrix>& param);
};

/// One bias-corrected Adam update in place. Throws DivergenceError on a
/// non-finite gradient.
void adam_step(Eigen::Ref<Matrix> param, const Eigen::Ref<const Matrix>& grad, AdamState& state,
               const AdamConfig& cfg);

struct GradCheckReport {
  double max_relative_error = 0.0;
  Index worst_coordinate = -1;
  Index coordinates_checked = 0;
  bool passed(double tolerance) const { return max_relative_error < tolerance; }
};

/// Central finite differences of `objective` at `point` against
/// `analytic_grad`, over a seeded coordinate subset (at least
/// min_coordinates, or all when fewer). Relative error uses
/// |a-n| / max(1, |a|, |n|).
GradCheckReport grad_check(const std::function<double(const Vector&)>& objective,
                           const Vector& point, const Vector& analytic_grad, double eps,
                           Index min_coordinates = 200, std::uint64_t seed = 0);

/// Flatten/unflatten helpers used by the gradient checks.
Vector pack_params(const GnnParams& gnn, const std::vector<HeadParams>& heads);
void unpack_params(const Vector& flat, GnnParams& gnn, std::vector<HeadParams>& heads);
Vector pack_grads(const GnnGrads& gnn, const std::vector<HeadGrads>& heads);

}  // namespace ngil
