#include "ngil/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ngil/errors.hpp"
#include "ngil/rng.hpp"

namespace ngil {

Activation parse_activation(const std::string& name) {
  if (name == "linear") return Activation::linear;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw NotFoundError("unknown activation: " + name);
}

std::string activation_name(Activation act) {
  switch (act) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

namespace {

Matrix glorot_uniform(Index rows, Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix w(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) w(i, j) = u(rng);
  }
  return w;
}

Matrix apply_activation(Activation act, const Matrix& pre) {
  switch (act) {
    case Activation::linear: return pre;
    case Activation::relu: return pre.cwiseMax(0.0);
    case Activation::tanh: return pre.array().tanh().matrix();
  }
  return pre;
}

// Derivative as a function of the preactivation.
Matrix activation_derivative(Activation act, const Matrix& pre) {
  switch (act) {
    case Activation::linear: return Matrix::Ones(pre.rows(), pre.cols());
    case Activation::relu:
      return (pre.array() > 0.0).cast<double>().matrix();
    case Activation::tanh: {
      Matrix t = pre.array().tanh().matrix();
      return (1.0 - t.array().square()).matrix();
    }
  }
  return Matrix::Ones(pre.rows(), pre.cols());
}

}  // namespace

GnnParams GnnParams::init(Index input_dim, Index hidden_dim, int depth, Activation act,
                          std::uint64_t seed) {
  if (depth < 1) throw StructuralError("encoder depth must be at least 1");
  GnnParams p;
  p.activation = act;
  Index in = input_dim;
  for (int l = 0; l < depth; ++l) {
    Rng rng = make_rng(seed, "gnn-init", static_cast<std::uint64_t>(l));
    GnnLayer layer;
    layer.weight = glorot_uniform(in, hidden_dim, rng);
    layer.bias = RowVector::Zero(hidden_dim);
    p.layers.push_back(std::move(layer));
    in = hidden_dim;
  }
  return p;
}

HeadParams HeadParams::init(Index embed_dim, Index classes, std::uint64_t seed) {
  Rng rng = make_rng(seed, "head-init");
  HeadParams h;
  h.weight = glorot_uniform(embed_dim, classes, rng);
  h.bias = RowVector::Zero(classes);
  return h;
}

Matrix aggregate_mean(const GraphSnapshot& graph, const Matrix& rows) {
  const Index n = graph.size();
  Matrix out(n, rows.cols());
  RowVector acc(rows.cols());
  for (Index v = 0; v < n; ++v) {
    const auto& nbrs = graph.adjacency[static_cast<std::size_t>(v)];
    acc.setZero();
    bool self_done = false;
    for (Index u : nbrs) {
      if (!self_done && u > v) {
        acc += rows.row(v);
        self_done = true;
      }
      acc += rows.row(u);
    }
    if (!self_done) acc += rows.row(v);
    out.row(v) = acc / static_cast<double>(nbrs.size() + 1);
  }
  return out;
}

Matrix aggregate_mean_adjoint(const GraphSnapshot& graph, const Matrix& rows) {
  const Index n = graph.size();
  Matrix out = Matrix::Zero(n, rows.cols());
  for (Index v = 0; v < n; ++v) {
    const auto& nbrs = graph.adjacency[static_cast<std::size_t>(v)];
    const double scale = 1.0 / static_cast<double>(nbrs.size() + 1);
    const RowVector contrib = rows.row(v) * scale;
    out.row(v) += contrib;
    for (Index u : nbrs) out.row(u) += contrib;
  }
  return out;
}

Matrix gnn_forward_all(const GnnParams& params, const GraphSnapshot& graph,
                       GnnForwardCache* cache) {
  if (graph.features.cols() != params.input_dim()) {
    throw StructuralError("feature dimension does not match encoder input");
  }
  Matrix h = graph.features;
  if (cache) {
    cache->inputs.clear();
    cache->aggregated.clear();
    cache->preacts.clear();
  }
  for (const GnnLayer& layer : params.layers) {
    Matrix agg = aggregate_mean(graph, h);
    Matrix pre = agg * layer.weight;
    pre.rowwise() += layer.bias;
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->aggregated.push_back(std::move(agg));
      cache->preacts.push_back(pre);
    }
    h = apply_activation(params.activation, pre);
  }
  if (cache) cache->embeddings = h;
  return h;
}

Matrix gnn_forward(const GnnParams& params, const GraphSnapshot& graph,
                   const VertexList& targets) {
  const Matrix all = gnn_forward_all(params, graph);
  Matrix out(static_cast<Index>(targets.size()), all.cols());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    out.row(static_cast<Index>(i)) = all.row(graph.local_index(targets[i]));
  }
  return out;
}

GnnGrads GnnGrads::zeros_like(const GnnParams& params) {
  GnnGrads g;
  for (const GnnLayer& layer : params.layers) {
    g.layers.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                        RowVector::Zero(layer.bias.cols())});
  }
  return g;
}

void GnnGrads::accumulate(const GnnGrads& other) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weight += other.layers[l].weight;
    layers[l].bias += other.layers[l].bias;
  }
}

GnnGrads gnn_backward(const GnnParams& params, const GraphSnapshot& graph,
                      const GnnForwardCache& cache, const Matrix& d_embeddings) {
  GnnGrads grads = GnnGrads::zeros_like(params);
  Matrix dh = d_embeddings;
  for (int l = params.depth() - 1; l >= 0; --l) {
    const auto lu = static_cast<std::size_t>(l);
    const Matrix dpre =
        dh.cwiseProduct(activation_derivative(params.activation, cache.preacts[lu]));
    grads.layers[lu].weight = cache.aggregated[lu].transpose() * dpre;
    grads.layers[lu].bias = dpre.colwise().sum();
    if (l > 0) {
      dh = aggregate_mean_adjoint(graph, dpre * params.layers[lu].weight.transpose());
    }
  }
  return grads;
}

Matrix head_forward(const HeadParams& head, const Matrix& embeddings) {
  if (embeddings.cols() != head.weight.rows()) {
    throw StructuralError("embedding dimension does not match head");
  }
  Matrix logits = embeddings * head.weight;
  logits.rowwise() += head.bias;
  return logits;
}

Matrix head_backward(const HeadParams& head, const Matrix& embeddings, const Matrix& d_logits,
                     HeadGrads& grads) {
  grads.weight = embeddings.transpose() * d_logits;
  grads.bias = d_logits.colwise().sum();
  return d_logits * head.weight.transpose();
}

double cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  Matrix unused;
  return cross_entropy_grad(logits, labels, unused);
}

double cross_entropy_grad(const Matrix& logits, const std::vector<int>& labels,
                          Matrix& d_logits) {
  const Index n = logits.rows();
  if (static_cast<Index>(labels.size()) != n) {
    throw StructuralError("label count does not match logit rows");
  }
  d_logits.resize(n, logits.cols());
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= logits.cols()) throw StructuralError("label id out of range");
    const double m = logits.row(i).maxCoeff();
    RowVector shifted = logits.row(i).array() - m;
    RowVector ex = shifted.array().exp();
    const double z = ex.sum();
    loss -= shifted(label) - std::log(z);
    d_logits.row(i) = ex / z;
    d_logits(i, label) -= 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  d_logits *= inv_n;
  return loss * inv_n;
}

AdamState AdamState::zeros_like(const Eigen::Ref<const Matrix>& param) {
  AdamState s;
  s.m = Matrix::Zero(param.rows(), param.cols());
  s.v = Matrix::Zero(param.rows(), param.cols());
  return s;
}

void adam_step(Eigen::Ref<Matrix> param, const Eigen::Ref<const Matrix>& grad, AdamState& state,
               const AdamConfig& cfg) {
  if (!grad.allFinite()) throw DivergenceError("non-finite gradient in optimizer step");
  state.step += 1;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const Matrix mhat = state.m / bc1;
  const Matrix vhat = state.v / bc2;
  param.array() -= cfg.lr * mhat.array() / (vhat.array().sqrt() + cfg.eps);
}

GradCheckReport grad_check(const std::function<double(const Vector&)>& objective,
                           const Vector& point, const Vector& analytic_grad, double eps,
                           Index min_coordinates, std::uint64_t seed) {
  const Index n = point.size();
  std::vector<Index> coords(static_cast<std::size_t>(n));
  std::iota(coords.begin(), coords.end(), Index{0});
  if (n > min_coordinates) {
    Rng rng = make_rng(seed, "grad-check");
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(static_cast<std::size_t>(min_coordinates));
  }

  GradCheckReport report;
  report.coordinates_checked = static_cast<Index>(coords.size());
  Vector x = point;
  for (Index c : coords) {
    const double orig = x(c);
    x(c) = orig + eps;
    const double up = objective(x);
    x(c) = orig - eps;
    const double down = objective(x);
    x(c) = orig;
    const double numeric = (up - down) / (2.0 * eps);
    const double analytic = analytic_grad(c);
    const double denom = std::max({1.0, std::abs(numeric), std::abs(analytic)});
    const double rel = std::abs(numeric - analytic) / denom;
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_coordinate = c;
    }
  }
  return report;
}

Vector pack_params(const GnnParams& gnn, const std::vector<HeadParams>& heads) {
  Index total = 0;
  for (const auto& l : gnn.layers) total += l.weight.size() + l.bias.size();
  for (const auto& h : heads) total += h.weight.size() + h.bias.size();
  Vector flat(total);
  Index at = 0;
  auto put = [&](const auto& m) {
    for (Index j = 0; j < m.cols(); ++j) {
      for (Index i = 0; i < m.rows(); ++i) flat(at++) = m(i, j);
    }
  };
  for (const auto& l : gnn.layers) {
    put(l.weight);
    put(l.bias);
  }
  for (const auto& h : heads) {
    put(h.weight);
    put(h.bias);
  }
  return flat;
}

void unpack_params(const Vector& flat, GnnParams& gnn, std::vector<HeadParams>& heads) {
  Index at = 0;
  auto take = [&](auto& m) {
    for (Index j = 0; j < m.cols(); ++j) {
      for (Index i = 0; i < m.rows(); ++i) m(i, j) = flat(at++);
    }
  };
  for (auto& l : gnn.layers) {
    take(l.weight);
    take(l.bias);
  }
  for (auto& h : heads) {
    take(h.weight);
    take(h.bias);
  }
  if (at != flat.size()) throw StructuralError("flat parameter size mismatch");
}

Vector pack_grads(const GnnGrads& gnn, const std::vector<HeadGrads>& heads) {
  Index total = 0;
  for (const auto& l : gnn.layers) total += l.weight.size() + l.bias.size();
  for (const auto& h : heads) total += h.weight.size() + h.bias.size();
  Vector flat(total);
  Index at = 0;
  auto put = [&](const auto& m) {
    for (Index j = 0; j < m.cols(); ++j) {
      for (Index i = 0; i < m.rows(); ++i) flat(at++) = m(i, j);
    }
  };
  for (const auto& l : gnn.layers) {
    put(l.weight);
    put(l.bias);
  }
  for (const auto& h : heads) {
    put(h.weight);
    put(h.bias);
  }
  return flat;
}

}  // namespace ngil
