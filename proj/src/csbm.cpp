#include "ngil/csbm.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "ngil/errors.hpp"
#include "ngil/rng.hpp"

namespace ngil {

void CsbmParams::validate() const {
  if (dim < 1) throw StructuralError("csbm: dim must be positive");
  if (mu1.size() != dim || mu2.size() != dim) {
    throw StructuralError("csbm: community means must have length dim");
  }
  if ((mu1 - mu2).lpNorm<Eigen::Infinity>() == 0.0) {
    throw StructuralError("csbm: community means must differ in some coordinate");
  }
  if (!(sigma >= 0.0)) throw StructuralError("csbm: sigma must be nonnegative");
  if (p_in < 0.0 || p_in > 1.0 || p_out < 0.0 || p_out > 1.0) {
    throw StructuralError("csbm: edge probabilities must lie in [0,1]");
  }
  if (!allow_heterophily && p_out > p_in) {
    throw StructuralError("csbm: expected p_out <= p_in (pass allow_heterophily to relax)");
  }
  if (batch_plan.empty()) throw StructuralError("csbm: batch plan must be nonempty");
  for (const auto& [c1, c2] : batch_plan) {
    if (c1 < 0 || c2 < 0 || c1 + c2 == 0) throw StructuralError("csbm: bad batch plan entry");
  }
}

CsbmParams CsbmParams::symmetric(int dim, double mu_scale, double sigma, double p_in,
                                 double p_out, std::vector<std::pair<int, int>> plan) {
  CsbmParams p;
  p.dim = dim;
  const double coord = mu_scale / std::sqrt(static_cast<double>(dim));
  p.mu1 = Vector::Constant(dim, coord);
  p.mu2 = Vector::Constant(dim, -coord);
  p.sigma = sigma;
  p.p_in = p_in;
  p.p_out = p_out;
  p.batch_plan = std::move(plan);
  return p;
}

CsbmSequence generate_csbm(const CsbmParams& params, std::uint64_t seed) {
  params.validate();
  CsbmSequence seq;
  GraphSnapshot snapshot;

  for (std::size_t t = 0; t < params.batch_plan.size(); ++t) {
    const auto [c1, c2] = params.batch_plan[t];
    const int n_new = c1 + c2;
    const auto n_old = static_cast<VertexId>(seq.community.size());

    VertexBatch batch;
    batch.task_index = static_cast<int>(t) + 1;
    batch.classes = {static_cast<int>(2 * t), static_cast<int>(2 * t + 1)};
    Matrix feats(n_new, params.dim);
    Rng feat_rng = make_rng(seed, "csbm-features", t);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int i = 0; i < n_new; ++i) {
      const std::uint8_t comm = i < c1 ? 0 : 1;
      batch.vertices.push_back(n_old + i);
      batch.labels.push_back(comm == 0 ? batch.classes.first : batch.classes.second);
      seq.community.push_back(comm);
      const Vector& mu = comm == 0 ? params.mu1 : params.mu2;
      for (int d = 0; d < params.dim; ++d) {
        feats(i, d) = mu(d) + params.sigma * noise(feat_rng);
      }
    }
    batch.split.assign(batch.vertices.size(), Split::unassigned);

    // Candidate edges: every pair with at least one endpoint in the new
    // batch, scanned new-vertex-major in id order.
    std::vector<Edge> edges;
    Rng edge_rng = make_rng(seed, "csbm-edges", t);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (VertexId w = n_old; w < n_old + n_new; ++w) {
      const std::uint8_t cw = seq.community[static_cast<std::size_t>(w)];
      for (VertexId u = 0; u < w; ++u) {
        const std::uint8_t cu = seq.community[static_cast<std::size_t>(u)];
        const double p = cu == cw ? params.p_in : params.p_out;
        if (unit(edge_rng) < p) edges.emplace_back(u, w);
      }
    }

    snapshot = accumulate_snapshot(snapshot, batch, edges, feats);
    seq.batches.push_back(std::move(batch));
    seq.snapshots.push_back(snapshot);
    seq.edges_by_task.push_back(std::move(edges));
  }
  return seq;
}

Vector expected_mean_agg(double c1, double c2, double p_in, double p_out, const Vector& mu1,
                         const Vector& mu2) {
  const double w1 = c1 * p_in;
  const double w2 = c2 * p_out;
  const double denom = w1 + w2;
  if (!(denom > 0.0)) throw StructuralError("expected_mean_agg: degenerate input, zero denominator");
  return (w1 / denom) * mu1 + (w2 / denom) * mu2;
}

namespace {

// Mean over 1-hop neighbors, excluding self; empty neighborhoods are skipped.
// Accumulates per-coordinate sums for eligible batch-1 community-1 vertices,
// which occupy local ids 0..c1_batch1-1 by construction.
void accumulate_mean_agg(const GraphSnapshot& snap, int c1_batch1, Vector& sum, Index& count) {
  for (Index v = 0; v < static_cast<Index>(c1_batch1); ++v) {
    const auto& nbrs = snap.adjacency[static_cast<std::size_t>(v)];
    if (nbrs.empty()) continue;
    Vector agg = Vector::Zero(snap.features.cols());
    for (Index u : nbrs) agg += snap.features.row(u).transpose();
    sum += agg / static_cast<double>(nbrs.size());
    ++count;
  }
}

}  // namespace

Prop1Report verify_prop1(const CsbmParams& params, int trials, std::uint64_t seed) {
  params.validate();
  if (params.batch_plan.size() != 2) {
    throw StructuralError("verify_prop1 requires a plan with exactly two batches");
  }
  if (trials < 1000) throw StructuralError("verify_prop1 requires at least 1000 trials");
  const auto [b1c1, b1c2] = params.batch_plan[0];
  const auto [b2c1, b2c2] = params.batch_plan[1];
  if (b1c1 == 0) throw StructuralError("verify_prop1: batch 1 has no community-1 vertices");

  Prop1Report report;
  report.trials = trials;
  report.analytic_expectation_task1 =
      expected_mean_agg(b1c1, b1c2, params.p_in, params.p_out, params.mu1, params.mu2);
  report.analytic_expectation_task2 = expected_mean_agg(
      b1c1 + b2c1, b1c2 + b2c2, params.p_in, params.p_out, params.mu1, params.mu2);

  const Index dim = params.dim;
  Vector mean1 = Vector::Zero(dim), mean2 = Vector::Zero(dim);
  Vector m2_1 = Vector::Zero(dim), m2_2 = Vector::Zero(dim);  // Welford over trial means
  Index used1 = 0, used2 = 0;

  for (int trial = 0; trial < trials; ++trial) {
    const std::uint64_t trial_seed = derive_seed(seed, "prop1-trial", static_cast<std::uint64_t>(trial));
    CsbmSequence seq = generate_csbm(params, trial_seed);

    Vector sum1 = Vector::Zero(dim), sum2 = Vector::Zero(dim);
    Index n1 = 0, n2 = 0;
    accumulate_mean_agg(seq.snapshots[0], b1c1, sum1, n1);
    accumulate_mean_agg(seq.snapshots[1], b1c1, sum2, n2);
    if (n1 > 0) {
      ++used1;
      const Vector trial_mean = sum1 / static_cast<double>(n1);
      const Vector delta = trial_mean - mean1;
      mean1 += delta / static_cast<double>(used1);
      m2_1 += delta.cwiseProduct(trial_mean - mean1);
    }
    if (n2 > 0) {
      ++used2;
      const Vector trial_mean = sum2 / static_cast<double>(n2);
      const Vector delta = trial_mean - mean2;
      mean2 += delta / static_cast<double>(used2);
      m2_2 += delta.cwiseProduct(trial_mean - mean2);
    }
  }

  report.empirical_mean_task1 = mean1;
  report.empirical_mean_task2 = mean2;
  report.standard_error_task1 =
      used1 > 1 ? Vector((m2_1 / static_cast<double>(used1 - 1)).cwiseSqrt() /
                         std::sqrt(static_cast<double>(used1)))
                : Vector(Vector::Zero(dim));
  report.standard_error_task2 =
      used2 > 1 ? Vector((m2_2 / static_cast<double>(used2 - 1)).cwiseSqrt() /
                         std::sqrt(static_cast<double>(used2)))
                : Vector(Vector::Zero(dim));

  const Vector analytic_diff =
      (report.analytic_expectation_task1 - report.analytic_expectation_task2).cwiseAbs();
  const double scale = std::max({1.0, report.analytic_expectation_task1.cwiseAbs().maxCoeff(),
                                 report.analytic_expectation_task2.cwiseAbs().maxCoeff()});
  report.analytic_differs = analytic_diff.maxCoeff() > 1e-9 * scale;

  bool empirical_differs = false;
  for (Index d = 0; d < dim; ++d) {
    const double se = std::sqrt(std::pow(report.standard_error_task1(d), 2) +
                                std::pow(report.standard_error_task2(d), 2));
    const double gap = std::abs(report.empirical_mean_task1(d) - report.empirical_mean_task2(d));
    if (gap > 3.0 * se) {
      empirical_differs = true;
      break;
    }
  }
  report.verdict = report.analytic_differs && empirical_differs;
  return report;
}

std::string format_prop1_report(const Prop1Report& report) {
  std::ostringstream os;
  os.precision(12);
  auto put = [&os](const char* key, const Vector& v) {
    os << key << "=";
    for (Index d = 0; d < v.size(); ++d) os << (d ? "," : "") << v(d);
    os << "\n";
  };
  put("analytic_expectation_task1", report.analytic_expectation_task1);
  put("analytic_expectation_task2", report.analytic_expectation_task2);
  put("empirical_mean_task1", report.empirical_mean_task1);
  put("empirical_mean_task2", report.empirical_mean_task2);
  put("standard_error_task1", report.standard_error_task1);
  put("standard_error_task2", report.standard_error_task2);
  os << "trials=" << report.trials << "\n";
  os << "analytic_differs=" << (report.analytic_differs ? "true" : "false") << "\n";
  os << "verdict=" << (report.verdict ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace ngil
