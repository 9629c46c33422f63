// Command-line front end: synthetic-data generation, training runs,
// verification and diagnostics utilities.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ngil/csbm.hpp"
#include "ngil/errors.hpp"
#include "ngil/io.hpp"
#include "ngil/kernels.hpp"
#include "ngil/metrics.hpp"
#include "ngil/nn.hpp"
#include "ngil/rng.hpp"
#include "ngil/train.hpp"

namespace {

using namespace ngil;

std::vector<std::pair<int, int>> parse_plan(const std::string& text, int repeat) {
  std::vector<std::pair<int, int>> base;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw StructuralError("plan entries look like c1:c2, got '" + item + "'");
    }
    base.emplace_back(std::stoi(item.substr(0, colon)), std::stoi(item.substr(colon + 1)));
  }
  std::vector<std::pair<int, int>> out;
  for (int r = 0; r < repeat; ++r) out.insert(out.end(), base.begin(), base.end());
  return out;
}

std::string plan_to_string(const std::vector<std::pair<int, int>>& plan) {
  std::ostringstream os;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (i) os << ",";
    os << plan[i].first << ":" << plan[i].second;
  }
  return os.str();
}

SampleMatrix load_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BundleError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw BundleError(path + " line " + std::to_string(lineno) + ": bad number '" + cell +
                          "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw BundleError(path + " line " + std::to_string(lineno) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw BundleError(path + " is empty");
  SampleMatrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows.front().size(); ++j) {
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return m;
}

KernelConfig kernel_from_flags(const std::string& alphas, bool squared) {
  KernelConfig cfg;
  cfg.alphas.clear();
  std::stringstream ss(alphas);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) cfg.alphas.push_back(std::stod(item));
  }
  cfg.norm = squared ? KernelNorm::squared_l2 : KernelNorm::plain_l2;
  cfg.validate();
  return cfg;
}

int cmd_gen_csbm(const std::string& out, const std::string& plan_text, int repeat, double p_in,
                 double p_out, int dim, double mu_scale, double sigma, std::uint64_t seed) {
  const auto plan = parse_plan(plan_text, repeat);
  CsbmParams params = CsbmParams::symmetric(dim, mu_scale, sigma, p_in, p_out, plan);
  const CsbmSequence seq = generate_csbm(params, seed);
  write_graph_bundle(out, bundle_from_sequence(seq));
  const GraphSnapshot& last = seq.snapshots.back();
  std::cout << "bundle " << out << ": " << last.size() << " vertices, " << last.edge_count()
            << " edges, " << seq.batches.size() << " tasks (plan "
            << plan_to_string(plan) << ")\n";
  return 0;
}

int cmd_verify_prop1(const std::string& plan_text, double p_in, double p_out, int dim,
                     double mu_scale, double sigma, int trials, std::uint64_t seed,
                     const std::string& out) {
  CsbmParams params =
      CsbmParams::symmetric(dim, mu_scale, sigma, p_in, p_out, parse_plan(plan_text, 1));
  const Prop1Report report = verify_prop1(params, trials, seed);
  const std::string text = format_prop1_report(report);
  if (!out.empty()) {
    std::ofstream file(out, std::ios::binary);
    if (!file) throw BundleError("cannot write " + out);
    file << text;
  }
  std::cout << text;
  return 0;
}

int cmd_mmd(const std::string& x_path, const std::string& y_path, const std::string& alphas,
            bool squared) {
  const SampleMatrix X = load_csv_matrix(x_path);
  const SampleMatrix Y = load_csv_matrix(y_path);
  const double value = mmd2_hat(X, Y, kernel_from_flags(alphas, squared));
  std::printf("%.6f\n", value);
  return 0;
}

int cmd_metrics(const std::string& path) {
  const PerformanceMatrix matrix = load_performance_matrix(path);
  const MetricsReport report = compute_metrics(matrix);
  std::ostringstream os;
  os.precision(6);
  os << "FAP=" << report.fap << " FAF=";
  if (report.faf) {
    os << *report.faf;
  } else {
    os << "NA";
  }
  std::cout << os.str() << "\n";
  return 0;
}

// Finite-difference verification of the two training objectives on built-in
// toy instances.
int cmd_grad_check(double eps, double tol, std::uint64_t seed) {
  CsbmParams params = CsbmParams::symmetric(2, 1.0, 0.8, 0.4, 0.2, {{6, 6}, {6, 6}});
  CsbmSequence seq = generate_csbm(params, derive_seed(seed, "grad-check-data"));
  for (auto& b : seq.batches) {
    b = split_vertices(b, {0.6, 0.2, 0.2},
                       derive_seed(seed, "s", static_cast<std::uint64_t>(b.task_index)));
  }

  GnnParams encoder = GnnParams::init(2, 4, 1, Activation::tanh, derive_seed(seed, "enc"));
  std::vector<HeadParams> heads{HeadParams::init(4, 2, derive_seed(seed, "h1")),
                                HeadParams::init(4, 2, derive_seed(seed, "h2"))};

  // cross-entropy through the encoder on task 1
  TaskObjective ce;
  ce.task_index = 1;
  ce.train_view = &seq.snapshots[0];
  ce.old_view = ce.train_view;
  ce.train_vertices = seq.batches[0].members(Split::train);
  ce.train_classes = class_indices(seq.batches[0], ce.train_vertices);

  // full regularized objective on task 2
  MemoryStore mem = select_memory({seq.batches[0]}, seq.snapshots[0], 1, 4,
                                  MemoryStrategy::per_class_uniform, derive_seed(seed, "mem"));
  TaskObjective full;
  full.task_index = 2;
  full.train_view = &seq.snapshots[1];
  full.old_view = full.train_view;
  full.train_vertices = seq.batches[1].members(Split::train);
  full.train_classes = class_indices(seq.batches[1], full.train_vertices);
  full.reg_enabled = true;
  full.alpha = 0.3;
  full.beta = 0.7;
  full.memory_sample = mem.per_task[0].vertices;
  full.new_batch_sample = full.train_vertices;
  full.previous_view = &mem.retained;
  full.drift_enabled = true;

  const std::vector<std::pair<const char*, const TaskObjective*>> cases = {
      {"cross-entropy", &ce}, {"ssrm-objective", &full}};
  bool ok = true;
  for (const auto& [name, obj] : cases) {
    ObjectiveGrads grads;
    evaluate_objective(encoder, heads, *obj, &grads);
    std::vector<HeadGrads> hg(grads.heads.begin(), grads.heads.end());
    const Vector analytic = pack_grads(grads.encoder, hg);
    const Vector at = pack_params(encoder, heads);
    const auto objective = [&](const Vector& flat) {
      GnnParams g = encoder;
      std::vector<HeadParams> h = heads;
      unpack_params(flat, g, h);
      return evaluate_objective(g, h, *obj, nullptr).total;
    };
    const GradCheckReport report =
        grad_check(objective, at, analytic, eps, 500, derive_seed(seed, name));
    std::printf("%s: max relative error %.3e over %lld coordinates (%s)\n", name,
                report.max_relative_error, static_cast<long long>(report.coordinates_checked),
                report.passed(tol) ? "pass" : "FAIL");
    ok = ok && report.passed(tol);
  }
  return ok ? 0 : 1;
}

int cmd_run(ExperimentConfig config) {
  config.validate();
  if (config.out_dir.empty()) throw StructuralError("run requires an output directory (--out)");
  if (config.trials == 1) {
    const RunResult result = run_sequence(config);
    write_run_artifacts(result, config.out_dir);
    std::cout << "run " << config.out_dir << ": status=" << result.status
              << " fap=" << result.metrics.fap;
    if (result.metrics.faf) std::cout << " faf=" << *result.metrics.faf;
    std::cout << "\n";
    return result.status == "ok" ? 0 : 1;
  }
  // Independent seed-derived trials, one artifact subdirectory each.
  std::vector<std::future<std::pair<int, std::string>>> futures;
  for (int t = 0; t < config.trials; ++t) {
    futures.push_back(std::async(std::launch::async, [config, t]() {
      ExperimentConfig trial = config;
      trial.trials = 1;
      trial.seed = derive_seed(config.seed, "trial", static_cast<std::uint64_t>(t));
      trial.out_dir =
          (std::filesystem::path(config.out_dir) / ("trial-" + std::to_string(t))).string();
      const RunResult result = run_sequence(trial);
      write_run_artifacts(result, trial.out_dir);
      std::ostringstream os;
      os << "trial " << t << ": status=" << result.status << " fap=" << result.metrics.fap;
      return std::make_pair(result.status == "ok" ? 0 : 1, os.str());
    }));
  }
  int status = 0;
  for (auto& f : futures) {
    const auto [code, line] = f.get();
    std::cout << line << "\n";
    status = std::max(status, code);
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual learning on evolving graphs"};
  app.require_subcommand(1);

  // gen-csbm
  auto* gen = app.add_subcommand("gen-csbm", "Generate a synthetic graph bundle");
  std::string gen_out, gen_plan = "80:20,20:80";
  int gen_repeat = 1, gen_dim = 8;
  double gen_p_in = 0.1, gen_p_out = 0.05, gen_mu = 1.0, gen_sigma = 1.0;
  std::uint64_t gen_seed = 1;
  gen->add_option("--out", gen_out, "Bundle directory")->required();
  gen->add_option("--plan", gen_plan, "Comma list of c1:c2 per task");
  gen->add_option("--repeat", gen_repeat, "Repeat the plan this many times");
  gen->add_option("--p-in", gen_p_in, "Intra-community edge probability");
  gen->add_option("--p-out", gen_p_out, "Inter-community edge probability");
  gen->add_option("--dim", gen_dim, "Feature dimension");
  gen->add_option("--mu-scale", gen_mu, "Half the mean separation");
  gen->add_option("--sigma", gen_sigma, "Feature noise standard deviation");
  gen->add_option("--seed", gen_seed, "Generator seed");

  // run
  auto* run = app.add_subcommand("run", "Execute a training sequence");
  std::string run_config;
  ExperimentConfig flags;
  run->add_option("--config", run_config, "Config file (flat key/value JSON)");
  run->add_option("--bundle", flags.bundle, "Graph bundle directory");
  run->add_option("--csbm-plan", flags.csbm_plan, "Inline CSBM plan c1:c2,...");
  run->add_option("--csbm-p-in", flags.csbm_p_in, "CSBM p_in");
  run->add_option("--csbm-p-out", flags.csbm_p_out, "CSBM p_out");
  run->add_option("--csbm-mu-scale", flags.csbm_mu_scale, "CSBM mean scale");
  run->add_option("--csbm-sigma", flags.csbm_sigma, "CSBM feature noise");
  run->add_option("--csbm-dim", flags.csbm_dim, "CSBM feature dimension");
  run->add_option("--trainer", flags.trainer, "bare | joint | replay | bare+ssrm | replay+ssrm");
  run->add_option("--mode", flags.mode, "inductive | transductive");
  run->add_option("--alpha,--weight-drift", flags.alpha, "Drift-term weight");
  run->add_option("--beta,--weight-crosstask", flags.beta, "Cross-task-term weight");
  run->add_option("--budget", flags.budget, "Memory vertices per past task");
  run->add_option("--subsample", flags.subsample, "Sample cap per MMD term");
  run->add_option("--kernel-alphas", flags.kernel_alphas, "Kernel bandwidth coefficients");
  run->add_option("--kernel-norm", flags.kernel_norm, "plain | squared");
  run->add_option("--epochs", flags.epochs, "Epochs per task");
  run->add_option("--lr", flags.lr, "Learning rate");
  run->add_option("--hidden", flags.hidden, "Hidden width");
  run->add_option("--layers", flags.layers, "Encoder depth (= ego-graph hops)");
  run->add_option("--activation", flags.activation, "linear | relu | tanh");
  run->add_option("--memory-strategy", flags.memory_strategy, "uniform | per-class-uniform");
  run->add_option("--seed", flags.seed, "Run seed");
  run->add_option("--out", flags.out_dir, "Artifact directory");
  run->add_option("--trials", flags.trials, "Seed-derived trials run concurrently");

  // verify-prop1
  auto* prop = app.add_subcommand("verify-prop1", "Monte Carlo imbalance-shift verification");
  std::string prop_plan = "80:20,20:80", prop_out;
  double prop_p_in = 0.1, prop_p_out = 0.05, prop_mu = 1.0, prop_sigma = 1.0;
  int prop_dim = 1, prop_trials = 10000;
  std::uint64_t prop_seed = 1;
  prop->add_option("--plan", prop_plan, "Two batches, c1:c2,c1:c2");
  prop->add_option("--p-in", prop_p_in, "Intra-community edge probability");
  prop->add_option("--p-out", prop_p_out, "Inter-community edge probability");
  prop->add_option("--dim", prop_dim, "Feature dimension");
  prop->add_option("--mu-scale", prop_mu, "Half the mean separation");
  prop->add_option("--sigma", prop_sigma, "Feature noise standard deviation");
  prop->add_option("--trials", prop_trials, "Monte Carlo trials");
  prop->add_option("--seed", prop_seed, "Seed");
  prop->add_option("--out", prop_out, "Also write the report here");

  // mmd
  auto* mmd = app.add_subcommand("mmd", "Estimate squared MMD between two sample CSVs");
  std::string mmd_x, mmd_y, mmd_alphas = "1,0.1,0.01";
  bool mmd_squared = false;
  mmd->add_option("x", mmd_x, "CSV, one sample per row")->required();
  mmd->add_option("y", mmd_y, "CSV, one sample per row")->required();
  mmd->add_option("--kernel-alphas", mmd_alphas, "Kernel bandwidth coefficients");
  mmd->add_flag("--squared", mmd_squared, "Use the squared-L2 exponent");

  // grad-check
  auto* grad = app.add_subcommand("grad-check", "Finite-difference check of the objectives");
  double grad_eps = 1e-5, grad_tol = 1e-4;
  std::uint64_t grad_seed = 1;
  grad->add_option("--eps", grad_eps, "Central-difference step");
  grad->add_option("--tol", grad_tol, "Max relative error accepted");
  grad->add_option("--seed", grad_seed, "Seed");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Compute FAP/FAF from a matrix CSV");
  std::string metrics_path;
  metrics->add_option("matrix", metrics_path, "Performance matrix CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << "\n";
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen_csbm(gen_out, gen_plan, gen_repeat, gen_p_in, gen_p_out, gen_dim, gen_mu,
                          gen_sigma, gen_seed);
    }
    if (run->parsed()) {
      ExperimentConfig config;
      if (!run_config.empty()) config = config_from_json_file(run_config);
      // flags win over config-file values
      auto took = [&](const std::string& name) { return run->count(name) > 0; };
      if (took("--bundle")) config.bundle = flags.bundle;
      if (took("--csbm-plan")) config.csbm_plan = flags.csbm_plan;
      if (took("--csbm-p-in")) config.csbm_p_in = flags.csbm_p_in;
      if (took("--csbm-p-out")) config.csbm_p_out = flags.csbm_p_out;
      if (took("--csbm-mu-scale")) config.csbm_mu_scale = flags.csbm_mu_scale;
      if (took("--csbm-sigma")) config.csbm_sigma = flags.csbm_sigma;
      if (took("--csbm-dim")) config.csbm_dim = flags.csbm_dim;
      if (took("--trainer")) config.trainer = flags.trainer;
      if (took("--mode")) config.mode = flags.mode;
      if (took("--alpha")) config.alpha = flags.alpha;
      if (took("--beta")) config.beta = flags.beta;
      if (took("--budget")) config.budget = flags.budget;
      if (took("--subsample")) config.subsample = flags.subsample;
      if (took("--kernel-alphas")) config.kernel_alphas = flags.kernel_alphas;
      if (took("--kernel-norm")) config.kernel_norm = flags.kernel_norm;
      if (took("--epochs")) config.epochs = flags.epochs;
      if (took("--lr")) config.lr = flags.lr;
      if (took("--hidden")) config.hidden = flags.hidden;
      if (took("--layers")) config.layers = flags.layers;
      if (took("--activation")) config.activation = flags.activation;
      if (took("--memory-strategy")) config.memory_strategy = flags.memory_strategy;
      if (took("--seed")) config.seed = flags.seed;
      if (took("--out")) config.out_dir = flags.out_dir;
      if (took("--trials")) config.trials = flags.trials;
      return cmd_run(std::move(config));
    }
    if (prop->parsed()) {
      return cmd_verify_prop1(prop_plan, prop_p_in, prop_p_out, prop_dim, prop_mu, prop_sigma,
                              prop_trials, prop_seed, prop_out);
    }
    if (mmd->parsed()) return cmd_mmd(mmd_x, mmd_y, mmd_alphas, mmd_squared);
    if (grad->parsed()) return cmd_grad_check(grad_eps, grad_tol, grad_seed);
    if (metrics->parsed()) return cmd_metrics(metrics_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
