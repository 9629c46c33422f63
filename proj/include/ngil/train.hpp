// Continual-learning trainers over an evolving graph: bare, joint,
// experience replay, and the structural-shift regularizer that penalizes the
// MMD between memory-vertex embeddings under the previous and current graph
// and between memory and new-batch embeddings.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ngil/csbm.hpp"
#include "ngil/graph.hpp"
#include "ngil/kernels.hpp"
#include "ngil/metrics.hpp"
#include "ngil/model.hpp"
#include "ngil/types.hpp"

namespace ngil {

enum class TrainerKind : std::uint8_t { bare, joint, replay, bare_ssrm, replay_ssrm };
enum class Mode : std::uint8_t { inductive, transductive };
enum class MemoryStrategy : std::uint8_t { uniform, per_class_uniform };

TrainerKind parse_trainer(const std::string& name);
std::string trainer_name(TrainerKind kind);
Mode parse_mode(const std::string& name);
std::string mode_name(Mode mode);
MemoryStrategy parse_memory_strategy(const std::string& name);
std::string memory_strategy_name(MemoryStrategy s);

struct SsrmConfig {
  double alpha = 0.1;      // weight of the old-vertex drift term
  double beta = 0.5;       // weight of the old-vs-new term
  int memory_budget = 100; // vertices stored per past task
  Index mmd_subsample = 256;
  KernelConfig kernel;
  int epochs = 200;
  double lr = 5e-3;

  void validate() const;
};

struct NnConfig {
  int hidden = 64;
  int layers = 2;
  Activation activation = Activation::relu;
};

/// Sampled vertices per past task plus the subgraph they were last observed
/// under; the retained subgraph contains the full depth-hop ball of every
/// stored vertex, so their embeddings recompute exactly.
struct MemoryStore {
  struct TaskMemory {
    int task_index = 0;
    VertexList vertices;
  };
  std::vector<TaskMemory> per_task;
  GraphSnapshot retained;

  bool empty() const { return per_task.empty(); }
  VertexList all_vertices() const;
};

/// Draws up to `budget` train-split vertices per past batch (per-class
/// uniform takes ceil(budget/2) per class) and retains the union of their
/// `hops`-hop balls inside `previous_view`. Deterministic per seed.
MemoryStore select_memory(const std::vector<VertexBatch>& past_batches,
                          const GraphSnapshot& previous_view, int hops, int budget,
                          MemoryStrategy strategy, std::uint64_t seed);

struct EpochLogRow {
  int task = 0;
  int epoch = 0;
  double total = 0.0;
  double task_loss = 0.0;
  double replay_loss = 0.0;
  double reg = 0.0;
  double reg_seconds = 0.0;  // wall time spent in the regularizer
};

/// Inputs of the per-epoch objective for one task, with every stochastic
/// choice (memory, subsampling) already resolved so the objective is a fixed
/// deterministic function of the parameters.
struct TaskObjective {
  int task_index = 1;
  const GraphSnapshot* train_view = nullptr;  // contains the new batch
  VertexList train_vertices;
  std::vector<int> train_classes;

  struct ReplayGroup {
    int task_index = 0;
    VertexList vertices;
    std::vector<int> classes;
  };
  std::vector<ReplayGroup> replay;            // scored on old_view, union-mean
  const GraphSnapshot* old_view = nullptr;    // may alias train_view

  bool reg_enabled = false;
  double alpha = 0.0;
  double beta = 0.0;
  KernelConfig kernel;
  VertexList memory_sample;                   // same vertices before and after
  VertexList new_batch_sample;
  const GraphSnapshot* previous_view = nullptr;
  bool drift_enabled = true;  // false when previous_view aliases old_view
};

/// Loss terms plus (when grads != nullptr) gradients for every parameter.
/// total = task_loss + replay_loss + alpha*drift + beta*crosstask.
struct ObjectiveGrads {
  GnnGrads encoder;
  std::vector<HeadGrads> heads;
};
EpochLogRow evaluate_objective(const GnnParams& encoder, const std::vector<HeadParams>& heads,
                               const TaskObjective& objective, ObjectiveGrads* grads);

struct TimingStats {
  double epoch_seconds = 0.0;
  double reg_seconds = 0.0;
  long epochs = 0;
};

/// Drives one model through a task sequence. Feed tasks in order through
/// train_task (joint sequences instead call train_joint once at the end).
class Trainer {
 public:
  Trainer(TrainerKind kind, Mode mode, SsrmConfig ssrm, NnConfig nn, MemoryStrategy strategy,
          std::uint64_t seed);

  /// Trains on one arriving task; `batch` must carry splits and `snapshot`
  /// is the accumulated graph at this task. Returns per-epoch loss rows.
  std::vector<EpochLogRow> train_task(const VertexBatch& batch, const GraphSnapshot& snapshot);

  /// Joint training on every batch's train split over the final snapshot.
  std::vector<EpochLogRow> train_joint(const std::vector<VertexBatch>& batches,
                                       const GraphSnapshot& final_snapshot);

  const ModelState& model() const { return model_; }
  const MemoryStore& memory() const { return memory_; }
  const TimingStats& timing() const { return timing_; }
  /// The graph a batch is evaluated on under this trainer's mode.
  GraphSnapshot evaluation_view(const GraphSnapshot& snapshot, const VertexBatch& batch) const;

 private:
  bool uses_memory() const;
  bool uses_replay() const;
  bool uses_reg() const;
  void refresh_memory(const GraphSnapshot& snapshot);
  std::vector<EpochLogRow> optimize(const TaskObjective& objective);

  TrainerKind kind_;
  Mode mode_;
  SsrmConfig ssrm_;
  NnConfig nn_;
  MemoryStrategy strategy_;
  std::uint64_t seed_;
  ModelState model_;
  MemoryStore memory_;
  std::vector<VertexBatch> seen_batches_;
  GraphSnapshot transductive_union_;  // disjoint union of per-task views
  Index last_snapshot_size_ = 0;
  TimingStats timing_;
};

/// Full experiment description; mirrors the flat key/value config document.
struct ExperimentConfig {
  std::string bundle;      // dataset source: bundle directory ...
  std::string csbm_plan;   // ... or an inline CSBM plan "c1:c2,c1:c2,..."
  double csbm_p_in = 0.1;
  double csbm_p_out = 0.05;
  double csbm_mu_scale = 1.0;
  double csbm_sigma = 1.0;
  int csbm_dim = 8;

  std::string trainer = "bare";
  std::string mode = "inductive";
  double alpha = 0.1;
  double beta = 0.5;
  int budget = 100;
  long subsample = 256;
  std::string kernel_alphas = "1,0.1,0.01";
  std::string kernel_norm = "plain";  // "plain" | "squared"
  int epochs = 200;
  double lr = 5e-3;
  int hidden = 64;
  int layers = 2;
  std::string activation = "relu";
  std::string memory_strategy = "per-class-uniform";
  double train_ratio = 0.6;
  double valid_ratio = 0.2;
  double test_ratio = 0.2;
  double bound_q = 1.0;
  std::uint64_t seed = 1;
  std::string out_dir;
  int trials = 1;

  void validate() const;
  TrainerKind trainer_kind() const { return parse_trainer(trainer); }
  Mode run_mode() const { return parse_mode(mode); }
  SsrmConfig ssrm_config() const;
  NnConfig nn_config() const;
  std::vector<std::pair<int, int>> plan() const;
  CsbmParams csbm_params() const;
};

struct RunResult {
  ExperimentConfig config;  // resolved echo
  PerformanceMatrix matrix;          // triangular (sequential trainers)
  std::vector<double> joint_row;     // joint training: final accuracy per task
  MetricsReport metrics;
  std::optional<BoundDiagnostics> bound;  // two-task sequential runs only
  std::vector<EpochLogRow> losses;
  TimingStats timing;
  std::string status = "ok";  // "aborted" on divergence
  std::string error;
  ModelState model;  // in-memory only
};

/// Executes the configured task sequence: loads or generates the data,
/// splits each batch, trains in order, fills the performance matrix row by
/// row and derives metrics (plus bound diagnostics on two-task runs).
/// Deterministic per (config, seed). A divergence marks the run aborted and
/// returns the partial result instead of throwing.
RunResult run_sequence(const ExperimentConfig& config);

}  // namespace ngil
