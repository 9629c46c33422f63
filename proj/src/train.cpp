#include "ngil/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <sstream>

#include "ngil/errors.hpp"
#include "ngil/io.hpp"
#include "ngil/rng.hpp"

namespace ngil {

TrainerKind parse_trainer(const std::string& name) {
  if (name == "bare") return TrainerKind::bare;
  if (name == "joint") return TrainerKind::joint;
  if (name == "replay") return TrainerKind::replay;
  if (name == "bare+ssrm") return TrainerKind::bare_ssrm;
  if (name == "replay+ssrm") return TrainerKind::replay_ssrm;
  throw NotFoundError("unknown trainer: " + name);
}

std::string trainer_name(TrainerKind kind) {
  switch (kind) {
    case TrainerKind::bare: return "bare";
    case TrainerKind::joint: return "joint";
    case TrainerKind::replay: return "replay";
    case TrainerKind::bare_ssrm: return "bare+ssrm";
    case TrainerKind::replay_ssrm: return "replay+ssrm";
  }
  return "?";
}

Mode parse_mode(const std::string& name) {
  if (name == "inductive") return Mode::inductive;
  if (name == "transductive") return Mode::transductive;
  throw NotFoundError("unknown mode: " + name);
}

std::string mode_name(Mode mode) {
  return mode == Mode::inductive ? "inductive" : "transductive";
}

MemoryStrategy parse_memory_strategy(const std::string& name) {
  if (name == "uniform") return MemoryStrategy::uniform;
  if (name == "per-class-uniform") return MemoryStrategy::per_class_uniform;
  throw NotFoundError("unknown memory strategy: " + name);
}

std::string memory_strategy_name(MemoryStrategy s) {
  return s == MemoryStrategy::uniform ? "uniform" : "per-class-uniform";
}

void SsrmConfig::validate() const {
  if (alpha < 0.0 || beta < 0.0) throw StructuralError("regularizer weights must be nonnegative");
  if (memory_budget < 1) throw StructuralError("memory budget must be at least 1");
  if (mmd_subsample < 2) throw StructuralError("mmd subsample must be at least 2");
  kernel.validate();
  if (epochs < 1) throw StructuralError("epochs must be positive");
  if (!(lr > 0.0)) throw StructuralError("learning rate must be positive");
}

VertexList MemoryStore::all_vertices() const {
  VertexList out;
  for (const auto& tm : per_task) out.insert(out.end(), tm.vertices.begin(), tm.vertices.end());
  return out;
}

MemoryStore select_memory(const std::vector<VertexBatch>& past_batches,
                          const GraphSnapshot& previous_view, int hops, int budget,
                          MemoryStrategy strategy, std::uint64_t seed) {
  if (budget < 1) throw StructuralError("memory budget must be at least 1");
  if (past_batches.empty()) throw StructuralError("select_memory requires past batches");

  MemoryStore store;
  for (const VertexBatch& batch : past_batches) {
    const VertexList train = batch.members(Split::train);
    if (train.empty()) throw StructuralError("batch " + std::to_string(batch.task_index) +
                                             " has an empty train split");
    VertexList chosen;
    if (strategy == MemoryStrategy::per_class_uniform) {
      const std::vector<int> classes = class_indices(batch, train);
      const int per_class = (budget + 1) / 2;
      for (int c = 0; c < 2; ++c) {
        VertexList members;
        for (std::size_t i = 0; i < train.size(); ++i) {
          if (classes[i] == c) members.push_back(train[i]);
        }
        if (static_cast<int>(members.size()) <= per_class) {
          chosen.insert(chosen.end(), members.begin(), members.end());
        } else {
          const auto idx = subsample_indices(
              static_cast<Index>(members.size()), per_class,
              derive_seed(seed, "memory-class",
                          static_cast<std::uint64_t>(batch.task_index) * 2 + c));
          for (Index k : idx) chosen.push_back(members[static_cast<std::size_t>(k)]);
        }
      }
    } else {
      if (static_cast<int>(train.size()) <= budget) {
        chosen = train;
      } else {
        const auto idx =
            subsample_indices(static_cast<Index>(train.size()), budget,
                              derive_seed(seed, "memory", static_cast<std::uint64_t>(batch.task_index)));
        for (Index k : idx) chosen.push_back(train[static_cast<std::size_t>(k)]);
      }
    }
    std::sort(chosen.begin(), chosen.end());
    store.per_task.push_back({batch.task_index, std::move(chosen)});
  }

  // Union of the stored vertices' hop balls: multi-source BFS.
  std::vector<int> dist(static_cast<std::size_t>(previous_view.size()), -1);
  std::vector<Index> frontier;
  for (const auto& tm : store.per_task) {
    for (VertexId v : tm.vertices) {
      const Index local = previous_view.local_index(v);
      if (dist[static_cast<std::size_t>(local)] < 0) {
        dist[static_cast<std::size_t>(local)] = 0;
        frontier.push_back(local);
      }
    }
  }
  VertexList ball;
  for (Index f : frontier) ball.push_back(previous_view.vertex_ids[static_cast<std::size_t>(f)]);
  for (int depth = 0; depth < hops && !frontier.empty(); ++depth) {
    std::vector<Index> next;
    for (Index v : frontier) {
      for (Index u : previous_view.adjacency[static_cast<std::size_t>(v)]) {
        if (dist[static_cast<std::size_t>(u)] < 0) {
          dist[static_cast<std::size_t>(u)] = depth + 1;
          next.push_back(u);
          ball.push_back(previous_view.vertex_ids[static_cast<std::size_t>(u)]);
        }
      }
    }
    frontier = std::move(next);
  }
  store.retained = induced_subgraph(previous_view, ball);
  return store;
}

namespace {

Matrix gather_rows(const Matrix& all, const GraphSnapshot& view, const VertexList& ids) {
  Matrix out(static_cast<Index>(ids.size()), all.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.row(static_cast<Index>(i)) = all.row(view.local_index(ids[i]));
  }
  return out;
}

void scatter_add_rows(Matrix& target, const GraphSnapshot& view, const VertexList& ids,
                      const Matrix& rows, double scale) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    target.row(view.local_index(ids[i])) += scale * rows.row(static_cast<Index>(i));
  }
}

HeadGrads zero_head_grads(const HeadParams& head) {
  return {Matrix::Zero(head.weight.rows(), head.weight.cols()),
          RowVector::Zero(head.bias.cols())};
}

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

EpochLogRow evaluate_objective(const GnnParams& encoder, const std::vector<HeadParams>& heads,
                               const TaskObjective& objective, ObjectiveGrads* grads) {
  EpochLogRow row;
  row.task = objective.task_index;

  const bool old_is_train = objective.old_view == objective.train_view;
  const bool want_drift =
      objective.reg_enabled && objective.drift_enabled && objective.alpha != 0.0;
  const bool want_cross = objective.reg_enabled && objective.beta != 0.0;
  const bool need_old_forward =
      !objective.replay.empty() || (want_drift && !old_is_train);

  GnnForwardCache cache_train, cache_old, cache_prev;
  const Matrix emb_train =
      gnn_forward_all(encoder, *objective.train_view, grads ? &cache_train : nullptr);
  Matrix emb_old;
  if (need_old_forward && !old_is_train) {
    emb_old = gnn_forward_all(encoder, *objective.old_view, grads ? &cache_old : nullptr);
  }

  Matrix d_train, d_old;
  if (grads) {
    grads->encoder = GnnGrads::zeros_like(encoder);
    grads->heads.clear();
    for (const HeadParams& h : heads) grads->heads.push_back(zero_head_grads(h));
    d_train = Matrix::Zero(emb_train.rows(), emb_train.cols());
    if (need_old_forward && !old_is_train) d_old = Matrix::Zero(emb_old.rows(), emb_old.cols());
  }

  // Loss on the arriving task's train split.
  if (!objective.train_vertices.empty()) {
    const auto head_idx = static_cast<std::size_t>(objective.task_index - 1);
    const Matrix emb = gather_rows(emb_train, *objective.train_view, objective.train_vertices);
    const Matrix logits = head_forward(heads[head_idx], emb);
    if (grads) {
      Matrix d_logits;
      row.task_loss = cross_entropy_grad(logits, objective.train_classes, d_logits);
      HeadGrads hg;
      const Matrix d_emb = head_backward(heads[head_idx], emb, d_logits, hg);
      grads->heads[head_idx].weight += hg.weight;
      grads->heads[head_idx].bias += hg.bias;
      scatter_add_rows(d_train, *objective.train_view, objective.train_vertices, d_emb, 1.0);
    } else {
      row.task_loss = cross_entropy(logits, objective.train_classes);
    }
  }

  // Replay: one mean over the concatenation of all stored vertices, each
  // scored by its own task head.
  if (!objective.replay.empty()) {
    std::size_t total = 0;
    for (const auto& g : objective.replay) total += g.vertices.size();
    const Matrix& emb_src = old_is_train ? emb_train : emb_old;
    Matrix* d_src = old_is_train ? &d_train : &d_old;
    for (const auto& g : objective.replay) {
      const auto head_idx = static_cast<std::size_t>(g.task_index - 1);
      const double weight = static_cast<double>(g.vertices.size()) / static_cast<double>(total);
      const Matrix emb = gather_rows(emb_src, *objective.old_view, g.vertices);
      const Matrix logits = head_forward(heads[head_idx], emb);
      if (grads) {
        Matrix d_logits;
        row.replay_loss += weight * cross_entropy_grad(logits, g.classes, d_logits);
        HeadGrads hg;
        const Matrix d_emb = head_backward(heads[head_idx], emb, weight * d_logits, hg);
        grads->heads[head_idx].weight += hg.weight;
        grads->heads[head_idx].bias += hg.bias;
        scatter_add_rows(*d_src, *objective.old_view, g.vertices, d_emb, 1.0);
      } else {
        row.replay_loss += weight * cross_entropy(logits, g.classes);
      }
    }
  }

  // Structural-shift regularizer. The previous-view forward and backward are
  // exclusive to the regularizer, so they count toward its measured cost.
  double reg_elapsed = 0.0;
  if (objective.reg_enabled && (want_drift || want_cross)) {
    const double t0 = now_seconds();
    GnnForwardCache* prev_cache = grads ? &cache_prev : nullptr;
    const Matrix emb_prev = gnn_forward_all(encoder, *objective.previous_view, prev_cache);
    Matrix d_prev;
    if (grads) d_prev = Matrix::Zero(emb_prev.rows(), emb_prev.cols());

    const Matrix z_before =
        gather_rows(emb_prev, *objective.previous_view, objective.memory_sample);

    if (want_drift) {
      const Matrix& emb_src = old_is_train ? emb_train : emb_old;
      const Matrix z_after = gather_rows(emb_src, *objective.old_view, objective.memory_sample);
      const Mmd2WithGrad mmd = mmd2_grad(z_before, z_after, objective.kernel);
      row.reg += objective.alpha * mmd.value;
      if (grads) {
        scatter_add_rows(d_prev, *objective.previous_view, objective.memory_sample, mmd.grad_x,
                         objective.alpha);
        Matrix* d_src = old_is_train ? &d_train : &d_old;
        scatter_add_rows(*d_src, *objective.old_view, objective.memory_sample, mmd.grad_y,
                         objective.alpha);
      }
    }
    if (want_cross) {
      const Matrix z_new =
          gather_rows(emb_train, *objective.train_view, objective.new_batch_sample);
      const Mmd2WithGrad mmd = mmd2_grad(z_before, z_new, objective.kernel);
      row.reg += objective.beta * mmd.value;
      if (grads) {
        scatter_add_rows(d_prev, *objective.previous_view, objective.memory_sample, mmd.grad_x,
                         objective.beta);
        scatter_add_rows(d_train, *objective.train_view, objective.new_batch_sample, mmd.grad_y,
                         objective.beta);
      }
    }
    if (grads && !d_prev.isZero(0.0)) {
      grads->encoder.accumulate(
          gnn_backward(encoder, *objective.previous_view, cache_prev, d_prev));
    }
    reg_elapsed = now_seconds() - t0;
  }

  if (grads) {
    grads->encoder.accumulate(
        gnn_backward(encoder, *objective.train_view, cache_train, d_train));
    if (need_old_forward && !old_is_train) {
      grads->encoder.accumulate(gnn_backward(encoder, *objective.old_view, cache_old, d_old));
    }
  }

  row.total = row.task_loss + row.replay_loss + row.reg;
  row.reg_seconds = reg_elapsed;
  return row;
}

Trainer::Trainer(TrainerKind kind, Mode mode, SsrmConfig ssrm, NnConfig nn,
                 MemoryStrategy strategy, std::uint64_t seed)
    : kind_(kind), mode_(mode), ssrm_(std::move(ssrm)), nn_(nn), strategy_(strategy),
      seed_(seed) {
  ssrm_.validate();
  if (nn_.layers < 1 || nn_.hidden < 1) throw StructuralError("bad encoder configuration");
}

bool Trainer::uses_memory() const { return kind_ != TrainerKind::bare && kind_ != TrainerKind::joint; }

bool Trainer::uses_replay() const {
  return kind_ == TrainerKind::replay || kind_ == TrainerKind::replay_ssrm;
}

bool Trainer::uses_reg() const {
  return kind_ == TrainerKind::bare_ssrm || kind_ == TrainerKind::replay_ssrm;
}

GraphSnapshot Trainer::evaluation_view(const GraphSnapshot& snapshot,
                                       const VertexBatch& batch) const {
  if (mode_ == Mode::inductive) return snapshot;
  return induced_subgraph(snapshot, batch.vertices);
}

void Trainer::refresh_memory(const GraphSnapshot& snapshot) {
  const GraphSnapshot& source = mode_ == Mode::inductive ? snapshot : transductive_union_;
  memory_ = select_memory(seen_batches_, source, nn_.layers, ssrm_.memory_budget, strategy_,
                          derive_seed(seed_, "memory", static_cast<std::uint64_t>(model_.horizon + 1)));
}

std::vector<EpochLogRow> Trainer::train_task(const VertexBatch& batch,
                                             const GraphSnapshot& snapshot) {
  if (kind_ == TrainerKind::joint) {
    throw StructuralError("joint training runs once over the final snapshot");
  }
  if (batch.task_index != model_.horizon + 1) {
    throw StructuralError("task index " + std::to_string(batch.task_index) +
                          " does not extend horizon " + std::to_string(model_.horizon));
  }
  if (snapshot.size() < last_snapshot_size_) {
    throw StructuralError("snapshots must be monotone across tasks");
  }
  last_snapshot_size_ = snapshot.size();

  if (model_.horizon == 0) {
    model_.encoder = GnnParams::init(snapshot.features.cols(), nn_.hidden, nn_.layers,
                                     nn_.activation, derive_seed(seed_, "encoder-init"));
  }
  model_.heads.push_back(HeadParams::init(nn_.hidden, 2,
                                          derive_seed(seed_, "head-init",
                                                      static_cast<std::uint64_t>(batch.task_index))));

  GraphSnapshot transductive_view;
  const GraphSnapshot* train_view = &snapshot;
  if (mode_ == Mode::transductive) {
    transductive_view = induced_subgraph(snapshot, batch.vertices);
    train_view = &transductive_view;
  }

  TaskObjective obj;
  obj.task_index = batch.task_index;
  obj.train_view = train_view;
  obj.train_vertices = batch.members(Split::train);
  if (obj.train_vertices.empty()) throw StructuralError("task has no train vertices");
  obj.train_classes = class_indices(batch, obj.train_vertices);
  obj.old_view = train_view;

  if (uses_memory() && !memory_.empty()) {
    obj.old_view = mode_ == Mode::inductive ? &snapshot : &memory_.retained;
    if (uses_replay()) {
      for (const auto& tm : memory_.per_task) {
        TaskObjective::ReplayGroup group;
        group.task_index = tm.task_index;
        group.vertices = tm.vertices;
        group.classes =
            class_indices(seen_batches_[static_cast<std::size_t>(tm.task_index - 1)], tm.vertices);
        obj.replay.push_back(std::move(group));
      }
    }
    if (uses_reg() && (ssrm_.alpha != 0.0 || ssrm_.beta != 0.0)) {
      VertexList pool = memory_.all_vertices();
      if (pool.size() < 2) {
        std::cerr << "warning: task " << batch.task_index
                  << ": fewer than 2 memory vertices, regularizer skipped\n";
      } else {
        obj.reg_enabled = true;
        obj.alpha = ssrm_.alpha;
        obj.beta = ssrm_.beta;
        obj.kernel = ssrm_.kernel;
        obj.previous_view = &memory_.retained;
        obj.drift_enabled = mode_ == Mode::inductive;
        if (static_cast<Index>(pool.size()) > ssrm_.mmd_subsample) {
          const auto idx = subsample_indices(static_cast<Index>(pool.size()), ssrm_.mmd_subsample,
                                             derive_seed(seed_, "mmd-memory",
                                                         static_cast<std::uint64_t>(batch.task_index)));
          for (Index k : idx) obj.memory_sample.push_back(pool[static_cast<std::size_t>(k)]);
          std::sort(obj.memory_sample.begin(), obj.memory_sample.end());
        } else {
          obj.memory_sample = std::move(pool);
        }
        if (static_cast<Index>(obj.train_vertices.size()) > ssrm_.mmd_subsample) {
          const auto idx =
              subsample_indices(static_cast<Index>(obj.train_vertices.size()), ssrm_.mmd_subsample,
                                derive_seed(seed_, "mmd-new",
                                            static_cast<std::uint64_t>(batch.task_index)));
          for (Index k : idx) obj.new_batch_sample.push_back(obj.train_vertices[static_cast<std::size_t>(k)]);
          std::sort(obj.new_batch_sample.begin(), obj.new_batch_sample.end());
        } else {
          obj.new_batch_sample = obj.train_vertices;
        }
        if (obj.new_batch_sample.size() < 2) {
          std::cerr << "warning: task " << batch.task_index
                    << ": fewer than 2 new-batch vertices, cross-task term skipped\n";
          obj.beta = 0.0;
        }
      }
    }
  }

  auto log = optimize(obj);

  seen_batches_.push_back(batch);
  if (mode_ == Mode::transductive) {
    // Extend the disjoint union of per-task views with this task's view.
    if (transductive_union_.size() == 0) {
      transductive_union_ = *train_view;
    } else {
      GraphSnapshot merged;
      merged.task_horizon = snapshot.task_horizon;
      merged.vertex_ids = transductive_union_.vertex_ids;
      merged.vertex_ids.insert(merged.vertex_ids.end(), train_view->vertex_ids.begin(),
                               train_view->vertex_ids.end());
      merged.adjacency = transductive_union_.adjacency;
      const Index offset = transductive_union_.size();
      for (const auto& nbrs : train_view->adjacency) {
        std::vector<Index> shifted;
        shifted.reserve(nbrs.size());
        for (Index u : nbrs) shifted.push_back(u + offset);
        merged.adjacency.push_back(std::move(shifted));
      }
      merged.features.resize(merged.vertex_ids.size(), snapshot.features.cols());
      merged.features.topRows(offset) = transductive_union_.features;
      merged.features.bottomRows(train_view->size()) = train_view->features;
      transductive_union_ = std::move(merged);
    }
  }
  if (uses_memory()) refresh_memory(snapshot);
  model_.horizon += 1;
  return log;
}

std::vector<EpochLogRow> Trainer::train_joint(const std::vector<VertexBatch>& batches,
                                              const GraphSnapshot& final_snapshot) {
  if (kind_ != TrainerKind::joint) throw StructuralError("train_joint requires the joint trainer");
  if (batches.empty()) throw StructuralError("joint training needs at least one batch");

  model_.encoder = GnnParams::init(final_snapshot.features.cols(), nn_.hidden, nn_.layers,
                                   nn_.activation, derive_seed(seed_, "encoder-init"));
  for (const VertexBatch& b : batches) {
    model_.heads.push_back(HeadParams::init(nn_.hidden, 2,
                                            derive_seed(seed_, "head-init",
                                                        static_cast<std::uint64_t>(b.task_index))));
  }

  GraphSnapshot transductive_view;
  const GraphSnapshot* view = &final_snapshot;
  if (mode_ == Mode::transductive) {
    // Disjoint union of the per-task induced views.
    VertexList all;
    for (const VertexBatch& b : batches) {
      all.insert(all.end(), b.vertices.begin(), b.vertices.end());
    }
    transductive_view = induced_subgraph(final_snapshot, all);
    // Drop inter-task edges: tasks are independent in this setting.
    std::vector<int> task_of(static_cast<std::size_t>(transductive_view.size()));
    for (const VertexBatch& b : batches) {
      for (VertexId v : b.vertices) {
        task_of[static_cast<std::size_t>(transductive_view.local_index(v))] = b.task_index;
      }
    }
    for (Index v = 0; v < transductive_view.size(); ++v) {
      auto& nbrs = transductive_view.adjacency[static_cast<std::size_t>(v)];
      std::erase_if(nbrs, [&](Index u) {
        return task_of[static_cast<std::size_t>(u)] != task_of[static_cast<std::size_t>(v)];
      });
    }
    view = &transductive_view;
  }

  TaskObjective obj;
  obj.task_index = static_cast<int>(batches.size());
  obj.train_view = view;
  obj.old_view = view;
  for (const VertexBatch& b : batches) {
    TaskObjective::ReplayGroup group;
    group.task_index = b.task_index;
    group.vertices = b.members(Split::train);
    if (group.vertices.empty()) throw StructuralError("joint training found an empty train split");
    group.classes = class_indices(b, group.vertices);
    obj.replay.push_back(std::move(group));
  }

  auto log = optimize(obj);
  for (auto& row : log) {
    row.task_loss = row.replay_loss;  // the union loss is joint training's task loss
    row.replay_loss = 0.0;
    row.task = 0;
  }
  model_.horizon = static_cast<int>(batches.size());
  seen_batches_ = batches;
  return log;
}

std::vector<EpochLogRow> Trainer::optimize(const TaskObjective& objective) {
  struct TensorOpt {
    AdamState weight;
    AdamState bias;
  };
  std::vector<TensorOpt> enc_opt;
  for (const GnnLayer& l : model_.encoder.layers) {
    enc_opt.push_back({AdamState::zeros_like(l.weight), AdamState::zeros_like(l.bias)});
  }
  std::vector<TensorOpt> head_opt;
  for (const HeadParams& h : model_.heads) {
    head_opt.push_back({AdamState::zeros_like(h.weight), AdamState::zeros_like(h.bias)});
  }
  AdamConfig adam;
  adam.lr = ssrm_.lr;

  std::vector<EpochLogRow> log;
  ModelState checkpoint = model_;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int epoch = 0; epoch < ssrm_.epochs; ++epoch) {
    const double t0 = now_seconds();
    ObjectiveGrads grads;
    EpochLogRow row = evaluate_objective(model_.encoder, model_.heads, objective, &grads);
    row.epoch = epoch;
    if (!std::isfinite(row.total)) {
      model_ = checkpoint;
      throw DivergenceError("non-finite loss at task " + std::to_string(objective.task_index) +
                            " epoch " + std::to_string(epoch));
    }
    for (std::size_t l = 0; l < model_.encoder.layers.size(); ++l) {
      adam_step(model_.encoder.layers[l].weight, grads.encoder.layers[l].weight,
                enc_opt[l].weight, adam);
      adam_step(model_.encoder.layers[l].bias, grads.encoder.layers[l].bias, enc_opt[l].bias,
                adam);
    }
    for (std::size_t h = 0; h < model_.heads.size(); ++h) {
      adam_step(model_.heads[h].weight, grads.heads[h].weight, head_opt[h].weight, adam);
      adam_step(model_.heads[h].bias, grads.heads[h].bias, head_opt[h].bias, adam);
    }
    checkpoint = model_;
    timing_.epoch_seconds += now_seconds() - t0;
    timing_.reg_seconds += row.reg_seconds;
    timing_.epochs += 1;
    log.push_back(row);

    if (row.total < best - 1e-5) {
      best = row.total;
      stale = 0;
    } else if (++stale >= 20) {
      break;
    }
  }
  return log;
}

void ExperimentConfig::validate() const {
  const bool has_bundle = !bundle.empty();
  const bool has_csbm = !csbm_plan.empty();
  if (has_bundle == has_csbm) {
    throw StructuralError("exactly one dataset source (bundle or csbm plan) is required");
  }
  if (has_bundle && !std::filesystem::exists(std::filesystem::path(bundle) / "manifest.json")) {
    throw StructuralError("bundle " + bundle + " has no manifest.json");
  }
  if (std::abs(train_ratio + valid_ratio + test_ratio - 1.0) > 1e-9) {
    throw StructuralError("split ratios must sum to 1");
  }
  if (trials < 1) throw StructuralError("trials must be positive");
  parse_trainer(trainer);
  parse_mode(mode);
  parse_memory_strategy(memory_strategy);
  parse_activation(activation);
  ssrm_config().validate();
  if (hidden < 1 || layers < 1) throw StructuralError("bad encoder configuration");
  if (has_csbm) csbm_params().validate();
}

SsrmConfig ExperimentConfig::ssrm_config() const {
  SsrmConfig cfg;
  cfg.alpha = alpha;
  cfg.beta = beta;
  cfg.memory_budget = budget;
  cfg.mmd_subsample = subsample;
  cfg.epochs = epochs;
  cfg.lr = lr;
  cfg.kernel.alphas.clear();
  std::stringstream ss(kernel_alphas);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) cfg.kernel.alphas.push_back(std::stod(item));
  }
  if (kernel_norm == "plain") {
    cfg.kernel.norm = KernelNorm::plain_l2;
  } else if (kernel_norm == "squared") {
    cfg.kernel.norm = KernelNorm::squared_l2;
  } else {
    throw StructuralError("kernel norm must be 'plain' or 'squared'");
  }
  return cfg;
}

NnConfig ExperimentConfig::nn_config() const {
  NnConfig cfg;
  cfg.hidden = hidden;
  cfg.layers = layers;
  cfg.activation = parse_activation(activation);
  return cfg;
}

std::vector<std::pair<int, int>> ExperimentConfig::plan() const {
  std::vector<std::pair<int, int>> out;
  std::stringstream ss(csbm_plan);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw StructuralError("plan entries look like c1:c2");
    out.emplace_back(std::stoi(item.substr(0, colon)), std::stoi(item.substr(colon + 1)));
  }
  return out;
}

CsbmParams ExperimentConfig::csbm_params() const {
  return CsbmParams::symmetric(csbm_dim, csbm_mu_scale, csbm_sigma, csbm_p_in, csbm_p_out,
                               plan());
}

RunResult run_sequence(const ExperimentConfig& config) {
  config.validate();
  RunResult result;
  result.config = config;

  std::vector<VertexBatch> batches;
  std::vector<GraphSnapshot> snapshots;
  if (!config.csbm_plan.empty()) {
    CsbmSequence seq = generate_csbm(config.csbm_params(), derive_seed(config.seed, "data"));
    batches = std::move(seq.batches);
    snapshots = std::move(seq.snapshots);
  } else {
    SequenceData data = load_bundle_sequence(config.bundle);
    batches = std::move(data.batches);
    snapshots = std::move(data.snapshots);
  }

  const SplitRatios ratios{config.train_ratio, config.valid_ratio, config.test_ratio};
  for (VertexBatch& b : batches) {
    b = split_vertices(b, ratios, derive_seed(config.seed, "split",
                                              static_cast<std::uint64_t>(b.task_index)));
  }

  Trainer trainer(config.trainer_kind(), config.run_mode(), config.ssrm_config(),
                  config.nn_config(), parse_memory_strategy(config.memory_strategy),
                  config.seed);
  const int m = static_cast<int>(batches.size());
  try {
    if (config.trainer_kind() == TrainerKind::joint) {
      auto rows = trainer.train_joint(batches, snapshots.back());
      result.losses.insert(result.losses.end(), rows.begin(), rows.end());
      for (int j = 0; j < m; ++j) {
        const GraphSnapshot view =
            trainer.evaluation_view(snapshots.back(), batches[static_cast<std::size_t>(j)]);
        result.joint_row.push_back(
            evaluate_accuracy(trainer.model(), view, batches[static_cast<std::size_t>(j)],
                              batches[static_cast<std::size_t>(j)].members(Split::test)));
      }
      double fap = 0.0;
      for (double r : result.joint_row) fap += r;
      result.metrics.fap = fap / static_cast<double>(m);
      result.metrics.aps = {result.metrics.fap};
    } else {
      for (int t = 0; t < m; ++t) {
        auto rows = trainer.train_task(batches[static_cast<std::size_t>(t)],
                                       snapshots[static_cast<std::size_t>(t)]);
        result.losses.insert(result.losses.end(), rows.begin(), rows.end());
        std::vector<double> acc_row;
        for (int j = 0; j <= t; ++j) {
          const GraphSnapshot view = trainer.evaluation_view(
              snapshots[static_cast<std::size_t>(t)], batches[static_cast<std::size_t>(j)]);
          acc_row.push_back(
              evaluate_accuracy(trainer.model(), view, batches[static_cast<std::size_t>(j)],
                                batches[static_cast<std::size_t>(j)].members(Split::test)));
        }
        result.matrix.append_row(std::move(acc_row));
      }
      result.metrics = compute_metrics(result.matrix);
      if (m == 2) {
        const KernelConfig kernel = config.ssrm_config().kernel;
        if (config.run_mode() == Mode::inductive) {
          result.bound = bound_components(trainer.model(), snapshots[0], snapshots[1],
                                          snapshots[1], batches[0], batches[1], config.bound_q,
                                          kernel, derive_seed(config.seed, "bound"));
        } else {
          const GraphSnapshot v1 = induced_subgraph(snapshots[1], batches[0].vertices);
          const GraphSnapshot v2 = induced_subgraph(snapshots[1], batches[1].vertices);
          result.bound = bound_components(trainer.model(), v1, v1, v2, batches[0], batches[1],
                                          config.bound_q, kernel,
                                          derive_seed(config.seed, "bound"));
        }
      }
    }
    result.status = "ok";
  } catch (const DivergenceError& e) {
    result.status = "aborted";
    result.error = e.what();
    if (!result.matrix.rows.empty() && result.joint_row.empty()) {
      result.metrics = compute_metrics(result.matrix);
    }
  }
  result.timing = trainer.timing();
  result.model = trainer.model();
  return result;
}

}  // namespace ngil
