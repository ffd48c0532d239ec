// Copyright 2026 The FairDual Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "fairdual/baselines.hpp"
#include "fairdual/metrics.hpp"
#include "fairdual/synthetic.hpp"
#include "fairdual/trainer.hpp"
#include "fairdual/types.hpp"

namespace fairdual {

/// Configuration of the partitioning-bias study: train the same planted
/// dataset under per-batch optimization of the power-form objective
/// b^T (A^T w)^(1+t), sweeping batch size, group count and weighting
/// strategy, and measure each run's distance from a full-batch reference
/// optimum.
struct SimConfig {
  SyntheticSpec synthetic;            // num_groups is overridden per sweep point
  double t = 1.0;                     // power exponent; 0 = plain linear loss
  VectorXd b_vec;                     // group coefficients; empty = all-ones
  std::vector<int> batch_sizes{8, 16, 32, 64, 128};  // users per batch
  std::vector<int> group_sizes{7};
  std::vector<Strategy> strategies{Strategy::kUni};
  int epochs = 15;
  std::uint64_t seed = 1;
  int num_seeds = 3;
  int jobs = 1;

  // minibatch training
  double learning_rate = 0.05;
  int eval_k = 5;

  // dual-loop parameters for the FairDual strategy
  double eta = 1.0;
  double lambda = 2.0;
  double alpha = 0.9;
  int q = 100;
  double budget_margin = 4.0;

  // full-information reference: gradient descent to this gradient norm,
  // best of `restarts` starts
  double ref_tolerance = 1e-6;
  long ref_max_iterations = 50000;
  int ref_restarts = 3;

  void validate() const {
    if (t < 0.0) throw std::invalid_argument("sim: t must be >= 0");
    if (batch_sizes.empty() || group_sizes.empty() || strategies.empty())
      throw std::invalid_argument("sim: empty sweep axis");
    if (epochs < 1) throw std::invalid_argument("sim: epochs must be >= 1");
    if (num_seeds < 1) throw std::invalid_argument("sim: num_seeds must be >= 1");
    for (int b : batch_sizes)
      if (b < 1) throw std::invalid_argument("sim: batch size must be >= 1");
    for (int g : group_sizes)
      if (g < 1) throw std::invalid_argument("sim: group size must be >= 1");
  }
};

/// Power-form objective b^T (A^T w)^(1+t) for a per-item loss vector w >= 0.
inline double full_info_loss(const VectorXd& w, const NormalizedAdjacency& adjacency,
                             const VectorXd& b_vec, double t) {
  if ((w.array() < 0.0).any())
    throw std::invalid_argument("full_info_loss: negative loss entry");
  if (b_vec.size() != adjacency.cols())
    throw std::invalid_argument("full_info_loss: coefficient size mismatch");
  const VectorXd e = adjacency.transpose_apply(w);
  return b_vec.dot(e.array().pow(1.0 + t).matrix());
}

/// Partitioned objective  sum_j b^T e_j^(1+t).
inline double minibatch_objective(const std::vector<VectorXd>& partitioned_e,
                                  const VectorXd& b_vec, double t) {
  double total = 0.0;
  for (const VectorXd& e : partitioned_e) {
    if (e.size() != b_vec.size())
      throw std::invalid_argument("minibatch_objective: size mismatch");
    if ((e.array() < 0.0).any())
      throw std::invalid_argument("minibatch_objective: negative utility");
    total += b_vec.dot(e.array().pow(1.0 + t).matrix());
  }
  return total;
}

/// Spearman rank correlation (average ranks on ties).
inline double spearman_correlation(const std::vector<double>& x,
                                   const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("spearman: need two equally sized samples");
  const std::size_t n = x.size();
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double mean_rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = mean_rank;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(n);
  double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(n);
  double cov = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (rx[i] - mx) * (ry[i] - my);
    vx += (rx[i] - mx) * (rx[i] - mx);
    vy += (ry[i] - my) * (ry[i] - my);
  }
  if (vx == 0.0 || vy == 0.0) return 0.0;
  return cov / std::sqrt(vx * vy);
}

struct GapRow {
  int batch_size = 0;
  int num_groups = 0;
  Strategy strategy = Strategy::kUni;
  std::uint64_t seed = 0;
  double jensen_gap = 0.0;          // |F(theta_B) - F(theta*)|
  double minibatch_value = 0.0;     // sum_j b^T e_j^(1+t) at theta_B
  double full_optimum = 0.0;        // F(theta*)
  double ndcg = 0.0;
  double mmf = 0.0;
  double runtime_ms = 0.0;
};

namespace detail {

struct SimInstance {
  SyntheticDataset data;
  NormalizedAdjacency adjacency;
  VectorXd b_vec;
  std::vector<int> users;   // per train interaction
  std::vector<int> items;
  std::vector<double> labels;
  std::vector<std::vector<int>> by_user;  // train row indices per user
};

inline SimInstance make_instance(const SimConfig& config, int num_groups,
                                 std::uint64_t dataset_seed) {
  SimInstance inst;
  SyntheticSpec spec = config.synthetic;
  spec.num_groups = num_groups;
  spec.seed = dataset_seed;
  inst.data = generate_synthetic(spec);
  inst.adjacency = build_adjacency(inst.data.catalog);
  inst.b_vec = config.b_vec.size() == inst.data.catalog.num_groups
                   ? config.b_vec
                   : VectorXd::Ones(inst.data.catalog.num_groups);

  const auto& train = inst.data.split.train;
  inst.users.reserve(train.size());
  inst.items.reserve(train.size());
  inst.labels.reserve(train.size());
  inst.by_user.assign(static_cast<std::size_t>(inst.data.split.num_users), {});
  for (std::size_t s = 0; s < train.size(); ++s) {
    inst.users.push_back(train[s].user);
    inst.items.push_back(train[s].item);
    inst.labels.push_back(train[s].label);
    inst.by_user[static_cast<std::size_t>(train[s].user)].push_back(
        static_cast<int>(s));
  }
  return inst;
}

/// Per-item accumulated symmetric cross-entropy over a set of train rows.
inline VectorXd item_losses(const SimInstance& inst, const EmbeddingModel& model,
                            const std::vector<int>& rows) {
  VectorXd w = VectorXd::Zero(model.num_items());
  for (int s : rows) {
    const auto idx = static_cast<std::size_t>(s);
    const double z = model.user_table.row(inst.users[idx])
                         .dot(model.item_table.row(inst.items[idx]));
    const double p = std::clamp(logistic(z), 1e-7, 1.0 - 1e-7);
    w[inst.items[idx]] +=
        inst.labels[idx] > 0.5 ? -std::log(p) : -std::log(1.0 - p);
  }
  return w;
}

inline std::vector<int> all_rows(const SimInstance& inst) {
  std::vector<int> rows(inst.users.size());
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

/// Objective and gradient of F(theta) = b^T (A^T w(theta))^(1+t) over all
/// training interactions.
inline double objective_and_gradient(const SimInstance& inst,
                                     const EmbeddingModel& model, double t,
                                     MatrixRXd* grad_users,
                                     MatrixRXd* grad_items) {
  const std::size_t n = inst.users.size();
  VectorXd w = VectorXd::Zero(model.num_items());
  VectorXd p(static_cast<Index>(n));
  for (std::size_t s = 0; s < n; ++s) {
    const double z = model.user_table.row(inst.users[s])
                         .dot(model.item_table.row(inst.items[s]));
    p[static_cast<Index>(s)] = std::clamp(logistic(z), 1e-7, 1.0 - 1e-7);
    w[inst.items[s]] += inst.labels[s] > 0.5
                            ? -std::log(p[static_cast<Index>(s)])
                            : -std::log(1.0 - p[static_cast<Index>(s)]);
  }
  const VectorXd e = inst.adjacency.transpose_apply(w);
  const double value = inst.b_vec.dot(e.array().pow(1.0 + t).matrix());
  if (!grad_users) return value;

  // dF/dw_i spread back through the adjacency
  const VectorXd group_term =
      (1.0 + t) * inst.b_vec.cwiseProduct(e.array().pow(t).matrix());
  const VectorXd item_term = inst.adjacency.apply(group_term);

  grad_users->setZero();
  grad_items->setZero();
  for (std::size_t s = 0; s < n; ++s) {
    const double dz = p[static_cast<Index>(s)] - inst.labels[s];
    const double coeff = item_term[inst.items[s]] * dz;
    grad_users->row(inst.users[s]) += coeff * model.item_table.row(inst.items[s]);
    grad_items->row(inst.items[s]) += coeff * model.user_table.row(inst.users[s]);
  }
  return value;
}

struct ReferenceResult {
  EmbeddingModel model;
  double value = 0.0;
  long iterations = 0;
};

/**
 * Full-information reference: gradient descent on F with a Barzilai-Borwein
 * step and Armijo backtracking, to gradient norm `tolerance`, best of
 * `restarts` random starts. Throws if no start reaches the tolerance within
 * the iteration cap.
 */
inline ReferenceResult reference_optimum(const SimInstance& inst,
                                         const SimConfig& config, int dim,
                                         std::uint64_t seed) {
  ReferenceResult best;
  bool converged = false;
  best.value = std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < config.ref_restarts; ++restart) {
    std::mt19937_64 rng(mix_seed(seed, 0x3ef0ULL, static_cast<std::uint64_t>(restart)));
    EmbeddingModel model = make_model(inst.data.split.num_users,
                                      inst.data.split.num_items, dim,
                                      config.learning_rate, 1, rng);
    MatrixRXd grad_u(model.user_table.rows(), dim);
    MatrixRXd grad_i(model.item_table.rows(), dim);
    MatrixRXd prev_grad_u, prev_grad_i, prev_u, prev_i;

    double value = objective_and_gradient(inst, model, config.t, &grad_u, &grad_i);
    double step = 1e-2;
    bool ok = false;
    long iter = 0;
    for (; iter < config.ref_max_iterations; ++iter) {
      const double grad_norm =
          std::sqrt(grad_u.squaredNorm() + grad_i.squaredNorm());
      if (grad_norm <= config.ref_tolerance) {
        ok = true;
        break;
      }
      if (iter > 0) {
        // Barzilai-Borwein step from the last displacement pair
        const MatrixRXd du = model.user_table - prev_u;
        const MatrixRXd di = model.item_table - prev_i;
        const MatrixRXd dgu = grad_u - prev_grad_u;
        const MatrixRXd dgi = grad_i - prev_grad_i;
        const double sy = du.cwiseProduct(dgu).sum() + di.cwiseProduct(dgi).sum();
        const double yy = dgu.squaredNorm() + dgi.squaredNorm();
        if (sy > 0.0 && yy > 0.0) step = std::clamp(sy / yy, 1e-8, 1e3);
      }
      prev_u = model.user_table;
      prev_i = model.item_table;
      prev_grad_u = grad_u;
      prev_grad_i = grad_i;

      // Armijo backtracking on the BB step
      const double grad_sq = grad_u.squaredNorm() + grad_i.squaredNorm();
      double trial = step;
      for (int back = 0; back < 50; ++back) {
        model.user_table = prev_u - trial * grad_u;
        model.item_table = prev_i - trial * grad_i;
        const double candidate =
            objective_and_gradient(inst, model, config.t, nullptr, nullptr);
        if (candidate <= value - 1e-4 * trial * grad_sq) break;
        trial *= 0.5;
      }
      value = objective_and_gradient(inst, model, config.t, &grad_u, &grad_i);
    }
    if (ok && value < best.value) {
      best.model = model;
      best.value = value;
      best.iterations = iter;
      converged = true;
    }
  }
  if (!converged)
    throw std::runtime_error(
        "full-information reference did not reach the gradient tolerance");
  return best;
}

/// One minibatch training run; returns the trained model.
inline EmbeddingModel minibatch_train(const SimInstance& inst,
                                      const SimConfig& config, Strategy strategy,
                                      int users_per_batch, int dim,
                                      std::uint64_t seed) {
  std::mt19937_64 init_rng(mix_seed(seed, 0x1417ULL));
  std::mt19937_64 shuffle_rng(mix_seed(seed, 0x5bafULL));
  std::mt19937_64 dual_rng(mix_seed(seed, 0xd0a1ULL));

  EmbeddingModel model =
      make_model(inst.data.split.num_users, inst.data.split.num_items, dim,
                 config.learning_rate, 1, init_rng);

  const int num_users = inst.data.split.num_users;
  const std::size_t batches_per_epoch =
      (static_cast<std::size_t>(num_users) +
       static_cast<std::size_t>(users_per_batch) - 1) /
      static_cast<std::size_t>(users_per_batch);
  const int refresh_interval =
      std::max<int>(1, static_cast<int>(batches_per_epoch) / 4);

  RunConfig dual_config;
  dual_config.strategy = Strategy::kFairdual;
  dual_config.eta = config.eta;
  dual_config.lambda = config.lambda;
  dual_config.alpha = config.alpha;
  dual_config.q = std::min(config.q, inst.data.split.num_items);
  dual_config.k = std::min(config.eval_k, dual_config.q);
  dual_config.normalize_dual_budget = true;
  dual_config.budget_margin = config.budget_margin;
  std::optional<DualController> dual;
  if (strategy == Strategy::kFairdual)
    dual.emplace(inst.data.catalog.m, dual_config, inst.users.size());

  GroupLossTracker tracker(inst.data.catalog.num_groups);
  VectorXd static_item_weights;
  if (strategy == Strategy::kIfairlrs)
    static_item_weights =
        ifairlrs_item_weights(inst.data.split.train, inst.data.catalog);

  std::vector<int> user_order(static_cast<std::size_t>(num_users));
  std::iota(user_order.begin(), user_order.end(), 0);

  long counter = 0;
  std::vector<int> rows, batch_items;
  std::vector<Interaction> batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (dual) dual->reset_epoch();
    std::shuffle(user_order.begin(), user_order.end(), shuffle_rng);

    for (std::size_t start = 0; start < user_order.size();
         start += static_cast<std::size_t>(users_per_batch)) {
      if (maybe_refresh_snapshot(model, counter, refresh_interval) && dual)
        dual->reset_window();
      ++counter;

      rows.clear();
      const std::size_t stop = std::min(
          user_order.size(), start + static_cast<std::size_t>(users_per_batch));
      for (std::size_t u = start; u < stop; ++u)
        for (int s : inst.by_user[static_cast<std::size_t>(user_order[u])])
          rows.push_back(s);
      if (rows.empty()) continue;

      batch.clear();
      batch_items.clear();
      for (int s : rows) {
        const auto idx = static_cast<std::size_t>(s);
        batch.push_back({inst.users[idx], inst.items[idx],
                         inst.labels[idx] > 0.5 ? 1 : 0, 0});
        batch_items.push_back(inst.items[idx]);
      }
      const NormalizedAdjacency batch_adjacency =
          inst.adjacency.slice(batch_items);

      // chain-rule weights of the batch power objective, held constant
      VectorXd w_batch = VectorXd::Zero(model.num_items());
      VectorXd losses(static_cast<Index>(batch.size()));
      for (std::size_t bi = 0; bi < batch.size(); ++bi) {
        const double p = predict(model, batch[bi].user, batch[bi].item);
        const double l =
            batch[bi].label == 1 ? -std::log(p) : -std::log(1.0 - p);
        losses[static_cast<Index>(bi)] = l;
        w_batch[batch[bi].item] += l;
      }
      const VectorXd e_batch = inst.adjacency.transpose_apply(w_batch);
      const VectorXd group_term =
          (1.0 + config.t) *
          inst.b_vec.cwiseProduct(e_batch.array().pow(config.t).matrix());
      VectorXd weights = batch_adjacency.apply(group_term);
      const double mean_weight = weights.mean();
      if (mean_weight > 0.0) weights /= mean_weight;

      switch (strategy) {
        case Strategy::kUni:
          break;
        case Strategy::kDro:
          weights = weights.cwiseProduct(
              dro_weights(batch, inst.data.catalog, tracker.ema));
          break;
        case Strategy::kSdro:
          weights = weights.cwiseProduct(
              sdro_weights(batch_adjacency, tracker.ema, 1.0));
          break;
        case Strategy::kProp:
          weights = weights.cwiseProduct(prop_weights(model, batch));
          break;
        case Strategy::kIfairlrs:
          weights = weights.cwiseProduct(
              gather_item_weights(static_item_weights, batch));
          break;
        case Strategy::kFairdual:
          weights = weights.cwiseProduct(dual->weights(batch_adjacency));
          break;
        case Strategy::kMaxminSample:
          throw std::invalid_argument(
              "maxmin_sample resamples interactions and has no user-partition "
              "form; not supported by the simulation");
      }

      sgd_step(model, batch, weights, /*symmetric=*/true);

      if (dual) {
        const MatrixRXd frozen_sample =
            sample_frozen_items(model, dual_config.q, dual_rng);
        MatrixRXd user_embeddings(static_cast<Index>(batch.size()), dim);
        for (std::size_t bi = 0; bi < batch.size(); ++bi)
          user_embeddings.row(static_cast<Index>(bi)) =
              model.user_table.row(batch[bi].user);
        dual->update(batch_adjacency,
                     estimate_scores(user_embeddings, frozen_sample,
                                     dual_config.k));
      }
      if (strategy == Strategy::kDro || strategy == Strategy::kSdro)
        tracker.update(batch_adjacency, losses);
    }
  }
  return model;
}

}  // namespace detail

/**
 * The batch-size / group-size sweep. For every group count the planted
 * dataset is shared across batch sizes and strategies; each run reports the
 * full-objective distance from the reference optimum (the Jensen gap), the
 * partitioned objective value on a canonical user partition, and final
 * ranking metrics. Rows come back sorted by (G, B, strategy, seed).
 */
inline std::vector<GapRow> run_gap_sweep(const SimConfig& config) {
  config.validate();
  const int dim = config.synthetic.rank * 2;

  struct Task {
    int num_groups;
    int batch_size;
    Strategy strategy;
    int seed_index;
  };
  std::vector<Task> tasks;
  for (int g : config.group_sizes)
    for (int b : config.batch_sizes)
      for (Strategy s : config.strategies)
        for (int i = 0; i < config.num_seeds; ++i)
          tasks.push_back({g, b, s, i});

  // shared per (G, seed): dataset and reference optimum
  struct Shared {
    detail::SimInstance instance;
    double optimum = 0.0;
  };
  std::vector<std::vector<Shared>> shared(config.group_sizes.size());
  for (std::size_t gi = 0; gi < config.group_sizes.size(); ++gi) {
    shared[gi].resize(static_cast<std::size_t>(config.num_seeds));
    for (int i = 0; i < config.num_seeds; ++i) {
      const std::uint64_t dataset_seed =
          mix_seed(config.seed, 0xda7aULL,
                   static_cast<std::uint64_t>(config.group_sizes[gi] * 1000 + i));
      auto& slot = shared[gi][static_cast<std::size_t>(i)];
      slot.instance = detail::make_instance(config, config.group_sizes[gi], dataset_seed);
      slot.optimum =
          detail::reference_optimum(slot.instance, config, dim, dataset_seed).value;
    }
  }

  std::vector<GapRow> rows(tasks.size());
  std::mutex queue_mutex;
  std::size_t next = 0;
  auto worker = [&]() {
    for (;;) {
      std::size_t id;
      {
        std::lock_guard<std::mutex> lock(queue_mutex);
        if (next >= tasks.size()) return;
        id = next++;
      }
      const Task& task = tasks[id];
      const std::size_t gi = static_cast<std::size_t>(
          std::find(config.group_sizes.begin(), config.group_sizes.end(),
                    task.num_groups) -
          config.group_sizes.begin());
      const Shared& base = shared[gi][static_cast<std::size_t>(task.seed_index)];

      const auto start_time = std::chrono::steady_clock::now();
      const std::uint64_t run_seed = mix_seed(
          config.seed, static_cast<std::uint64_t>(task.batch_size),
          static_cast<std::uint64_t>(task.num_groups * 100 +
                                     static_cast<int>(task.strategy) * 10 +
                                     task.seed_index));
      EmbeddingModel model =
          detail::minibatch_train(base.instance, config, task.strategy,
                                  task.batch_size, dim, run_seed);

      // canonical measurement partition: shared across strategies
      std::mt19937_64 part_rng(
          mix_seed(config.seed, 0x9a27ULL,
                   static_cast<std::uint64_t>(task.num_groups * 100000 +
                                              task.batch_size * 10 +
                                              task.seed_index)));
      std::vector<int> order(
          static_cast<std::size_t>(base.instance.data.split.num_users));
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), part_rng);
      std::vector<VectorXd> parts;
      std::vector<int> rows_of_part;
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(task.batch_size)) {
        rows_of_part.clear();
        const std::size_t stop = std::min(
            order.size(), start + static_cast<std::size_t>(task.batch_size));
        for (std::size_t u = start; u < stop; ++u)
          for (int s :
               base.instance.by_user[static_cast<std::size_t>(order[u])])
            rows_of_part.push_back(s);
        parts.push_back(base.instance.adjacency.transpose_apply(
            detail::item_losses(base.instance, model, rows_of_part)));
      }

      GapRow row;
      row.batch_size = task.batch_size;
      row.num_groups = task.num_groups;
      row.strategy = task.strategy;
      row.seed = static_cast<std::uint64_t>(task.seed_index);
      row.minibatch_value = minibatch_objective(parts, base.instance.b_vec, config.t);
      const double full_value = full_info_loss(
          detail::item_losses(base.instance, model, detail::all_rows(base.instance)),
          base.instance.adjacency, base.instance.b_vec, config.t);
      row.full_optimum = base.optimum;
      row.jensen_gap = jensen_gap(full_value, base.optimum);
      auto report = evaluate_model(model, base.instance.data.split.test,
                                   base.instance.data.catalog, {config.eval_k});
      row.ndcg = report.ndcg.at(config.eval_k).value_or(0.0);
      row.mmf = report.mmf.at(config.eval_k).value_or(0.0);
      row.runtime_ms =
          std::chrono::duration<double, std::milli>(
              std::chrono::steady_clock::now() - start_time)
              .count();
      rows[id] = row;
    }
  };

  const int jobs = std::max(1, config.jobs);
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& thread : pool) thread.join();

  std::sort(rows.begin(), rows.end(), [](const GapRow& a, const GapRow& b) {
    return std::tie(a.num_groups, a.batch_size, a.strategy, a.seed) <
           std::tie(b.num_groups, b.batch_size, b.strategy, b.seed);
  });
  return rows;
}

inline void write_gap_csv(std::ostream& out, const std::vector<GapRow>& rows,
                          int eval_k) {
  out << "B,G,strategy,seed,jensen_gap,minibatch_objective,full_optimum,ndcg@"
      << eval_k << ",mmf@" << eval_k << ",runtime_ms\n";
  char buffer[64];
  auto fmt = [&buffer](double v) {
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    return std::string(buffer);
  };
  for (const GapRow& row : rows) {
    out << row.batch_size << ',' << row.num_groups << ','
        << to_string(row.strategy) << ',' << row.seed << ','
        << fmt(row.jensen_gap) << ',' << fmt(row.minibatch_value) << ','
        << fmt(row.full_optimum) << ',' << fmt(row.ndcg) << ',' << fmt(row.mmf)
        << ',' << fmt(row.runtime_ms) << '\n';
  }
}

}  // namespace fairdual
