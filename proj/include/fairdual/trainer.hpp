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

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairdual/baselines.hpp"
#include "fairdual/data.hpp"
#include "fairdual/dual.hpp"
#include "fairdual/groups.hpp"
#include "fairdual/metrics.hpp"
#include "fairdual/model.hpp"
#include "fairdual/types.hpp"

namespace fairdual {

struct RunConfig {
  Strategy strategy = Strategy::kFairdual;
  double eta = 1e-3;       // dual step weight; documented default range [1e-4, 1e-2]
  double lambda = 2.0;     // fairness trade-off in [0, 10]
  double alpha = 0.9;      // dual momentum
  int beta = 640;          // frozen-snapshot refresh interval (batches)
  int batch_size = 32;
  int q = 200;             // frozen items sampled per batch
  int k = 10;              // ranking size for the score estimate
  int d = 32;              // embedding dimension
  int epochs = 5;
  double learning_rate = 0.05;
  std::uint64_t seed = 1;
  bool persist_dual = false;  // carry mu/momentum across refresh boundaries
  int eval_every = 1;         // evaluation snapshot cadence, in epochs
  double temperature = 1.0;   // SDRO / maxmin softmax temperature
  bool symmetric_loss = false;
  // Diagnostic switch: keeps the dual stream running but forces mu = 0, so a
  // run must coincide with UNI bit for bit.
  bool pin_mu_zero = false;
  // Rescales the dual budget to mean 1 and measures consumption in budget
  // units (one epoch consumes sum-of-budgets / budget_margin). The raw group
  // sizes are only commensurate with the estimated ranking mass when one
  // epoch allocates about |I| mass; desk-scale runs do not, and without
  // rescaling the budget term swamps the per-group signal. Off by default.
  bool normalize_dual_budget = false;
  // With margin > 1 the reward budget outlasts the epoch, keeping the
  // subgradient on the boosting side; imbalances then express themselves as
  // differential boosts within the lambda allowance instead of sign flips.
  double budget_margin = 1.0;
  std::vector<int> eval_ks = {5, 10, 20};

  void validate() const {
    auto fail = [](const std::string& key, const std::string& why) {
      throw std::invalid_argument("config key '" + key + "': " + why);
    };
    if (eta <= 0.0) fail("eta", "must be positive");
    if (lambda < 0.0) fail("lambda", "must be non-negative");
    if (alpha < 0.0 || alpha >= 1.0) fail("alpha", "must lie in [0, 1)");
    if (beta < 1) fail("beta", "must be >= 1");
    if (batch_size < 1) fail("batch_size", "must be >= 1");
    if (k < 1) fail("k", "must be >= 1");
    if (q < k) fail("q", "must be >= k");
    if (d < 1) fail("d", "must be >= 1");
    if (epochs < 1) fail("epochs", "must be >= 1");
    if (learning_rate <= 0.0) fail("learning_rate", "must be positive");
    if (eval_every < 1) fail("eval_every", "must be >= 1");
    if (temperature <= 0.0) fail("temperature", "must be positive");
    if (budget_margin <= 0.0) fail("budget_margin", "must be positive");
    if (eval_ks.empty()) fail("eval_ks", "must name at least one K");
  }
};

/// Uniform sample of Q frozen item embeddings, without replacement.
inline MatrixRXd sample_frozen_items(const EmbeddingModel& model, int q,
                                     std::mt19937_64& rng) {
  const Index n = model.num_items();
  if (q < 1 || static_cast<Index>(q) > n)
    throw std::invalid_argument("frozen sample size out of range");
  // partial Fisher-Yates over item indices
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  for (int i = 0; i < q; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(ids[static_cast<std::size_t>(i)],
              ids[static_cast<std::size_t>(pick(rng))]);
  }
  MatrixRXd sample(q, model.dim());
  for (int i = 0; i < q; ++i)
    sample.row(i) = model.frozen_item_table.row(ids[static_cast<std::size_t>(i)]);
  return sample;
}

/**
 * Owns the dual loop of one training run: per-epoch budget reset, per-window
 * mu/momentum reset, and the per-batch sequence subgradient -> momentum ->
 * budget decrement -> mirror projection, all on the pre-update mu that the
 * batch weights were drawn from.
 */
class DualController {
 public:
  DualController(const VectorXd& group_weights, const RunConfig& config,
                 std::size_t samples_per_epoch)
      : config_(config), samples_per_epoch_(samples_per_epoch) {
    budget_ = group_weights;
    if (config.normalize_dual_budget)
      budget_ *= static_cast<double>(budget_.size()) / budget_.sum();
    state_ = init_dual(budget_, config.eta, config.lambda, config.alpha);
  }

  const DualState& state() const { return state_; }

  void reset_epoch() { state_.gamma = budget_; }

  void reset_window() {
    if (config_.persist_dual) return;
    state_.mu.setZero();
    state_.momentum.setZero();
  }

  VectorXd weights(const NormalizedAdjacency& batch_adjacency) const {
    return sample_weights(batch_adjacency, state_.mu);
  }

  void update(const NormalizedAdjacency& batch_adjacency,
              const VectorXd& w_tilde) {
    VectorXd consumption = w_tilde;
    if (config_.normalize_dual_budget) {
      if (!calibrated_) {
        // First batch fixes the unit: scale so the expected mass of one
        // epoch equals the total budget.
        const double mean_mass = w_tilde.size() > 0 ? w_tilde.mean() : 1.0;
        const double epoch_mass =
            mean_mass * static_cast<double>(samples_per_epoch_);
        consumption_scale_ =
            epoch_mass > 0.0
                ? budget_.sum() / (config_.budget_margin * epoch_mass)
                : 1.0;
        calibrated_ = true;
      }
      consumption *= consumption_scale_;
    }
    const VectorXd g_tilde =
        subgradient(batch_adjacency, consumption, state_.gamma);
    const VectorXd& g = momentum_update(state_, g_tilde);
    update_reward(state_, batch_adjacency, consumption);
    if (config_.pin_mu_zero)
      ++state_.step;  // projection skipped, mu stays 0
    else
      project_dual(state_, g);
  }

 private:
  RunConfig config_;
  std::size_t samples_per_epoch_ = 0;
  VectorXd budget_;
  DualState state_;
  double consumption_scale_ = 1.0;
  bool calibrated_ = false;
};

/// Per-batch observability for golden-trace and invariant tests.
struct BatchTrace {
  int epoch = 0;
  int batch = 0;
  VectorXd weights;
  VectorXd mu;
  VectorXd gamma;
  VectorXd momentum;
};

struct EvalSnapshot {
  int epoch = 0;
  MetricsReport report;
};

struct TrainResult {
  EmbeddingModel model;
  std::vector<EvalSnapshot> history;
  nlohmann::json dual_snapshot;  // empty unless the dual loop ran
};

/**
 * End-to-end training loop: per batch, refresh check, loss vector, strategy
 * weights (from pre-update state), one weighted SGD step, then the dual or
 * baseline state updates. Evaluation snapshots on the test split every
 * `eval_every` epochs and after the final epoch.
 *
 * Independent RNG streams (model init / batch shuffling / dual sampling /
 * batch composition) are derived from the run seed, so strategies that skip
 * a stream still see identical draws on the others.
 */
inline TrainResult train(const RunConfig& config, const DatasetSplit& data,
                         const GroupCatalog& catalog,
                         std::vector<BatchTrace>* trace = nullptr,
                         const EmbeddingModel* initial_model = nullptr) {
  config.validate();
  if (data.train.empty()) throw std::invalid_argument("empty training split");
  if (config.strategy == Strategy::kFairdual && config.q > data.num_items)
    throw std::invalid_argument("config key 'q': exceeds the item count");

  std::mt19937_64 init_rng(mix_seed(config.seed, 0x1417ULL));
  std::mt19937_64 dual_rng(mix_seed(config.seed, 0xd0a1ULL));
  std::mt19937_64 compose_rng(mix_seed(config.seed, 0xc095ULL));

  TrainResult result;
  result.model = initial_model
                     ? *initial_model
                     : make_model(data.num_users, data.num_items, config.d,
                                  config.learning_rate, config.beta, init_rng);
  result.model.learning_rate = config.learning_rate;
  result.model.beta = config.beta;

  const NormalizedAdjacency adjacency = build_adjacency(catalog);
  const bool is_fairdual = config.strategy == Strategy::kFairdual;

  std::optional<DualController> dual;
  if (is_fairdual)
    dual.emplace(catalog.m, config, data.train.size());

  GroupLossTracker tracker(catalog.num_groups);
  VectorXd static_item_weights;
  if (config.strategy == Strategy::kIfairlrs)
    static_item_weights = ifairlrs_item_weights(data.train, catalog);
  std::optional<GroupedPool> pool;
  if (config.strategy == Strategy::kMaxminSample)
    pool.emplace(data.train, catalog);

  const std::size_t batches_per_epoch =
      (data.train.size() + static_cast<std::size_t>(config.batch_size) - 1) /
      static_cast<std::size_t>(config.batch_size);

  long counter = 0;
  std::vector<int> batch_items;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (dual) dual->reset_epoch();

    std::vector<Batch> batches;
    if (config.strategy == Strategy::kMaxminSample) {
      for (std::size_t j = 0; j < batches_per_epoch; ++j) {
        Batch b = maxmin_sample(*pool, tracker.ema, config.batch_size,
                                config.temperature, compose_rng);
        b.batch_index = static_cast<int>(j);
        b.epoch_index = epoch;
        batches.push_back(std::move(b));
      }
    } else {
      batches = shuffled_batches(data.train, config.batch_size, config.seed, epoch);
    }

    for (const Batch& batch : batches) {
      if (maybe_refresh_snapshot(result.model, counter, config.beta) && dual)
        dual->reset_window();

      batch_items.clear();
      for (const auto& x : batch.interactions) batch_items.push_back(x.item);
      const NormalizedAdjacency batch_adjacency = adjacency.slice(batch_items);

      VectorXd weights;
      switch (config.strategy) {
        case Strategy::kUni:
        case Strategy::kMaxminSample:
          weights = uni_weights(static_cast<Index>(batch.interactions.size()));
          break;
        case Strategy::kDro:
          weights = dro_weights(batch.interactions, catalog, tracker.ema);
          break;
        case Strategy::kSdro:
          weights = sdro_weights(batch_adjacency, tracker.ema, config.temperature);
          break;
        case Strategy::kProp:
          weights = prop_weights(result.model, batch.interactions);
          break;
        case Strategy::kIfairlrs:
          weights = gather_item_weights(static_item_weights, batch.interactions);
          break;
        case Strategy::kFairdual:
          weights = dual->weights(batch_adjacency);
          break;
      }

      const auto [weighted_total, losses] = batch_loss(
          result.model, batch.interactions, weights, config.symmetric_loss);
      (void)weighted_total;
      sgd_step(result.model, batch.interactions, weights, config.symmetric_loss);

      if (dual) {
        const MatrixRXd frozen_sample =
            sample_frozen_items(result.model, config.q, dual_rng);
        MatrixRXd user_embeddings(
            static_cast<Index>(batch.interactions.size()), config.d);
        for (std::size_t b = 0; b < batch.interactions.size(); ++b)
          user_embeddings.row(static_cast<Index>(b)) =
              result.model.user_table.row(batch.interactions[b].user);
        const VectorXd w_tilde =
            estimate_scores(user_embeddings, frozen_sample, config.k);
        dual->update(batch_adjacency, w_tilde);
      }
      if (config.strategy == Strategy::kDro ||
          config.strategy == Strategy::kSdro ||
          config.strategy == Strategy::kMaxminSample)
        tracker.update(batch_adjacency, losses);

      if (trace) {
        BatchTrace t;
        t.epoch = epoch;
        t.batch = batch.batch_index;
        t.weights = weights;
        if (dual) {
          t.mu = dual->state().mu;
          t.gamma = dual->state().gamma;
          t.momentum = dual->state().momentum;
        }
        trace->push_back(std::move(t));
      }
      ++counter;
    }

    if ((epoch + 1) % config.eval_every == 0 || epoch == config.epochs - 1) {
      if (!result.history.empty() && result.history.back().epoch == epoch)
        continue;
      result.history.push_back(
          {epoch, evaluate_model(result.model, data.test, catalog, config.eval_ks)});
    }
  }

  if (dual) result.dual_snapshot = to_json(dual->state());
  return result;
}

}  // namespace fairdual
