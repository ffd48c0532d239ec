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
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairdual/data.hpp"
#include "fairdual/groups.hpp"
#include "fairdual/model.hpp"
#include "fairdual/types.hpp"

namespace fairdual {

enum class Strategy {
  kUni,
  kDro,
  kSdro,
  kProp,
  kIfairlrs,
  kMaxminSample,
  kFairdual,
};

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kUni: return "uni";
    case Strategy::kDro: return "dro";
    case Strategy::kSdro: return "sdro";
    case Strategy::kProp: return "prop";
    case Strategy::kIfairlrs: return "ifairlrs";
    case Strategy::kMaxminSample: return "maxmin_sample";
    case Strategy::kFairdual: return "fairdual";
  }
  return "unknown";
}

inline Strategy parse_strategy(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (name == "uni") return Strategy::kUni;
  if (name == "dro") return Strategy::kDro;
  if (name == "sdro" || name == "s-dro") return Strategy::kSdro;
  if (name == "prop") return Strategy::kProp;
  if (name == "ifairlrs") return Strategy::kIfairlrs;
  if (name == "maxmin_sample" || name == "maxmin") return Strategy::kMaxminSample;
  if (name == "fairdual") return Strategy::kFairdual;
  throw std::invalid_argument("unknown strategy: " + name);
}

/// Exponential moving average of per-group training losses, the shared state
/// behind the DRO-family weighting rules. Groups absent from a batch keep
/// their previous estimate.
struct GroupLossTracker {
  VectorXd ema;
  double decay = 0.9;

  explicit GroupLossTracker(Index num_groups = 0)
      : ema(VectorXd::Zero(num_groups)) {}

  void update(const NormalizedAdjacency& batch_adjacency,
              const VectorXd& losses) {
    const VectorXd mass =
        batch_adjacency.transpose_apply(VectorXd::Ones(batch_adjacency.rows()));
    const VectorXd sums = batch_adjacency.transpose_apply(losses);
    for (Index g = 0; g < ema.size(); ++g)
      if (mass[g] > 0.0)
        ema[g] = decay * ema[g] + (1.0 - decay) * sums[g] / mass[g];
  }
};

inline VectorXd uni_weights(Index batch_size) {
  return VectorXd::Ones(batch_size);
}

/// Hard worst-group selection: weight 1 exactly for samples whose item
/// belongs to the group with the highest running loss (ties to the lowest
/// group index), 0 otherwise. A batch with no worst-group items trains as a
/// no-op.
inline VectorXd dro_weights(const std::vector<Interaction>& batch,
                            const GroupCatalog& catalog,
                            const VectorXd& running_losses) {
  Index worst = 0;
  running_losses.maxCoeff(&worst);
  VectorXd weights = VectorXd::Zero(static_cast<Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& groups = catalog.memberships[static_cast<std::size_t>(batch[b].item)];
    if (std::find(groups.begin(), groups.end(), static_cast<int>(worst)) !=
        groups.end())
      weights[static_cast<Index>(b)] = 1.0;
  }
  return weights;
}

/// Softened DRO: group weights proportional to exp(running_loss / T),
/// spread over samples through the membership rows and normalized to mean 1
/// over the batch.
inline VectorXd sdro_weights(const NormalizedAdjacency& batch_adjacency,
                             const VectorXd& running_losses,
                             double temperature) {
  if (temperature <= 0.0)
    throw std::invalid_argument("temperature must be positive");
  const double top = running_losses.maxCoeff();
  VectorXd group_weights =
      ((running_losses.array() - top) / temperature).exp().matrix();
  VectorXd raw = batch_adjacency.apply(group_weights);
  const double mean = raw.mean();
  if (mean <= 0.0) return VectorXd::Ones(raw.size());
  return raw / mean;
}

/// Margin weighting: samples near the decision boundary (predicted
/// probability close to 0.5) get the largest weight, normalized to mean 1.
inline VectorXd prop_weights(const EmbeddingModel& model,
                             const std::vector<Interaction>& batch) {
  VectorXd raw(static_cast<Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double p = predict(model, batch[b].user, batch[b].item);
    raw[static_cast<Index>(b)] = 1.0 - std::abs(2.0 * p - 1.0);
  }
  const double mean = raw.mean();
  if (mean <= 0.0) return VectorXd::Ones(raw.size());
  return raw / mean;
}

/**
 * Static per-item weights from reciprocal group popularity: popularity_g
 * counts training interactions of the group's items (an item counts once
 * per membership), each item averages 1/popularity over its memberships,
 * and the result is normalized to mean 1 across the training split.
 * Zero-popularity groups take the largest observed group weight.
 */
inline VectorXd ifairlrs_item_weights(const std::vector<Interaction>& train,
                                      const GroupCatalog& catalog) {
  VectorXd popularity = VectorXd::Zero(catalog.num_groups);
  for (const auto& x : train)
    for (int g : catalog.memberships[static_cast<std::size_t>(x.item)])
      popularity[g] += 1.0;

  VectorXd group_weight(catalog.num_groups);
  double max_weight = 0.0;
  for (Index g = 0; g < popularity.size(); ++g)
    if (popularity[g] > 0.0)
      max_weight = std::max(max_weight, 1.0 / popularity[g]);
  if (max_weight == 0.0) max_weight = 1.0;
  for (Index g = 0; g < popularity.size(); ++g)
    group_weight[g] = popularity[g] > 0.0 ? 1.0 / popularity[g] : max_weight;

  VectorXd item_weight(static_cast<Index>(catalog.memberships.size()));
  for (std::size_t i = 0; i < catalog.memberships.size(); ++i) {
    const auto& groups = catalog.memberships[i];
    double w = 0.0;
    for (int g : groups) w += group_weight[g];
    item_weight[static_cast<Index>(i)] =
        groups.empty() ? 1.0 : w / static_cast<double>(groups.size());
  }

  double train_sum = 0.0;
  for (const auto& x : train) train_sum += item_weight[x.item];
  if (train_sum > 0.0)
    item_weight *= static_cast<double>(train.size()) / train_sum;
  return item_weight;
}

inline VectorXd gather_item_weights(const VectorXd& item_weights,
                                    const std::vector<Interaction>& batch) {
  VectorXd out(static_cast<Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b)
    out[static_cast<Index>(b)] = item_weights[batch[b].item];
  return out;
}

/// Interaction pool indexed by group, for loss-driven batch composition.
struct GroupedPool {
  std::vector<std::vector<Interaction>> by_group;

  GroupedPool(const std::vector<Interaction>& pool, const GroupCatalog& catalog)
      : by_group(static_cast<std::size_t>(catalog.num_groups)) {
    for (const auto& x : pool)
      for (int g : catalog.memberships[static_cast<std::size_t>(x.item)])
        by_group[static_cast<std::size_t>(g)].push_back(x);
    for (const auto& bucket : by_group)
      if (bucket.empty())
        throw std::invalid_argument("maxmin sampling needs every group in the pool");
  }
};

/// Composes a batch by drawing groups from a softmax over running losses
/// (worse groups oversampled) and items uniformly within the drawn group.
/// Sample weights for such a batch are all-ones.
inline Batch maxmin_sample(const GroupedPool& pool,
                           const VectorXd& running_losses, int batch_size,
                           double temperature, std::mt19937_64& rng) {
  if (temperature <= 0.0)
    throw std::invalid_argument("temperature must be positive");
  const double top = running_losses.maxCoeff();
  VectorXd probs = ((running_losses.array() - top) / temperature).exp().matrix();
  probs /= probs.sum();
  std::discrete_distribution<int> group(probs.data(), probs.data() + probs.size());

  Batch batch;
  batch.interactions.reserve(static_cast<std::size_t>(batch_size));
  for (int b = 0; b < batch_size; ++b) {
    const auto& bucket = pool.by_group[static_cast<std::size_t>(group(rng))];
    std::uniform_int_distribution<std::size_t> pick(0, bucket.size() - 1);
    batch.interactions.push_back(bucket[pick(rng)]);
  }
  return batch;
}

}  // namespace fairdual
