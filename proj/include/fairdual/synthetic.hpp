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
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "fairdual/data.hpp"
#include "fairdual/groups.hpp"
#include "fairdual/types.hpp"

namespace fairdual {

/// Parameters of the planted-preference generator behind the simulation
/// harness.
struct SyntheticSpec {
  int num_users = 1000;
  int num_items = 1000;
  int num_groups = 7;
  int rank = 4;                  // latent dimension of the planted matrix
  double noise_std = 0.25;
  double group_size_skew = 0.0;  // Zipf exponent over group sizes; 0 = equal
  std::uint64_t seed = 1;
  // Each user's labels are 1 exactly on their top-scoring items; chosen as
  // 2x the evaluation ranking size so positives survive the chronological
  // tail split.
  int positives_per_user = 20;

  void validate() const {
    if (num_users <= 0 || num_items <= 0)
      throw std::invalid_argument("synthetic: users/items must be positive");
    if (num_groups <= 0 || num_groups > num_items)
      throw std::invalid_argument("synthetic: need 1 <= groups <= items");
    if (rank < 1) throw std::invalid_argument("synthetic: rank must be >= 1");
    if (noise_std < 0.0)
      throw std::invalid_argument("synthetic: noise_std must be >= 0");
    if (group_size_skew < 0.0)
      throw std::invalid_argument("synthetic: skew must be >= 0");
    if (positives_per_user < 1 || positives_per_user > num_items)
      throw std::invalid_argument("synthetic: positives_per_user out of range");
  }
};

struct SyntheticDataset {
  DatasetSplit split;
  GroupCatalog catalog;
  MatrixRXd true_scores;  // num_users x num_items, entries in (0, 1)
};

/// Zipf-proportional group sizes (size_g ~ (g+1)^-skew) normalized to
/// partition `num_items` with at least one item per group.
inline std::vector<int> zipf_group_sizes(int num_items, int num_groups,
                                         double skew) {
  std::vector<double> share(static_cast<std::size_t>(num_groups));
  double total = 0.0;
  for (int g = 0; g < num_groups; ++g) {
    share[static_cast<std::size_t>(g)] = std::pow(g + 1.0, -skew);
    total += share[static_cast<std::size_t>(g)];
  }
  std::vector<int> sizes(static_cast<std::size_t>(num_groups));
  int assigned = 0;
  for (int g = 0; g < num_groups; ++g) {
    sizes[static_cast<std::size_t>(g)] = std::max(
        1, static_cast<int>(std::floor(num_items * share[static_cast<std::size_t>(g)] / total)));
    assigned += sizes[static_cast<std::size_t>(g)];
  }
  // Distribute the rounding remainder (or claw back an overshoot) front to
  // back, never dropping a group below one item.
  int g = 0;
  while (assigned < num_items) {
    ++sizes[static_cast<std::size_t>(g % num_groups)];
    ++assigned;
    ++g;
  }
  while (assigned > num_items) {
    auto& s = sizes[static_cast<std::size_t>(g % num_groups)];
    if (s > 1) {
      --s;
      --assigned;
    }
    ++g;
  }
  return sizes;
}

/**
 * Plants a rank-`rank` preference matrix, scores = logistic(U V^T + noise),
 * labels each user's top `positives_per_user` items 1 and an equal number of
 * sampled items 0, and partitions items into Zipf-sized groups. Timestamps
 * interleave users round-robin so the chronological split holds out the tail
 * of every user's history. Items that would otherwise never appear in the
 * log are force-included as negatives so the catalog covers the full item
 * space. Fully deterministic given the spec.
 */
inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();

  std::mt19937_64 factor_rng(mix_seed(spec.seed, 0xfac7ULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.rank));
  MatrixRXd users(spec.num_users, spec.rank), items(spec.num_items, spec.rank);
  for (Index r = 0; r < users.rows(); ++r)
    for (Index c = 0; c < users.cols(); ++c)
      users(r, c) = normal(factor_rng) * scale;
  for (Index r = 0; r < items.rows(); ++r)
    for (Index c = 0; c < items.cols(); ++c)
      items(r, c) = normal(factor_rng) * scale;

  MatrixRXd scores = users * items.transpose();
  if (spec.noise_std > 0.0) {
    std::mt19937_64 noise_rng(mix_seed(spec.seed, 0x4015eULL));
    std::normal_distribution<double> noise(0.0, spec.noise_std);
    for (Index r = 0; r < scores.rows(); ++r)
      for (Index c = 0; c < scores.cols(); ++c) scores(r, c) += noise(noise_rng);
  }
  scores = scores.unaryExpr([](double z) { return logistic(z); });

  // Per-user interaction lists: top positives plus matched random negatives.
  std::mt19937_64 label_rng(mix_seed(spec.seed, 0x14b31ULL));
  std::vector<std::vector<std::pair<int, int>>> per_user(
      static_cast<std::size_t>(spec.num_users));  // (item, label)
  std::vector<bool> item_seen(static_cast<std::size_t>(spec.num_items), false);
  std::vector<int> order(static_cast<std::size_t>(spec.num_items));
  for (int u = 0; u < spec.num_users; ++u) {
    std::iota(order.begin(), order.end(), 0);
    const auto row = scores.row(u);
    std::partial_sort(order.begin(), order.begin() + spec.positives_per_user,
                      order.end(), [&row](int a, int b) {
                        if (row[a] != row[b]) return row[a] > row[b];
                        return a < b;
                      });
    std::vector<bool> positive(static_cast<std::size_t>(spec.num_items), false);
    auto& list = per_user[static_cast<std::size_t>(u)];
    for (int k = 0; k < spec.positives_per_user; ++k) {
      const int item = order[static_cast<std::size_t>(k)];
      positive[static_cast<std::size_t>(item)] = true;
      list.emplace_back(item, 1);
      item_seen[static_cast<std::size_t>(item)] = true;
    }
    std::uniform_int_distribution<int> pick(0, spec.num_items - 1);
    int negatives = std::min(spec.positives_per_user,
                             spec.num_items - spec.positives_per_user);
    std::vector<bool> used = positive;
    while (negatives > 0) {
      const int item = pick(label_rng);
      if (used[static_cast<std::size_t>(item)]) continue;
      used[static_cast<std::size_t>(item)] = true;
      list.emplace_back(item, 0);
      item_seen[static_cast<std::size_t>(item)] = true;
      --negatives;
    }
    std::shuffle(list.begin(), list.end(), label_rng);
  }
  // Force-include unseen items so every column of the score matrix exists in
  // the dense id space.
  int host = 0;
  for (int item = 0; item < spec.num_items; ++item) {
    if (item_seen[static_cast<std::size_t>(item)]) continue;
    per_user[static_cast<std::size_t>(host % spec.num_users)].emplace_back(item, 0);
    ++host;
  }

  std::vector<RawInteraction> log;
  std::size_t max_len = 0;
  for (const auto& list : per_user) max_len = std::max(max_len, list.size());
  for (std::size_t pos = 0; pos < max_len; ++pos)
    for (int u = 0; u < spec.num_users; ++u) {
      const auto& list = per_user[static_cast<std::size_t>(u)];
      if (pos >= list.size()) continue;
      log.push_back({u, list[pos].first, list[pos].second,
                     static_cast<std::int64_t>(pos) * spec.num_users + u});
    }

  SyntheticDataset data;
  data.split = chronological_split(std::move(log));

  // Items partition into contiguous Zipf-sized blocks in original-id order;
  // map memberships and score columns into the split's dense id space.
  const std::vector<int> sizes =
      zipf_group_sizes(spec.num_items, spec.num_groups, spec.group_size_skew);
  std::vector<int> item_group(static_cast<std::size_t>(spec.num_items));
  {
    int item = 0;
    for (int g = 0; g < spec.num_groups; ++g)
      for (int k = 0; k < sizes[static_cast<std::size_t>(g)]; ++k)
        item_group[static_cast<std::size_t>(item++)] = g;
  }
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(data.split.num_items));
  for (int dense = 0; dense < data.split.num_items; ++dense) {
    const auto original =
        static_cast<std::size_t>(data.split.item_ids[static_cast<std::size_t>(dense)]);
    pairs.emplace_back(dense, item_group[original]);
  }
  data.catalog = make_catalog(pairs, data.split.num_items);

  data.true_scores = MatrixRXd(data.split.num_users, data.split.num_items);
  for (int u = 0; u < data.split.num_users; ++u) {
    const auto orig_user =
        static_cast<Index>(data.split.user_ids[static_cast<std::size_t>(u)]);
    for (int i = 0; i < data.split.num_items; ++i) {
      const auto orig_item =
          static_cast<Index>(data.split.item_ids[static_cast<std::size_t>(i)]);
      data.true_scores(u, i) = scores(orig_user, orig_item);
    }
  }
  return data;
}

}  // namespace fairdual
