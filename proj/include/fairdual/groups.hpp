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
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fairdual/types.hpp"

namespace fairdual {

/// Item-to-group membership with per-group weights m_g. Groups are dense
/// indices 0..num_groups-1; `group_ids` keeps the original ids when the
/// catalog came from a file.
struct GroupCatalog {
  int num_groups = 0;
  std::vector<std::vector<int>> memberships;  // item -> sorted group indices
  VectorXd m;                                 // group weights, default |I_g|
  std::vector<std::int64_t> group_ids;

  int membership_count(int item) const {
    return static_cast<int>(memberships[static_cast<std::size_t>(item)].size());
  }
};

/// Builds a catalog from (item, group) pairs over dense item ids. Default
/// weights are the group sizes, counting an item once per membership.
inline GroupCatalog make_catalog(
    const std::vector<std::pair<int, int>>& pairs, int num_items) {
  GroupCatalog catalog;
  std::map<int, int> group_index;
  catalog.memberships.assign(static_cast<std::size_t>(num_items), {});
  for (const auto& [item, group] : pairs) {
    if (item < 0 || item >= num_items)
      throw std::invalid_argument("group file references unknown item " +
                                  std::to_string(item));
    auto [it, inserted] =
        group_index.try_emplace(group, static_cast<int>(group_index.size()));
    if (inserted) catalog.group_ids.push_back(group);
    catalog.memberships[static_cast<std::size_t>(item)].push_back(it->second);
  }
  catalog.num_groups = static_cast<int>(group_index.size());
  catalog.m = VectorXd::Zero(catalog.num_groups);
  for (auto& groups : catalog.memberships) {
    std::sort(groups.begin(), groups.end());
    groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
    for (int g : groups) catalog.m[g] += 1.0;
  }
  return catalog;
}

/**
 * Row-normalized item-group adjacency: row i carries 1/n_i at each of item
 * i's groups, so every row sums to one. Rows may describe the whole catalog
 * or the items of one batch (duplicates allowed).
 *
 * Storage is row-wise sparse; a dense mirror is kept for small group counts
 * where the products  A^T w  and  A mu  are plain GEMV calls.
 */
class NormalizedAdjacency {
 public:
  static constexpr int kDenseGroupLimit = 64;

  NormalizedAdjacency() = default;
  NormalizedAdjacency(std::vector<std::vector<std::pair<int, double>>> rows,
                      Index num_groups)
      : rows_(std::move(rows)), num_groups_(num_groups) {
    if (num_groups_ <= kDenseGroupLimit) {
      dense_ = MatrixXd::Zero(static_cast<Index>(rows_.size()), num_groups_);
      for (std::size_t r = 0; r < rows_.size(); ++r)
        for (const auto& [g, v] : rows_[r])
          dense_(static_cast<Index>(r), g) = v;
      has_dense_ = true;
    }
  }

  Index rows() const { return static_cast<Index>(rows_.size()); }
  Index cols() const { return num_groups_; }
  bool has_dense() const { return has_dense_; }
  const MatrixXd& dense() const {
    if (!has_dense_) densify();
    return dense_;
  }

  /// A mu: per-row membership-weighted average of mu. Length rows().
  VectorXd apply(const VectorXd& mu) const {
    if (mu.size() != num_groups_)
      throw std::invalid_argument("adjacency apply: size mismatch");
    if (has_dense_) return dense_ * mu;
    VectorXd out = VectorXd::Zero(rows());
    for (std::size_t r = 0; r < rows_.size(); ++r)
      for (const auto& [g, v] : rows_[r]) out[static_cast<Index>(r)] += v * mu[g];
    return out;
  }

  /// A^T w: aggregates per-row mass into per-group mass. Length cols().
  VectorXd transpose_apply(const VectorXd& w) const {
    if (w.size() != rows())
      throw std::invalid_argument("adjacency transpose_apply: size mismatch");
    if (has_dense_) return dense_.transpose() * w;
    VectorXd out = VectorXd::Zero(num_groups_);
    for (std::size_t r = 0; r < rows_.size(); ++r)
      for (const auto& [g, v] : rows_[r]) out[g] += v * w[static_cast<Index>(r)];
    return out;
  }

  /// Gathers rows by index; duplicates produce duplicate rows.
  NormalizedAdjacency slice(std::span<const int> row_ids) const {
    std::vector<std::vector<std::pair<int, double>>> picked;
    picked.reserve(row_ids.size());
    for (int id : row_ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= rows_.size())
        throw std::out_of_range("adjacency slice: row " + std::to_string(id) +
                                " out of range");
      picked.push_back(rows_[static_cast<std::size_t>(id)]);
    }
    return NormalizedAdjacency(std::move(picked), num_groups_);
  }

  const std::vector<std::pair<int, double>>& row(Index r) const {
    return rows_[static_cast<std::size_t>(r)];
  }

 private:
  void densify() const {
    dense_ = MatrixXd::Zero(static_cast<Index>(rows_.size()), num_groups_);
    for (std::size_t r = 0; r < rows_.size(); ++r)
      for (const auto& [g, v] : rows_[r])
        dense_(static_cast<Index>(r), g) = v;
    has_dense_ = true;
  }

  std::vector<std::vector<std::pair<int, double>>> rows_;
  Index num_groups_ = 0;
  mutable MatrixXd dense_;
  mutable bool has_dense_ = false;
};

/// Builds the row-normalized adjacency over all catalog items. Throws if any
/// item has no membership.
inline NormalizedAdjacency build_adjacency(const GroupCatalog& catalog) {
  std::vector<std::vector<std::pair<int, double>>> rows;
  rows.reserve(catalog.memberships.size());
  for (std::size_t item = 0; item < catalog.memberships.size(); ++item) {
    const auto& groups = catalog.memberships[item];
    if (groups.empty())
      throw std::invalid_argument("orphan item " + std::to_string(item) +
                                  " has no group membership");
    std::vector<std::pair<int, double>> row;
    row.reserve(groups.size());
    const double weight = 1.0 / static_cast<double>(groups.size());
    for (int g : groups) row.emplace_back(g, weight);
    rows.push_back(std::move(row));
  }
  return NormalizedAdjacency(std::move(rows), catalog.num_groups);
}

inline NormalizedAdjacency batch_slice(const NormalizedAdjacency& adjacency,
                                       std::span<const int> item_ids) {
  return adjacency.slice(item_ids);
}

}  // namespace fairdual
