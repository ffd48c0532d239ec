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
#include <cstdint>
#include <fstream>
#include <istream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "fairdual/types.hpp"

namespace fairdual {

/// One observed (user, item, label) event. Ids are dense indices after
/// splitting; labels are binary implicit feedback.
struct Interaction {
  int user = 0;
  int item = 0;
  int label = 0;  // 1 = clicked/purchased, 0 = negative
  std::int64_t timestamp = 0;
};

struct DatasetSplit {
  std::vector<Interaction> train;
  std::vector<Interaction> validation;
  std::vector<Interaction> test;
  int num_users = 0;
  int num_items = 0;
  // Dense index -> original id, for reporting against the input files.
  std::vector<std::int64_t> user_ids;
  std::vector<std::int64_t> item_ids;
};

struct Batch {
  std::vector<Interaction> interactions;
  int batch_index = 0;
  int epoch_index = 0;
};

/// Raw log row before id re-indexing.
struct RawInteraction {
  std::int64_t user = 0;
  std::int64_t item = 0;
  int label = 0;
  std::int64_t timestamp = 0;
};

/**
 * Chronological 80/10/10 split.
 *
 * The log is stably sorted by timestamp (ties keep input order), validation
 * and test each take the floor(n/10) most recent interactions and train takes
 * the rest, so logs shorter than 10 interactions get empty validation/test
 * splits instead of failing. User and item ids are re-indexed densely in
 * order of first appearance in the sorted log.
 */
inline DatasetSplit chronological_split(std::vector<RawInteraction> log) {
  if (log.empty()) throw std::invalid_argument("empty dataset");

  std::stable_sort(log.begin(), log.end(),
                   [](const RawInteraction& a, const RawInteraction& b) {
                     return a.timestamp < b.timestamp;
                   });

  DatasetSplit split;
  std::unordered_map<std::int64_t, int> user_index, item_index;
  std::vector<Interaction> all;
  all.reserve(log.size());
  for (const RawInteraction& raw : log) {
    auto [uit, unew] = user_index.try_emplace(
        raw.user, static_cast<int>(split.user_ids.size()));
    if (unew) split.user_ids.push_back(raw.user);
    auto [iit, inew] = item_index.try_emplace(
        raw.item, static_cast<int>(split.item_ids.size()));
    if (inew) split.item_ids.push_back(raw.item);
    all.push_back({uit->second, iit->second, raw.label != 0 ? 1 : 0,
                   raw.timestamp});
  }
  split.num_users = static_cast<int>(split.user_ids.size());
  split.num_items = static_cast<int>(split.item_ids.size());

  const std::size_t n = all.size();
  const std::size_t n_val = n / 10;
  const std::size_t n_test = n / 10;
  const std::size_t n_train = n - n_val - n_test;
  split.train.assign(all.begin(), all.begin() + n_train);
  split.validation.assign(all.begin() + n_train, all.begin() + n_train + n_val);
  split.test.assign(all.begin() + n_train + n_val, all.end());
  return split;
}

/**
 * Shuffled mini-batches over the training split: one random permutation per
 * epoch (derived from seed and epoch index), batches of size B without
 * replacement, last batch possibly short.
 */
inline std::vector<Batch> shuffled_batches(const std::vector<Interaction>& train,
                                           int batch_size, std::uint64_t seed,
                                           int epoch = 0) {
  if (batch_size <= 0) throw std::invalid_argument("batch size must be >= 1");

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(mix_seed(seed, 0x6261746368ULL, static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Batch> batches;
  const std::size_t b = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < order.size(); start += b) {
    Batch batch;
    batch.batch_index = static_cast<int>(start / b);
    batch.epoch_index = epoch;
    const std::size_t end = std::min(order.size(), start + b);
    batch.interactions.reserve(end - start);
    for (std::size_t i = start; i < end; ++i)
      batch.interactions.push_back(train[order[i]]);
    batches.push_back(std::move(batch));
  }
  return batches;
}

namespace detail {

inline bool parse_log_line(const std::string& line, std::vector<std::int64_t>* out) {
  out->clear();
  std::string field;
  std::stringstream ss(line);
  // Fields are comma- or tab-separated; surrounding spaces tolerated.
  std::string normalized = line;
  for (char& c : normalized)
    if (c == ',' || c == '\t') c = ' ';
  std::stringstream fields(normalized);
  std::int64_t v;
  while (fields >> v) out->push_back(v);
  if (!fields.eof()) return false;
  return true;
}

}  // namespace detail

/// Reads `user_id, item_id, label, timestamp` rows (comma/tab separated,
/// `#` lines ignored).
inline std::vector<RawInteraction> read_interactions(std::istream& in) {
  std::vector<RawInteraction> log;
  std::string line;
  std::vector<std::int64_t> fields;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!detail::parse_log_line(line, &fields) || fields.size() != 4)
      throw std::runtime_error("malformed interaction line " +
                               std::to_string(lineno) + ": " + line);
    if (fields[2] != 0 && fields[2] != 1)
      throw std::runtime_error("label must be 0/1 on line " +
                               std::to_string(lineno));
    log.push_back({fields[0], fields[1], static_cast<int>(fields[2]), fields[3]});
  }
  return log;
}

inline std::vector<RawInteraction> read_interactions_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open interactions file: " + path);
  return read_interactions(in);
}

/// Reads `item_id, group_id` membership rows (multi-membership allowed).
inline std::vector<std::pair<std::int64_t, std::int64_t>> read_group_pairs(
    std::istream& in) {
  std::vector<std::pair<std::int64_t, std::int64_t>> pairs;
  std::string line;
  std::vector<std::int64_t> fields;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!detail::parse_log_line(line, &fields) || fields.size() != 2)
      throw std::runtime_error("malformed group line " +
                               std::to_string(lineno) + ": " + line);
    pairs.emplace_back(fields[0], fields[1]);
  }
  return pairs;
}

inline std::vector<std::pair<std::int64_t, std::int64_t>> read_group_pairs_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open group file: " + path);
  return read_group_pairs(in);
}

}  // namespace fairdual
