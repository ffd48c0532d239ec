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
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fairdual/data.hpp"
#include "fairdual/types.hpp"

namespace fairdual {

/// Matrix-factorization backbone: user/item embedding tables plus a frozen
/// item snapshot that only changes at refresh boundaries.
struct EmbeddingModel {
  MatrixRXd user_table;
  MatrixRXd item_table;
  MatrixRXd frozen_item_table;
  double learning_rate = 0.05;
  int beta = 640;  // snapshot refresh interval, in batches

  Index num_users() const { return user_table.rows(); }
  Index num_items() const { return item_table.rows(); }
  Index dim() const { return user_table.cols(); }
};

inline EmbeddingModel make_model(int num_users, int num_items, int dim,
                                 double learning_rate, int beta,
                                 std::mt19937_64& rng) {
  if (num_users <= 0 || num_items <= 0 || dim <= 0)
    throw std::invalid_argument("model dimensions must be positive");
  if (learning_rate <= 0.0)
    throw std::invalid_argument("learning rate must be positive");
  if (beta < 1) throw std::invalid_argument("beta must be >= 1");

  std::normal_distribution<double> init(0.0, 0.1);
  EmbeddingModel model;
  model.user_table = MatrixRXd(num_users, dim);
  model.item_table = MatrixRXd(num_items, dim);
  for (Index r = 0; r < model.user_table.rows(); ++r)
    for (Index c = 0; c < dim; ++c) model.user_table(r, c) = init(rng);
  for (Index r = 0; r < model.item_table.rows(); ++r)
    for (Index c = 0; c < dim; ++c) model.item_table(r, c) = init(rng);
  model.frozen_item_table = model.item_table;
  model.learning_rate = learning_rate;
  model.beta = beta;
  return model;
}

namespace detail {
constexpr double kScoreClamp = 1e-7;
}

/// Predicted preference: logistic of the dot product, clamped away from
/// {0, 1} so the log-loss stays finite.
inline double predict(const EmbeddingModel& model, int user, int item) {
  const double z = model.user_table.row(user).dot(model.item_table.row(item));
  return std::clamp(logistic(z), detail::kScoreClamp,
                    1.0 - detail::kScoreClamp);
}

/**
 * Per-sample cross-entropy losses l_b = -c_b log(c^hat_b) and the weighted
 * total s^T l. With `symmetric` the negative term -(1-c) log(1 - c^hat) is
 * added, which keeps all-positive logs from collapsing onto c^hat = 1.
 */
inline std::pair<double, VectorXd> batch_loss(
    const EmbeddingModel& model, const std::vector<Interaction>& batch,
    const VectorXd& weights, bool symmetric = false) {
  if (weights.size() != static_cast<Index>(batch.size()))
    throw std::invalid_argument("batch_loss: weight count != batch size");
  VectorXd losses(static_cast<Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double p = predict(model, batch[b].user, batch[b].item);
    double l = batch[b].label == 1 ? -std::log(p) : 0.0;
    if (symmetric && batch[b].label == 0) l = -std::log(1.0 - p);
    losses[static_cast<Index>(b)] = l;
  }
  return {weights.dot(losses), losses};
}

/**
 * One SGD step on the weighted loss  sum_b s_b l_b , with the weights held
 * constant (no gradient flows through s). Gradients over duplicate users or
 * items in the batch accumulate before the update is applied.
 */
inline void sgd_step(EmbeddingModel& model,
                     const std::vector<Interaction>& batch,
                     const VectorXd& weights, bool symmetric = false) {
  if (weights.size() != static_cast<Index>(batch.size()))
    throw std::invalid_argument("sgd_step: weight count != batch size");

  std::unordered_map<int, VectorXd> user_grad, item_grad;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Interaction& x = batch[b];
    const double z =
        model.user_table.row(x.user).dot(model.item_table.row(x.item));
    const double sigma = logistic(z);
    // d l / d z for the cross-entropy branches.
    double dz = x.label == 1 ? -(1.0 - sigma) : 0.0;
    if (symmetric && x.label == 0) dz = sigma;
    const double coeff = weights[static_cast<Index>(b)] * dz;
    if (coeff == 0.0) continue;
    if (!std::isfinite(coeff))
      throw std::runtime_error("non-finite gradient in sgd_step");

    auto [uit, unew] = user_grad.try_emplace(x.user, VectorXd());
    if (unew) uit->second = VectorXd::Zero(model.dim());
    uit->second += coeff * model.item_table.row(x.item).transpose();

    auto [iit, inew] = item_grad.try_emplace(x.item, VectorXd());
    if (inew) iit->second = VectorXd::Zero(model.dim());
    iit->second += coeff * model.user_table.row(x.user).transpose();
  }

  for (const auto& [user, grad] : user_grad)
    model.user_table.row(user) -= model.learning_rate * grad.transpose();
  for (const auto& [item, grad] : item_grad)
    model.item_table.row(item) -= model.learning_rate * grad.transpose();
}

/// Copies the item table into the frozen snapshot when the global batch
/// counter hits a refresh boundary (counter % beta == 0, including 0).
inline bool maybe_refresh_snapshot(EmbeddingModel& model, long batch_counter,
                                   int beta) {
  if (beta < 1) throw std::invalid_argument("beta must be >= 1");
  if (batch_counter % beta != 0) return false;
  model.frozen_item_table = model.item_table;
  return true;
}

/// Top-K items by predicted score, ties broken by ascending item id.
inline std::vector<int> rank_items(const EmbeddingModel& model, int user,
                                   int k, bool use_frozen = false) {
  const Index n = model.num_items();
  if (k <= 0 || static_cast<Index>(k) > n)
    throw std::invalid_argument("rank_items: K out of range");
  const MatrixRXd& items = use_frozen ? model.frozen_item_table : model.item_table;
  VectorXd scores = items * model.user_table.row(user).transpose();

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&scores](int a, int b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

// --- checkpointing --------------------------------------------------------
//
// Flat binary layout, little-endian: magic "FDMF", u32 version, u64 rows and
// cols per table, then user/item/frozen tables as row-major f64. Training
// hyperparameters ride in a JSON sidecar next to the binary.

namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

inline void write_table(std::ostream& out, const MatrixRXd& table) {
  out.write(reinterpret_cast<const char*>(table.data()),
            static_cast<std::streamsize>(sizeof(double)) * table.size());
}

inline void read_table(std::istream& in, MatrixRXd& table) {
  in.read(reinterpret_cast<char*>(table.data()),
          static_cast<std::streamsize>(sizeof(double)) * table.size());
}

}  // namespace detail

inline void save_checkpoint(const EmbeddingModel& model,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write("FDMF", 4);
  detail::write_u64(out, 1);  // version
  detail::write_u64(out, static_cast<std::uint64_t>(model.num_users()));
  detail::write_u64(out, static_cast<std::uint64_t>(model.num_items()));
  detail::write_u64(out, static_cast<std::uint64_t>(model.dim()));
  detail::write_table(out, model.user_table);
  detail::write_table(out, model.item_table);
  detail::write_table(out, model.frozen_item_table);
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);

  nlohmann::json sidecar{{"num_users", model.num_users()},
                         {"num_items", model.num_items()},
                         {"dim", model.dim()},
                         {"learning_rate", model.learning_rate},
                         {"beta", model.beta}};
  std::ofstream meta(path + ".json");
  if (!meta) throw std::runtime_error("cannot write sidecar: " + path + ".json");
  meta << sidecar.dump(2) << "\n";
}

inline EmbeddingModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (std::memcmp(magic, "FDMF", 4) != 0)
    throw std::runtime_error("not a model checkpoint: " + path);
  const std::uint64_t version = detail::read_u64(in);
  if (version != 1)
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  const auto users = static_cast<Index>(detail::read_u64(in));
  const auto items = static_cast<Index>(detail::read_u64(in));
  const auto dim = static_cast<Index>(detail::read_u64(in));
  if (users <= 0 || items <= 0 || dim <= 0)
    throw std::runtime_error("corrupt checkpoint header: " + path);

  EmbeddingModel model;
  model.user_table = MatrixRXd(users, dim);
  model.item_table = MatrixRXd(items, dim);
  model.frozen_item_table = MatrixRXd(items, dim);
  detail::read_table(in, model.user_table);
  detail::read_table(in, model.item_table);
  detail::read_table(in, model.frozen_item_table);
  if (!in) throw std::runtime_error("checkpoint truncated: " + path);

  std::ifstream meta(path + ".json");
  if (meta) {
    nlohmann::json sidecar = nlohmann::json::parse(meta, nullptr, false);
    if (!sidecar.is_discarded()) {
      model.learning_rate = sidecar.value("learning_rate", model.learning_rate);
      model.beta = sidecar.value("beta", model.beta);
    }
  }
  return model;
}

}  // namespace fairdual
