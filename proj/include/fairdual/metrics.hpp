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
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "fairdual/groups.hpp"
#include "fairdual/model.hpp"
#include "fairdual/types.hpp"

namespace fairdual {

// rankings[u] is the ranked item list of evaluated user u (at least K long);
// ground_truth[u] the positive items of the same user in the eval split.
using Rankings = std::vector<std::vector<int>>;
using GroundTruth = std::vector<std::vector<int>>;

/**
 * Binary-relevance NDCG@K: DCG sums 1/log2(p+1) over hit positions p <= K,
 * normalized by the ideal DCG for the user's positive count, averaged over
 * users with at least one positive. Users without positives are skipped;
 * no evaluable user yields the not-available marker (nullopt).
 */
inline std::optional<double> ndcg_at_k(const Rankings& rankings,
                                       const GroundTruth& ground_truth, int k) {
  if (k <= 0) throw std::invalid_argument("K must be positive");
  if (rankings.size() != ground_truth.size())
    throw std::invalid_argument("rankings/ground truth size mismatch");
  double total = 0.0;
  std::size_t evaluated = 0;
  for (std::size_t u = 0; u < rankings.size(); ++u) {
    if (ground_truth[u].empty()) continue;
    std::unordered_set<int> positives(ground_truth[u].begin(),
                                      ground_truth[u].end());
    double dcg = 0.0;
    const int depth = std::min<int>(k, static_cast<int>(rankings[u].size()));
    for (int p = 0; p < depth; ++p)
      if (positives.count(rankings[u][static_cast<std::size_t>(p)]))
        dcg += 1.0 / std::log2(p + 2.0);
    double ideal = 0.0;
    const int ideal_depth = std::min<int>(k, static_cast<int>(positives.size()));
    for (int p = 0; p < ideal_depth; ++p) ideal += 1.0 / std::log2(p + 2.0);
    total += dcg / ideal;
    ++evaluated;
  }
  if (evaluated == 0) return std::nullopt;
  return total / static_cast<double>(evaluated);
}

/// MRR@K: mean reciprocal rank of the first hit within the top K, 0 when a
/// user has no hit there.
inline std::optional<double> mrr_at_k(const Rankings& rankings,
                                      const GroundTruth& ground_truth, int k) {
  if (k <= 0) throw std::invalid_argument("K must be positive");
  if (rankings.size() != ground_truth.size())
    throw std::invalid_argument("rankings/ground truth size mismatch");
  double total = 0.0;
  std::size_t evaluated = 0;
  for (std::size_t u = 0; u < rankings.size(); ++u) {
    if (ground_truth[u].empty()) continue;
    std::unordered_set<int> positives(ground_truth[u].begin(),
                                      ground_truth[u].end());
    const int depth = std::min<int>(k, static_cast<int>(rankings[u].size()));
    for (int p = 0; p < depth; ++p)
      if (positives.count(rankings[u][static_cast<std::size_t>(p)])) {
        total += 1.0 / (p + 1.0);
        break;
      }
    ++evaluated;
  }
  if (evaluated == 0) return std::nullopt;
  return total / static_cast<double>(evaluated);
}

/// Per-group exposure within the top K, each ranked item contributing 1/n_i
/// to each of its groups, normalized by the group weights m_g.
inline VectorXd group_utilities(const Rankings& rankings,
                                const GroupCatalog& catalog, int k) {
  if (k <= 0) throw std::invalid_argument("K must be positive");
  VectorXd utilities = VectorXd::Zero(catalog.num_groups);
  for (const auto& ranking : rankings) {
    const int depth = std::min<int>(k, static_cast<int>(ranking.size()));
    for (int p = 0; p < depth; ++p) {
      const int item = ranking[static_cast<std::size_t>(p)];
      const auto& groups = catalog.memberships[static_cast<std::size_t>(item)];
      for (int g : groups)
        utilities[g] += 1.0 / static_cast<double>(groups.size());
    }
  }
  return utilities.cwiseQuotient(catalog.m);
}

/// Share of total normalized utility held by the ceil(0.2 |G|) worst-off
/// groups. All-zero utilities count as 0.
inline double mmf_from_utilities(const VectorXd& normalized_utilities) {
  const Index n = normalized_utilities.size();
  if (n < 1) throw std::invalid_argument("need at least one group");
  const double total = normalized_utilities.sum();
  if (total <= 0.0) return 0.0;
  const Index bottom = std::max<Index>(
      1, static_cast<Index>(std::ceil(0.2 * static_cast<double>(n))));
  std::vector<double> sorted(normalized_utilities.data(),
                             normalized_utilities.data() + n);
  std::sort(sorted.begin(), sorted.end());
  double worst = 0.0;
  for (Index g = 0; g < bottom; ++g) worst += sorted[static_cast<std::size_t>(g)];
  return worst / total;
}

inline double mmf_at_k(const Rankings& rankings, const GroupCatalog& catalog,
                       int k) {
  return mmf_from_utilities(group_utilities(rankings, catalog, k));
}

/// Gini coefficient by the mean-absolute-difference formula; 0 for all-zero
/// utilities by convention.
inline double gini_from_utilities(const VectorXd& utilities) {
  const Index n = utilities.size();
  if (n < 2) throw std::invalid_argument("Gini needs at least two groups");
  const double total = utilities.sum();
  if (total <= 0.0) return 0.0;
  double differences = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      differences += std::abs(utilities[i] - utilities[j]);
  return differences / (2.0 * static_cast<double>(n) * total);
}

inline double gini_at_k(const Rankings& rankings, const GroupCatalog& catalog,
                        int k) {
  return gini_from_utilities(group_utilities(rankings, catalog, k));
}

/// J(B) = |L^B - L|.
inline double jensen_gap(double full_loss, double minibatch_loss) {
  return std::abs(full_loss - minibatch_loss);
}

/// Metric families per ranking size K; nullopt marks a metric that was not
/// available (empty evaluation split, or Gini with a single group).
struct MetricsReport {
  std::map<int, std::optional<double>> ndcg, mrr, mmf, gini;
  std::optional<double> jensen = std::nullopt;
};

/**
 * Ranks the full item catalog for every user with at least one positive in
 * `eval_part` and assembles NDCG/MRR/MMF/Gini at each requested K. Users
 * without positives are skipped; an empty evaluation split produces a
 * report full of not-available markers.
 */
inline MetricsReport evaluate_model(const EmbeddingModel& model,
                                    const std::vector<Interaction>& eval_part,
                                    const GroupCatalog& catalog,
                                    const std::vector<int>& ks) {
  std::map<int, std::vector<int>> truth_by_user;
  for (const auto& x : eval_part)
    if (x.label == 1) truth_by_user[x.user].push_back(x.item);

  const int max_k = std::min<int>(
      static_cast<int>(model.num_items()),
      *std::max_element(ks.begin(), ks.end()));
  Rankings rankings;
  GroundTruth truth;
  for (const auto& [user, positives] : truth_by_user) {
    rankings.push_back(rank_items(model, user, max_k));
    truth.push_back(positives);
  }

  MetricsReport report;
  for (int k : ks) {
    const int depth = std::min<int>(k, static_cast<int>(model.num_items()));
    report.ndcg[k] = ndcg_at_k(rankings, truth, depth);
    report.mrr[k] = mrr_at_k(rankings, truth, depth);
    report.mmf[k] = rankings.empty()
                        ? std::nullopt
                        : std::optional(mmf_at_k(rankings, catalog, depth));
    report.gini[k] = rankings.empty() || catalog.num_groups < 2
                         ? std::nullopt
                         : std::optional(gini_at_k(rankings, catalog, depth));
  }
  return report;
}

inline std::string format_metric(const std::optional<double>& value) {
  if (!value.has_value()) return "NA";
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", *value);
  return buffer;
}

/// One CSV row per K: `k,ndcg,mrr,mmf,gini`, not-available as NA.
inline void write_metrics_csv(std::ostream& out, const MetricsReport& report,
                              const std::string& row_prefix = "",
                              bool header = true,
                              const std::string& header_prefix = "") {
  if (header) out << header_prefix << "k,ndcg,mrr,mmf,gini\n";
  for (const auto& [k, ndcg] : report.ndcg) {
    auto get = [&k](const std::map<int, std::optional<double>>& m) {
      auto it = m.find(k);
      return it == m.end() ? std::nullopt : it->second;
    };
    out << row_prefix << k << ',' << format_metric(ndcg) << ','
        << format_metric(get(report.mrr)) << ',' << format_metric(get(report.mmf))
        << ',' << format_metric(get(report.gini)) << '\n';
  }
}

inline nlohmann::json to_json(const MetricsReport& report) {
  auto family = [](const std::map<int, std::optional<double>>& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : m) {
      if (v.has_value())
        j[std::to_string(k)] = *v;
      else
        j[std::to_string(k)] = nullptr;
    }
    return j;
  };
  nlohmann::json j{{"ndcg", family(report.ndcg)},
                   {"mrr", family(report.mrr)},
                   {"mmf", family(report.mmf)},
                   {"gini", family(report.gini)}};
  if (report.jensen.has_value()) j["jensen_gap"] = *report.jensen;
  return j;
}

}  // namespace fairdual
