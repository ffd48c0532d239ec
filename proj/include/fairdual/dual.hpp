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
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairdual/groups.hpp"
#include "fairdual/types.hpp"

namespace fairdual {

/**
 * State of the dual reweighting loop: dual variable mu (one shadow price per
 * group), momentum-smoothed subgradient, remaining per-group reward budget
 * gamma, and the hyperparameters that shape the mirror step.
 *
 * Feasibility of mu means  sum_g min(mu_g m_g, 0) >= -lambda,  which is the
 * subset-sum constraint family reduced to its single binding member (the
 * subset collecting exactly the negative terms).
 */
struct DualState {
  VectorXd mu;
  VectorXd momentum;
  VectorXd gamma;
  VectorXd m;
  double eta = 1e-3;    // mirror step weight on ||mu' - mu||^2
  double lambda = 2.0;  // fairness trade-off; bounds the negative dual mass
  double alpha = 0.9;   // momentum coefficient on the fresh subgradient
  long step = 0;
};

inline DualState init_dual(const VectorXd& m, double eta, double lambda,
                           double alpha) {
  if (m.size() == 0 || (m.array() <= 0.0).any())
    throw std::invalid_argument("group weights m must be positive");
  if (eta <= 0.0) throw std::invalid_argument("eta must be positive");
  if (lambda < 0.0) throw std::invalid_argument("lambda must be non-negative");
  if (alpha < 0.0 || alpha >= 1.0)
    throw std::invalid_argument("alpha must lie in [0, 1)");
  DualState state;
  state.mu = VectorXd::Zero(m.size());
  state.momentum = VectorXd::Zero(m.size());
  state.gamma = m;
  state.m = m;
  state.eta = eta;
  state.lambda = lambda;
  state.alpha = alpha;
  state.step = 0;
  return state;
}

/// Membership tests the reduced feasibility constraint
///   sum_g min(mu_g m_g, 0) >= -lambda - tol.
inline bool feasible(const VectorXd& mu, const VectorXd& m, double lambda,
                     double tol = 0.0) {
  if (mu.size() != m.size())
    throw std::invalid_argument("feasible: size mismatch");
  double negative_mass = 0.0;
  for (Index g = 0; g < mu.size(); ++g)
    negative_mass += std::min(mu[g] * m[g], 0.0);
  return negative_mass >= -lambda - tol;
}

/**
 * Estimated top-K ranking mass per user against a sample of Q frozen item
 * embeddings: each per-item score is squashed through the logistic into
 * (0, 1) and the K largest are summed, so 0 <= w_b <= K.
 */
inline VectorXd estimate_scores(const MatrixRXd& user_embeddings,
                                const MatrixRXd& frozen_item_sample, int k) {
  const Index q = frozen_item_sample.rows();
  if (k <= 0) throw std::invalid_argument("ranking size K must be positive");
  if (k > q) throw std::invalid_argument("sample too small for ranking size");
  if (user_embeddings.cols() != frozen_item_sample.cols())
    throw std::invalid_argument("embedding dimension mismatch");

  MatrixXd scores = user_embeddings * frozen_item_sample.transpose();
  VectorXd w = VectorXd::Zero(user_embeddings.rows());
  std::vector<double> row(static_cast<std::size_t>(q));
  for (Index b = 0; b < scores.rows(); ++b) {
    for (Index i = 0; i < q; ++i)
      row[static_cast<std::size_t>(i)] = logistic(scores(b, i));
    std::nth_element(row.begin(), row.begin() + (k - 1), row.end(),
                     std::greater<double>());
    double sum = 0.0;
    for (int i = 0; i < k; ++i) sum += row[static_cast<std::size_t>(i)];
    w[b] = sum;
  }
  return w;
}

/// Dual subgradient  -A^T w + gamma  for one batch.
inline VectorXd subgradient(const NormalizedAdjacency& batch_adjacency,
                            const VectorXd& w_tilde, const VectorXd& gamma) {
  if (gamma.size() != batch_adjacency.cols())
    throw std::invalid_argument("subgradient: gamma size mismatch");
  return -batch_adjacency.transpose_apply(w_tilde) + gamma;
}

/// g <- alpha * g_tilde + (1 - alpha) * g_prev; the result replaces the
/// stored momentum.
inline const VectorXd& momentum_update(DualState& state,
                                       const VectorXd& g_tilde) {
  state.momentum = state.alpha * g_tilde + (1.0 - state.alpha) * state.momentum;
  return state.momentum;
}

/// gamma <- gamma - A^T w. No clamping: exhausted budgets go negative and
/// keep feeding the subgradient as-is.
inline const VectorXd& update_reward(DualState& state,
                                     const NormalizedAdjacency& batch_adjacency,
                                     const VectorXd& w_tilde) {
  state.gamma -= batch_adjacency.transpose_apply(w_tilde);
  return state.gamma;
}

/// Per-sample weights  s = 1 - A mu  for one batch slice.
inline VectorXd sample_weights(const NormalizedAdjacency& batch_adjacency,
                               const VectorXd& mu) {
  return VectorXd::Ones(batch_adjacency.rows()) - batch_adjacency.apply(mu);
}

/// Closed form of the conjugate regularizer, r*(mu) = m^T mu / lambda + 1,
/// finite exactly on the feasible set.
inline double dual_regularizer(const VectorXd& mu, const VectorXd& m,
                               double lambda) {
  if (lambda == 0.0)
    throw std::invalid_argument("regularizer undefined for lambda = 0");
  if (mu.size() != m.size())
    throw std::invalid_argument("dual_regularizer: size mismatch");
  return m.dot(mu) / lambda + 1.0;
}

namespace detail {

// Stationary point of the single-constraint KKT system at multiplier theta:
// per coordinate, g_g + 2 eta (x - mu_g) - theta m_g 1{x < 0} = 0 with the
// kink at zero covered by the subdifferential.
inline double kkt_coordinate(double unconstrained, double theta, double m_g,
                             double eta) {
  if (unconstrained >= 0.0) return unconstrained;
  const double shifted = unconstrained + theta * m_g / (2.0 * eta);
  return std::min(shifted, 0.0);
}

inline double negative_mass_at(const VectorXd& unconstrained, double theta,
                               const VectorXd& m, double eta) {
  double mass = 0.0;
  for (Index g = 0; g < unconstrained.size(); ++g) {
    const double x = kkt_coordinate(unconstrained[g], theta, m[g], eta);
    mass += std::min(x * m[g], 0.0);
  }
  return mass;
}

}  // namespace detail

/**
 * Mirror projection step: the unique minimizer over the feasible set of
 *
 *     g^T mu' + eta || mu' - mu ||_2^2 .
 *
 * If the unconstrained minimizer  mu - g / (2 eta)  is feasible it is
 * returned directly. Otherwise the single concave constraint
 * sum_g min(mu'_g m_g, 0) = -lambda is active at the optimum, and the KKT
 * multiplier theta is found by bisection on the constraint residual, with
 * the per-coordinate piecewise-linear stationarity solved in closed form at
 * each theta. Updates state.mu and returns it.
 *
 * Throws if the residual still exceeds tolerance after the iteration cap
 * (which would indicate a broken bracket, not slow convergence).
 */
inline const VectorXd& project_dual(DualState& state,
                                    const VectorXd& g_momentum) {
  static constexpr double kResidualTol = 1e-10;
  static constexpr int kMaxBisectionSteps = 200;

  if (g_momentum.size() != state.mu.size())
    throw std::invalid_argument("project_dual: gradient size mismatch");

  const VectorXd unconstrained = state.mu - g_momentum / (2.0 * state.eta);
  if (feasible(unconstrained, state.m, state.lambda)) {
    state.mu = unconstrained;
    ++state.step;
    return state.mu;
  }

  // The negative mass is non-decreasing in theta and reaches 0 >= -lambda
  // once every negative coordinate has been pushed to its kink.
  double theta_hi = 0.0;
  for (Index g = 0; g < unconstrained.size(); ++g)
    if (unconstrained[g] < 0.0)
      theta_hi = std::max(theta_hi,
                          -2.0 * state.eta * unconstrained[g] / state.m[g]);

  double lo = 0.0, hi = theta_hi;
  for (int iter = 0; iter < kMaxBisectionSteps; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double residual =
        detail::negative_mass_at(unconstrained, mid, state.m, state.eta) +
        state.lambda;
    if (residual >= 0.0) {
      hi = mid;  // keep the feasible end of the bracket
      if (residual <= kResidualTol) break;
    } else {
      lo = mid;
    }
  }
  const double final_residual =
      detail::negative_mass_at(unconstrained, hi, state.m, state.eta) +
      state.lambda;
  if (final_residual < -1e-8)
    throw std::runtime_error(
        "dual projection did not converge; constraint residual " +
        std::to_string(final_residual));

  VectorXd projected(unconstrained.size());
  for (Index g = 0; g < unconstrained.size(); ++g)
    projected[g] =
        detail::kkt_coordinate(unconstrained[g], hi, state.m[g], state.eta);
  state.mu = projected;
  ++state.step;
  return state.mu;
}

/// Snapshot for checkpoint/resume.
inline nlohmann::json to_json(const DualState& state) {
  auto vec = [](const VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  return nlohmann::json{{"mu", vec(state.mu)},
                        {"momentum", vec(state.momentum)},
                        {"gamma", vec(state.gamma)},
                        {"m", vec(state.m)},
                        {"eta", state.eta},
                        {"lambda", state.lambda},
                        {"alpha", state.alpha},
                        {"step", state.step}};
}

inline DualState dual_state_from_json(const nlohmann::json& j) {
  auto vec = [](const nlohmann::json& a) {
    std::vector<double> v = a.get<std::vector<double>>();
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()))
        .eval();
  };
  DualState state;
  state.mu = vec(j.at("mu"));
  state.momentum = vec(j.at("momentum"));
  state.gamma = vec(j.at("gamma"));
  state.m = vec(j.at("m"));
  state.eta = j.at("eta").get<double>();
  state.lambda = j.at("lambda").get<double>();
  state.alpha = j.at("alpha").get<double>();
  state.step = j.at("step").get<long>();
  return state;
}

}  // namespace fairdual
