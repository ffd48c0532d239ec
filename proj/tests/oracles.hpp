// Test-only oracles, written as independent reference computations: plain
// loops, explicit enumerations and dense grids, deliberately sharing no code
// path with the library implementations they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Eigen::VectorXd;

/// Explicit enumeration of every subset-sum constraint
///   sum_{g in S} mu_g m_g >= -lambda  for all S.
inline bool powerset_feasible(const VectorXd& mu, const VectorXd& m,
                              double lambda) {
  const int n = static_cast<int>(mu.size());
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    double sum = 0.0;
    for (int g = 0; g < n; ++g)
      if (mask & (1ULL << g)) sum += mu[g] * m[g];
    if (sum < -lambda) return false;
  }
  return true;
}

struct GridSolution {
  VectorXd x;
  double objective = std::numeric_limits<double>::infinity();
};

/**
 * Dense-grid + local-refinement minimizer of
 *     g^T x + eta ||x - mu||^2
 * over the subset-sum feasible set (checked by power-set enumeration).
 *
 * The objective equals eta ||x - a||^2 + const with a = mu - g/(2 eta), so
 * the constrained optimum is the Euclidean projection of a onto the set and
 * lies within ||mu - a|| of a; the initial box covers that ball. Each round
 * lays a uniform grid over the box, keeps the best feasible point (grid
 * points with negative coordinates zeroed are also tried, which always
 * yields at least one feasible candidate), then shrinks the box around it.
 */
inline GridSolution grid_project(const VectorXd& g_vec, const VectorXd& mu,
                                 const VectorXd& m, double lambda, double eta,
                                 int points_per_dim = 9, int rounds = 14) {
  const int n = static_cast<int>(mu.size());
  const VectorXd a = mu - g_vec / (2.0 * eta);
  const double radius = (mu - a).norm() + 1e-6;

  auto objective = [&](const VectorXd& x) {
    return g_vec.dot(x) + eta * (x - mu).squaredNorm();
  };

  GridSolution best;
  best.x = mu;  // feasible by assumption
  best.objective = objective(mu);

  VectorXd lo = a.array() - radius;
  VectorXd hi = a.array() + radius;

  for (int round = 0; round < rounds; ++round) {
    VectorXd step(n);
    for (int d = 0; d < n; ++d)
      step[d] = (hi[d] - lo[d]) / (points_per_dim - 1);

    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    bool done = false;
    while (!done) {
      VectorXd x(n);
      for (int d = 0; d < n; ++d)
        x[d] = lo[d] + step[d] * idx[static_cast<std::size_t>(d)];
      for (int variant = 0; variant < 2; ++variant) {
        VectorXd candidate = x;
        if (variant == 1)
          candidate = candidate.array().max(0.0);  // always feasible
        if (powerset_feasible(candidate, m, lambda)) {
          const double val = objective(candidate);
          if (val < best.objective) {
            best.objective = val;
            best.x = candidate;
          }
        }
      }
      int d = 0;
      while (d < n) {
        if (++idx[static_cast<std::size_t>(d)] < points_per_dim) break;
        idx[static_cast<std::size_t>(d)] = 0;
        ++d;
      }
      done = d == n;
    }

    for (int d = 0; d < n; ++d) {
      const double margin = 1.5 * step[d];
      lo[d] = best.x[d] - margin;
      hi[d] = best.x[d] + margin;
    }
  }
  return best;
}

/// Brute-force value of  max_{x <= m}  min_g x_g / m_g + mu^T x / lambda
/// over a grid with x_g in [m_g - box_width, m_g].
inline double regularizer_bruteforce(const VectorXd& mu, const VectorXd& m,
                                     double lambda, double box_width,
                                     int points_per_dim) {
  const int n = static_cast<int>(mu.size());
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  double best = -std::numeric_limits<double>::infinity();
  bool done = false;
  while (!done) {
    VectorXd x(n);
    for (int d = 0; d < n; ++d)
      x[d] = m[d] - box_width +
             box_width * idx[static_cast<std::size_t>(d)] / (points_per_dim - 1);
    double value = std::numeric_limits<double>::infinity();
    for (int d = 0; d < n; ++d) value = std::min(value, x[d] / m[d]);
    value += mu.dot(x) / lambda;
    best = std::max(best, value);
    int d = 0;
    while (d < n) {
      if (++idx[static_cast<std::size_t>(d)] < points_per_dim) break;
      idx[static_cast<std::size_t>(d)] = 0;
      ++d;
    }
    done = d == n;
  }
  return best;
}

/// Sum of the K largest logistic scores of one user row against a sample,
/// via a full sort.
inline double topk_mass_fullsort(const VectorXd& user, const Eigen::MatrixXd& sample,
                                 int k) {
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(sample.rows()));
  for (Eigen::Index q = 0; q < sample.rows(); ++q)
    scores.push_back(1.0 / (1.0 + std::exp(-sample.row(q).dot(user))));
  std::sort(scores.begin(), scores.end(), std::greater<double>());
  double sum = 0.0;
  for (int i = 0; i < k; ++i) sum += scores[static_cast<std::size_t>(i)];
  return sum;
}

/// Spearman rank correlation with average ranks on ties.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(x), ry = ranks(y);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double cov = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (rx[i] - mx) * (ry[i] - my);
    vx += (rx[i] - mx) * (rx[i] - mx);
    vy += (ry[i] - my) * (ry[i] - my);
  }
  if (vx == 0.0 || vy == 0.0) return 0.0;
  return cov / std::sqrt(vx * vy);
}

}  // namespace oracle
