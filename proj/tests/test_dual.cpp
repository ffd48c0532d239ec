#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fairdual/dual.hpp"
#include "oracles.hpp"

using namespace fairdual;

namespace {

VectorXd vec(std::initializer_list<double> values) {
  VectorXd v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

NormalizedAdjacency adjacency_from_rows(const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<std::pair<int, double>>> sparse;
  for (const auto& row : rows) {
    std::vector<std::pair<int, double>> entries;
    for (std::size_t g = 0; g < row.size(); ++g)
      if (row[g] != 0.0) entries.emplace_back(static_cast<int>(g), row[g]);
    sparse.push_back(std::move(entries));
  }
  return NormalizedAdjacency(std::move(sparse),
                             static_cast<Index>(rows.empty() ? 0 : rows[0].size()));
}

}  // namespace

TEST_CASE("init_dual initialization contract") {
  auto state = init_dual(vec({5, 3}), 0.1, 1.0, 0.9);
  CHECK(state.mu == VectorXd::Zero(2));
  CHECK(state.momentum == VectorXd::Zero(2));
  CHECK(state.gamma == vec({5, 3}));
  CHECK(state.step == 0);
  CHECK(feasible(state.mu, state.m, state.lambda));  // mu = 0 always feasible

  CHECK_THROWS_AS(init_dual(vec({5, 3}), 0.1, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(init_dual(vec({5, 3}), 0.0, 1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(init_dual(vec({5, 3}), 0.1, -1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(init_dual(vec({5, -3}), 0.1, 1.0, 0.5), std::invalid_argument);
}

TEST_CASE("estimate_scores: uniform scores sum to K/2 per item") {
  // orthogonal user/item embeddings -> zero dots -> logistic = 0.5 each
  MatrixRXd users = MatrixRXd::Zero(2, 4);
  MatrixRXd sample = MatrixRXd::Random(5, 4);
  VectorXd w = estimate_scores(users, sample, 3);
  CHECK(w[0] == doctest::Approx(1.5));
  CHECK(w[1] == doctest::Approx(1.5));
}

TEST_CASE("estimate_scores: K = Q sums everything, K > Q rejected") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixRXd users(3, 6), sample(8, 6);
  for (Index r = 0; r < users.rows(); ++r)
    for (Index c = 0; c < users.cols(); ++c) users(r, c) = normal(rng);
  for (Index r = 0; r < sample.rows(); ++r)
    for (Index c = 0; c < sample.cols(); ++c) sample(r, c) = normal(rng);

  VectorXd w = estimate_scores(users, sample, 8);
  for (Index b = 0; b < 3; ++b) {
    double all = 0.0;
    for (Index q = 0; q < 8; ++q)
      all += logistic(sample.row(q).dot(users.row(b)));
    CHECK(w[b] == doctest::Approx(all));
  }
  CHECK_THROWS_WITH_AS(estimate_scores(users, sample, 9),
                       "sample too small for ranking size",
                       std::invalid_argument);
}

TEST_CASE("estimate_scores matches full-sort oracle and stays within [0, K]") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int q = 200, k = 5, d = 8;
    MatrixRXd users(4, d), sample(q, d);
    for (Index r = 0; r < users.rows(); ++r)
      for (Index c = 0; c < d; ++c) users(r, c) = normal(rng);
    for (Index r = 0; r < sample.rows(); ++r)
      for (Index c = 0; c < d; ++c) sample(r, c) = normal(rng);
    VectorXd w = estimate_scores(users, sample, k);
    for (Index b = 0; b < users.rows(); ++b) {
      CHECK(w[b] ==
            doctest::Approx(oracle::topk_mass_fullsort(users.row(b), MatrixXd(sample), k)));
      CHECK(w[b] >= 0.0);
      CHECK(w[b] <= k);
    }
  }
}

TEST_CASE("subgradient trivial and aggregation cases") {
  auto adj = adjacency_from_rows({{1, 0}, {1, 0}, {0, 1}});
  CHECK(subgradient(adj, VectorXd::Zero(3), vec({4, 7})) == vec({4, 7}));
  // one-hot rows, w = 1, gamma = 0: minus the per-group batch counts
  CHECK(subgradient(adj, VectorXd::Ones(3), VectorXd::Zero(2)) == vec({-2, -1}));
}

TEST_CASE("subgradient matches naive double loop on random inputs") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(0.0, 2.0);
  std::uniform_int_distribution<int> group(0, 3);
  for (int trial = 0; trial < 30; ++trial) {
    const int B = 12, G = 4;
    std::vector<std::vector<double>> rows(B, std::vector<double>(G, 0.0));
    for (auto& row : rows) {
      const int n_memberships = 1 + group(rng) % 3;
      std::vector<int> gs;
      while (static_cast<int>(gs.size()) < n_memberships) {
        int g = group(rng);
        if (std::find(gs.begin(), gs.end(), g) == gs.end()) gs.push_back(g);
      }
      for (int g : gs) row[static_cast<std::size_t>(g)] = 1.0 / n_memberships;
    }
    VectorXd w(B), gamma(G);
    for (Index b = 0; b < B; ++b) w[b] = unif(rng);
    for (Index g = 0; g < G; ++g) gamma[g] = unif(rng);

    VectorXd got = subgradient(adjacency_from_rows(rows), w, gamma);
    for (int g = 0; g < G; ++g) {
      double agg = 0.0;
      for (int b = 0; b < B; ++b)
        agg += rows[static_cast<std::size_t>(b)][static_cast<std::size_t>(g)] * w[b];
      CHECK(got[g] == doctest::Approx(-agg + gamma[g]));
    }
  }
}

TEST_CASE("momentum update blends and stores") {
  auto state = init_dual(vec({1, 1}), 0.1, 1.0, 0.25);
  // first batch: previous momentum is zero
  VectorXd g1 = momentum_update(state, vec({4, -8}));
  CHECK(g1 == vec({1, -2}));
  VectorXd g2 = momentum_update(state, vec({0, 0}));
  CHECK(g2 == vec({0.75, -1.5}));

  auto frozen = init_dual(vec({1, 1}), 0.1, 1.0, 0.0);
  momentum_update(frozen, vec({5, 5}));
  CHECK(frozen.momentum == VectorXd::Zero(2));  // alpha = 0 never moves
}

TEST_CASE("reward update decrements by aggregated mass, no clamping") {
  auto adj = adjacency_from_rows({{1, 0}, {0, 1}});
  auto state = init_dual(vec({2, 1}), 0.1, 1.0, 0.9);
  update_reward(state, adj, VectorXd::Zero(2));
  CHECK(state.gamma == vec({2, 1}));

  update_reward(state, adj, vec({2, 0}));
  CHECK(state.gamma == vec({0, 1}));

  // two sequential updates equal one combined update (linearity)
  auto a = init_dual(vec({2, 1}), 0.1, 1.0, 0.9);
  update_reward(a, adj, vec({0.5, 0.25}));
  update_reward(a, adj, vec({0.75, 1.0}));
  auto b = init_dual(vec({2, 1}), 0.1, 1.0, 0.9);
  update_reward(b, adj, vec({1.25, 1.25}));
  CHECK(a.gamma.isApprox(b.gamma));
  CHECK(a.gamma[1] < 0.0);  // may go negative
}

TEST_CASE("sample weights from mu") {
  auto adj = adjacency_from_rows({{1, 0}, {0.5, 0.5}});
  CHECK(sample_weights(adj, VectorXd::Zero(2)) == VectorXd::Ones(2));
  VectorXd s = sample_weights(adj, vec({0.2, -0.4}));
  CHECK(s[0] == doctest::Approx(0.8));
  CHECK(s[1] == doctest::Approx(1.1));
  // row-stochastic rows with equal mu: s = 1 - c
  auto full = adjacency_from_rows({{0.25, 0.25, 0.25, 0.25}});
  CHECK(sample_weights(full, VectorXd::Constant(4, 0.3))[0] == doctest::Approx(0.7));
}

TEST_CASE("feasible: sign structure and boundary") {
  CHECK(feasible(vec({0.5, 2.0}), vec({1, 1}), 0.0));  // no negative terms
  const double lambda = 0.75;
  CHECK(feasible(vec({-lambda, 1.0}), vec({1, 1}), lambda));
  CHECK_FALSE(feasible(vec({-lambda - 0.001, 1.0}), vec({1, 1}), lambda));
}

TEST_CASE("feasible agrees with power-set enumeration") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> mu_dist(-1.5, 1.5);
  std::uniform_real_distribution<double> m_dist(0.5, 5.0);
  std::uniform_int_distribution<int> g_dist(2, 12);
  const double lambdas[] = {0.0, 0.1, 1.0, 10.0};
  for (int trial = 0; trial < 200; ++trial) {
    const int G = g_dist(rng);
    VectorXd mu(G), m(G);
    for (Index g = 0; g < G; ++g) {
      mu[g] = mu_dist(rng);
      m[g] = m_dist(rng);
    }
    for (double lambda : lambdas)
      CHECK(feasible(mu, m, lambda) == oracle::powerset_feasible(mu, m, lambda));
  }
}

TEST_CASE("feasible set is convex: midpoints of feasible pairs are feasible") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> mu_dist(-2.0, 2.0);
  std::uniform_real_distribution<double> m_dist(0.5, 4.0);
  int found = 0;
  while (found < 200) {
    const int G = 4;
    VectorXd a(G), b(G), m(G);
    for (Index g = 0; g < G; ++g) {
      a[g] = mu_dist(rng);
      b[g] = mu_dist(rng);
      m[g] = m_dist(rng);
    }
    const double lambda = 1.0;
    if (!feasible(a, m, lambda) || !feasible(b, m, lambda)) continue;
    ++found;
    CHECK(feasible(0.5 * (a + b), m, lambda, 1e-12));
  }
}

TEST_CASE("dual_regularizer closed form") {
  CHECK(dual_regularizer(VectorXd::Zero(3), vec({1, 2, 3}), 2.0) == 1.0);
  CHECK(dual_regularizer(vec({0.5, 0.1}), vec({2, 3}), 1.0) ==
        doctest::Approx(2.3));
  CHECK_THROWS_AS(dual_regularizer(vec({0.5}), vec({2}), 0.0),
                  std::invalid_argument);
}

TEST_CASE("dual_regularizer agrees with discretized maximization when feasible") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> mu_dist(-0.4, 0.8);
  std::uniform_real_distribution<double> m_dist(0.8, 2.5);
  const double lambda = 1.0;
  int found = 0;
  while (found < 25) {
    const int G = 2;
    VectorXd mu(G), m(G);
    for (Index g = 0; g < G; ++g) {
      mu[g] = mu_dist(rng);
      m[g] = m_dist(rng);
    }
    if (!feasible(mu, m, lambda)) continue;
    ++found;
    const double box = 3.0;
    const int pts = 61;
    const double grid_step = box / (pts - 1);
    const double brute = oracle::regularizer_bruteforce(mu, m, lambda, box, pts);
    const double closed = dual_regularizer(mu, m, lambda);
    CHECK(std::abs(brute - closed) <= 2.0 * grid_step);
  }
}

TEST_CASE("dual_regularizer brute force diverges for infeasible mu") {
  // single strongly negative coordinate: mu_0 m_0 < -lambda
  VectorXd mu = vec({-2.0, 0.1});
  VectorXd m = vec({1.0, 1.0});
  const double lambda = 1.0;
  REQUIRE_FALSE(feasible(mu, m, lambda));
  double prev = -1e300;
  for (double box : {2.0, 4.0, 8.0}) {
    const double value = oracle::regularizer_bruteforce(mu, m, lambda, box, 41);
    CHECK(value > prev);
    prev = value;
  }
  CHECK(prev > dual_regularizer(vec({0.0, 0.1}), m, lambda) + 1.0);
}

TEST_CASE("projection: unconstrained minimizer returned when feasible") {
  auto state = init_dual(vec({1, 1}), 0.5, 10.0, 0.9);
  state.mu = vec({0.3, -0.2});
  VectorXd g = vec({0.4, -0.6});
  VectorXd expected = state.mu - g / (2.0 * 0.5);
  CHECK(project_dual(state, g).isApprox(expected, 1e-12));

  // zero gradient is a fixed point
  auto fixed = init_dual(vec({1, 1}), 0.5, 1.0, 0.9);
  fixed.mu = vec({0.25, -0.5});
  CHECK(project_dual(fixed, VectorXd::Zero(2)).isApprox(vec({0.25, -0.5}), 1e-12));
}

TEST_CASE("projection matches grid oracle and stays feasible") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> g_dist(-2.0, 2.0);
  std::uniform_real_distribution<double> m_dist(0.5, 5.0);
  std::uniform_int_distribution<int> G_dist(2, 3);
  for (int trial = 0; trial < 25; ++trial) {
    const int G = G_dist(rng);
    VectorXd m(G), g(G);
    for (Index i = 0; i < G; ++i) {
      m[i] = m_dist(rng);
      g[i] = g_dist(rng);
    }
    const double lambda = trial % 2 == 0 ? 0.5 : 0.1;
    const double eta = 0.1;
    auto state = init_dual(m, eta, lambda, 0.9);

    // walk a few projections so mu is a generic feasible point
    for (int step = 0; step < 3; ++step) {
      VectorXd direction(G);
      for (Index i = 0; i < G; ++i) direction[i] = g_dist(rng);
      VectorXd mu_prev = state.mu;
      const VectorXd& mu = project_dual(state, direction);
      CHECK(feasible(mu, m, lambda, 1e-8));

      auto grid = oracle::grid_project(direction, mu_prev, m, lambda, eta);
      const double got = direction.dot(mu) + eta * (mu - mu_prev).squaredNorm();
      CHECK(got <= grid.objective + 1e-4);
      // no worse than staying put
      CHECK(got <= direction.dot(mu_prev) + 1e-12);
    }
  }
}

TEST_CASE("dual state JSON snapshot round-trips") {
  auto state = init_dual(vec({2, 3}), 0.05, 1.5, 0.8);
  state.mu = vec({0.1, -0.2});
  state.momentum = vec({1.0, -1.0});
  state.gamma = vec({0.5, 2.5});
  state.step = 42;
  auto restored = dual_state_from_json(to_json(state));
  CHECK(restored.mu == state.mu);
  CHECK(restored.momentum == state.momentum);
  CHECK(restored.gamma == state.gamma);
  CHECK(restored.m == state.m);
  CHECK(restored.eta == state.eta);
  CHECK(restored.lambda == state.lambda);
  CHECK(restored.alpha == state.alpha);
  CHECK(restored.step == state.step);
}
