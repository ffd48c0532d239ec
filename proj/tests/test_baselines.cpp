#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fairdual/baselines.hpp"

using namespace fairdual;

namespace {

VectorXd vec(std::initializer_list<double> values) {
  VectorXd v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

std::vector<Interaction> batch_of_items(std::initializer_list<int> items) {
  std::vector<Interaction> batch;
  int b = 0;
  for (int item : items) batch.push_back({b++, item, 1, 0});
  return batch;
}

}  // namespace

TEST_CASE("strategy names round-trip") {
  for (Strategy s : {Strategy::kUni, Strategy::kDro, Strategy::kSdro,
                     Strategy::kProp, Strategy::kIfairlrs,
                     Strategy::kMaxminSample, Strategy::kFairdual})
    CHECK(parse_strategy(to_string(s)) == s);
  CHECK(parse_strategy("S-DRO") == Strategy::kSdro);
  CHECK_THROWS_AS(parse_strategy("nope"), std::invalid_argument);
}

TEST_CASE("uni weights are all ones, composition is the unweighted sum") {
  CHECK(uni_weights(5) == VectorXd::Ones(5));
  CHECK(uni_weights(0).size() == 0);

  std::mt19937_64 rng(1);
  auto model = make_model(3, 4, 4, 0.1, 10, rng);
  auto batch = batch_of_items({0, 1, 2});
  auto [total, each] = batch_loss(model, batch, uni_weights(3));
  CHECK(total == doctest::Approx(each.sum()));
}

TEST_CASE("dro selects the argmax running-loss group") {
  auto catalog = make_catalog({{0, 0}, {1, 1}, {2, 0}, {3, 1}}, 4);
  auto batch = batch_of_items({0, 1, 2, 3});
  VectorXd w = dro_weights(batch, catalog, vec({5.0, 1.0}));
  CHECK(w == vec({1, 0, 1, 0}));

  // no items from the worst group: the step is a no-op
  auto tail_only = batch_of_items({1, 3});
  CHECK(dro_weights(tail_only, catalog, vec({5.0, 1.0})) == VectorXd::Zero(2));

  // one group degenerates to UNI
  auto single = make_catalog({{0, 0}, {1, 0}}, 2);
  CHECK(dro_weights(batch_of_items({0, 1}), single, vec({3.0})) ==
        VectorXd::Ones(2));
}

TEST_CASE("sdro interpolates between UNI and DRO") {
  auto catalog = make_catalog({{0, 0}, {1, 1}}, 2);
  auto adjacency = build_adjacency(catalog);
  std::vector<int> items{0, 1, 1};
  auto slice = batch_slice(adjacency, items);

  // equal running losses -> uniform
  CHECK(sdro_weights(slice, vec({2.0, 2.0}), 1.0).isApprox(VectorXd::Ones(3)));

  // huge temperature -> UNI
  CHECK(sdro_weights(slice, vec({9.0, 1.0}), 1e9).isApprox(VectorXd::Ones(3), 1e-6));

  // tiny temperature -> mass concentrates on the worst group's samples
  VectorXd hard = sdro_weights(slice, vec({9.0, 1.0}), 1e-3);
  CHECK(hard[0] > 1.0);
  CHECK(hard[1] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(hard[2] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(hard.mean() == doctest::Approx(1.0));

  CHECK_THROWS_AS(sdro_weights(slice, vec({1.0, 1.0}), 0.0), std::invalid_argument);
}

TEST_CASE("prop weights peak at the decision boundary") {
  std::mt19937_64 rng(2);
  auto model = make_model(3, 3, 2, 0.1, 10, rng);
  model.user_table.setZero();  // all predictions exactly 0.5
  auto batch = batch_of_items({0, 1, 2});
  CHECK(prop_weights(model, batch).isApprox(VectorXd::Ones(3)));

  // saturated predictions get zero raw weight; constant batches normalize to 1
  model.user_table.setConstant(100.0);
  model.item_table.setConstant(100.0);
  CHECK(prop_weights(model, batch).isApprox(VectorXd::Ones(3)));

  // mixed: near-boundary sample dominates
  model.user_table.setZero();
  model.user_table.row(0).setConstant(100.0);
  model.item_table.row(0).setConstant(100.0);
  VectorXd w = prop_weights(model, batch);
  CHECK(w[0] < w[1]);
  CHECK(w.mean() == doctest::Approx(1.0));
}

TEST_CASE("ifairlrs: reciprocal popularity with membership averaging") {
  auto catalog = make_catalog({{0, 0}, {1, 1}, {2, 0}, {2, 1}}, 3);
  // train: item 0 ten times (group 0), item 1 once (group 1)
  std::vector<Interaction> train;
  for (int i = 0; i < 10; ++i) train.push_back({0, 0, 1, i});
  train.push_back({0, 1, 1, 10});

  VectorXd item_w = ifairlrs_item_weights(train, catalog);
  // raw group weights (0.1, 1); item 2 straddles both -> 0.55 before scaling
  CHECK(item_w[2] / item_w[0] == doctest::Approx(5.5));
  CHECK(item_w[1] / item_w[0] == doctest::Approx(10.0));
  // mean over the train split is one
  double mean = 0.0;
  for (const auto& x : train) mean += item_w[x.item];
  CHECK(mean / static_cast<double>(train.size()) == doctest::Approx(1.0));

  // equal popularity -> UNI
  auto equal_catalog = make_catalog({{0, 0}, {1, 1}}, 2);
  std::vector<Interaction> balanced{{0, 0, 1, 0}, {0, 1, 1, 1}};
  CHECK(ifairlrs_item_weights(balanced, equal_catalog).isApprox(VectorXd::Ones(2)));

  // zero-popularity group takes the max observed weight
  auto three = make_catalog({{0, 0}, {1, 1}, {2, 2}}, 3);
  std::vector<Interaction> skewed{{0, 0, 1, 0}, {0, 0, 1, 1}, {0, 1, 1, 2}};
  VectorXd w3 = ifairlrs_item_weights(skewed, three);
  CHECK(w3[2] == doctest::Approx(w3[1]));  // orphan-popularity group == max

  auto gathered = gather_item_weights(item_w, batch_of_items({2, 0}));
  CHECK(gathered[0] == item_w[2]);
  CHECK(gathered[1] == item_w[0]);
}

TEST_CASE("group loss tracker: EMA over present groups only") {
  auto catalog = make_catalog({{0, 0}, {1, 1}}, 2);
  auto adjacency = build_adjacency(catalog);
  GroupLossTracker tracker(2);

  std::vector<int> only_first{0, 0};
  tracker.update(batch_slice(adjacency, only_first), vec({4.0, 2.0}));
  CHECK(tracker.ema[0] == doctest::Approx(0.1 * 3.0));
  CHECK(tracker.ema[1] == 0.0);  // untouched

  std::vector<int> both{0, 1};
  tracker.update(batch_slice(adjacency, both), vec({1.0, 5.0}));
  CHECK(tracker.ema[0] == doctest::Approx(0.9 * 0.3 + 0.1 * 1.0));
  CHECK(tracker.ema[1] == doctest::Approx(0.1 * 5.0));
}

TEST_CASE("maxmin sampling follows the softmax target distribution") {
  auto catalog = make_catalog({{0, 0}, {1, 1}, {2, 2}}, 3);
  std::vector<Interaction> pool{{0, 0, 1, 0}, {0, 1, 1, 1}, {0, 2, 1, 2}};
  GroupedPool grouped(pool, catalog);

  // equal losses: uniform over groups
  std::mt19937_64 rng(3);
  VectorXd losses = vec({1.0, 1.0, 1.0});
  const int draws = 10000;
  VectorXd counts = VectorXd::Zero(3);
  for (int i = 0; i < draws / 100; ++i) {
    Batch b = maxmin_sample(grouped, losses, 100, 1.0, rng);
    for (const auto& x : b.interactions) counts[x.item] += 1.0;
  }
  // multinomial 3-sigma band around p = 1/3
  const double expected = draws / 3.0;
  const double sigma = std::sqrt(draws * (1.0 / 3.0) * (2.0 / 3.0));
  for (Index g = 0; g < 3; ++g)
    CHECK(std::abs(counts[g] - expected) <= 3.0 * sigma);

  // temperature -> 0: batch drawn entirely from the dominating group
  Batch hard = maxmin_sample(grouped, vec({0.1, 9.0, 0.2}), 50, 1e-4, rng);
  for (const auto& x : hard.interactions) CHECK(x.item == 1);

  // a pool missing some group is rejected
  std::vector<Interaction> partial{{0, 0, 1, 0}};
  CHECK_THROWS_AS(GroupedPool(partial, catalog), std::invalid_argument);
}

TEST_CASE("every weighting rule emits one weight per sample") {
  auto catalog = make_catalog({{0, 0}, {1, 1}, {2, 0}}, 3);
  auto adjacency = build_adjacency(catalog);
  std::mt19937_64 rng(4);
  auto model = make_model(4, 3, 3, 0.1, 10, rng);
  std::vector<Interaction> train{{0, 0, 1, 0}, {1, 1, 1, 1}, {2, 2, 1, 2}};
  VectorXd item_w = ifairlrs_item_weights(train, catalog);

  for (int size : {1, 3, 7}) {
    std::vector<Interaction> batch;
    std::vector<int> items;
    for (int b = 0; b < size; ++b) {
      batch.push_back({b % 4, b % 3, 1, 0});
      items.push_back(b % 3);
    }
    auto slice = batch_slice(adjacency, items);
    CHECK(uni_weights(size).size() == size);
    CHECK(dro_weights(batch, catalog, vec({1, 2})).size() == size);
    CHECK(sdro_weights(slice, vec({1, 2}), 1.0).size() == size);
    CHECK(prop_weights(model, batch).size() == size);
    CHECK(gather_item_weights(item_w, batch).size() == size);
  }
}
