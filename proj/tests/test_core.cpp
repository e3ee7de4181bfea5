/*
 * Copyright (c) 2026, dbmtl-lab authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "dbmtl/core/adam.hpp"
#include "dbmtl/core/checkpoint.hpp"
#include "dbmtl/core/graph.hpp"
#include "dbmtl/core/param_store.hpp"
#include "dbmtl/core/rng.hpp"
#include "dbmtl/errors.hpp"
#include "testutil.hpp"

using namespace dbmtl;
using namespace dbmtl::core;

namespace {

Matrix random_matrix(Index rows, Index cols, Rng& rng, double lo = -1.5, double hi = 1.5) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(lo, hi);
  }
  return m;
}

// Keeps magnitudes away from the relu/l1 kinks so the finite-difference
// step never crosses them.
Matrix random_away_from_zero(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      const double mag = rng.uniform(0.1, 1.2);
      m(i, j) = rng.bernoulli(0.5) ? mag : -mag;
    }
  }
  return m;
}

}  // namespace

TEST_CASE("mlp_forward: identity weights clamp negatives through relu") {
  ParamStore store;
  store.add("m.0.W", {2, 2}) = Matrix::Identity(2, 2);
  store.add("m.0.b", {2});
  Graph g(&store);
  NodeId x = g.constant((Matrix(1, 2) << 2.0, -3.0).finished());
  const Index sizes[] = {2};
  NodeId out = mlp_forward(g, x, sizes, "m", {.final = Activation::kRelu});
  CHECK(g.value(out)(0, 0) == 2.0);
  CHECK(g.value(out)(0, 1) == 0.0);
}

TEST_CASE("mlp_forward: zero weights, bias 0.5, logistic head") {
  ParamStore store;
  store.add("m.0.W", {3, 1});
  store.add("m.0.b", {1}) = Matrix::Constant(1, 1, 0.5);
  Graph g(&store);
  NodeId x = g.constant((Matrix(1, 3) << 0.3, -0.2, 0.9).finished());
  const Index sizes[] = {1};
  NodeId head = mlp_forward(g, x, sizes, "m", {.final = Activation::kIdentity});
  NodeId p = g.sigmoid(head);
  const double expected = 1.0 / (1.0 + std::exp(-0.5));
  CHECK(g.value(p)(0, 0) == doctest::Approx(expected).epsilon(1e-10));
  CHECK(g.value(p)(0, 0) == doctest::Approx(0.62246).epsilon(1e-4));
}

TEST_CASE("mlp_forward: input width mismatch names the layer") {
  ParamStore store;
  store.add("m.0.W", {4, 2});
  store.add("m.0.b", {2});
  Graph g(&store);
  NodeId x = g.constant(Matrix::Zero(1, 3));
  const Index sizes[] = {2};
  CHECK_THROWS_WITH_AS(mlp_forward(g, x, sizes, "m", {}),
                       doctest::Contains("m.0"), ConfigError);
}

TEST_CASE("backward: linear product gradient") {
  ParamStore store;
  store.add("w", {1}) = Matrix::Constant(1, 1, 2.0);
  Graph g(&store);
  NodeId loss = g.mul(g.constant(Matrix::Constant(1, 1, 3.0)), g.param("w"));
  g.backward(loss);
  CHECK(store.grad("w")(0, 0) == 3.0);
}

TEST_CASE("backward: sigmoid gradient at zero is a quarter") {
  ParamStore store;
  store.add("w", {1});
  Graph g(&store);
  NodeId loss = g.sigmoid(g.param("w"));
  g.backward(loss);
  CHECK(store.grad("w")(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("backward: loss must be scalar") {
  ParamStore store;
  store.add("w", {3});
  Graph g(&store);
  NodeId w = g.param("w");
  CHECK_THROWS_AS(g.backward(w), ContractError);
}

TEST_CASE("backward: two-layer net matches central finite differences") {
  Rng rng(20260809);
  for (int instance = 0; instance < 20; ++instance) {
    ParamStore store;
    const std::uint64_t seed = rng.next_u64();
    add_mlp_params(store, "net", 4, std::vector<Index>{5, 3}, seed);
    Graph g(&store);
    NodeId x = g.constant(random_away_from_zero(6, 4, rng));
    NodeId out = mlp_forward(g, x, std::vector<Index>{5, 3}, "net",
                             {.final = Activation::kIdentity});
    NodeId p = g.sigmoid(out);
    NodeId loss = g.bce_mean(p, (random_matrix(6, 3, rng, 0.0, 1.0).array() > 0.5)
                                    .cast<double>()
                                    .matrix());
    store.zero_grads();
    g.backward(loss);
    auto res = testutil::finite_diff_check(g, loss, store);
    CHECK(res.max_rel < 1e-4);
  }
}

TEST_CASE("gradcheck: every op kind against finite differences") {
  Rng rng(7);
  const int kInstances = 100;

  SUBCASE("dense") {
    for (int k = 0; k < kInstances; ++k) {
      ParamStore store;
      store.add("W", {3, 2}) = random_matrix(3, 2, rng);
      store.add("b", {2}) = random_matrix(2, 1, rng);
      Graph g(&store);
      NodeId y = g.dense(g.constant(random_matrix(4, 3, rng)), g.param("W"), g.param("b"));
      NodeId loss = g.mse_mean(y, random_matrix(4, 2, rng));
      g.backward(loss);
      CHECK(testutil::finite_diff_check(g, loss, store).max_rel < 1e-4);
    }
  }
  SUBCASE("relu") {
    for (int k = 0; k < kInstances; ++k) {
      ParamStore store;
      store.add("x", {4, 3}) = random_away_from_zero(4, 3, rng);
      Graph g(&store);
      NodeId loss = g.mse_mean(g.relu(g.param("x")), random_matrix(4, 3, rng));
      g.backward(loss);
      CHECK(testutil::finite_diff_check(g, loss, store).max_rel < 1e-4);
    }
  }
  SUBCASE("sigmoid") {
    for (int k = 0; k < kInstances; ++k) {
      ParamStore store;
      store.add("x", {4, 2}) = random_matrix(4, 2, rng);
      Graph g(&store);
      NodeId loss = g.mse_mean(g.sigmoid(g.param("x")), random_matrix(4, 2, rng));
      g.backward(loss);
      CHECK(testutil::finite_diff_check(g, loss, store).max_rel < 1e-4);
    }
  }
  SUBCASE("concat and mul") {
    for (int k = 0; k < kInstances; ++k) {
      ParamStore store;
      store.add("a", {3, 2}) = random_matrix(3, 2, rng);
      store.add("b", {3, 1}) = random_matrix(3, 1, rng);
      store.add("c", {3, 3}) = random_matrix(3, 3, rng);
      Graph g(&store);
      NodeId cat = g.concat({g.param("a"), g.param("b")});
      NodeId prod = g.mul(cat, g.param("c"));
      NodeId loss = g.mse_mean(prod, random_matrix(3, 3, rng));
      g.backward(loss);
      CHECK(testutil::finite_diff_check(g, loss, store).max_rel < 1e-4);
    }
  }
  SUBCASE("dropout in train mode with a frozen mask") {
    for (int k = 0; k < kInstances; ++k) {
      ParamStore store;
      store.add("x", {5, 4}) = random_matrix(5, 4, rng);
      Graph g(&store);
      Rng mask_rng(rng.next_u64());
      NodeId d = g.dropout(g.param("x"), 0.4, Mode::kTrain, mask_rng);
      NodeId loss = g.mse_mean(d, random_matrix(5, 4, rng));
      g.backward(loss);
      CHECK(testutil::finite_diff_check(g, loss, store).max_rel < 1e-4);
    }
  }
  SUBCASE("embedding gather") {
    for (int k = 0; k < kInstances; ++k) {
      ParamStore store;
      store.add("table", {6, 3}) = random_matrix(6, 3, rng);
      Graph g(&store);
      std::vector<std::int32_t> ids;
      for (int r = 0; r < 7; ++r) {
        ids.push_back(static_cast<std::int32_t>(rng.uniform_int(7)) - 1);  // includes oov hits
      }
      NodeId e = g.embedding(g.param("table"), ids);
      NodeId loss = g.mse_mean(e, random_matrix(7, 3, rng));
      g.backward(loss);
      CHECK(testutil::finite_diff_check(g, loss, store).max_rel < 1e-4);
    }
  }
  SUBCASE("bce through sigmoid") {
    for (int k = 0; k < kInstances; ++k) {
      ParamStore store;
      store.add("z", {6, 1}) = random_matrix(6, 1, rng);
      Graph g(&store);
      Matrix y(6, 1);
      for (Index i = 0; i < 6; ++i) y(i, 0) = rng.bernoulli(0.5) ? 1.0 : 0.0;
      NodeId loss = g.bce_mean(g.sigmoid(g.param("z")), y);
      g.backward(loss);
      CHECK(testutil::finite_diff_check(g, loss, store).max_rel < 1e-4);
    }
  }
  SUBCASE("penalty and weighted_sum") {
    for (int k = 0; k < kInstances; ++k) {
      ParamStore store;
      store.add("w", {4, 2}) = random_away_from_zero(4, 2, rng);
      Graph g(&store);
      NodeId base = g.mse_mean(g.param("w"), random_matrix(4, 2, rng));
      NodeId pen = g.penalty(0.3, 0.7);
      NodeId loss = g.weighted_sum({base, pen}, {1.4, 1.0});
      g.backward(loss);
      CHECK(testutil::finite_diff_check(g, loss, store).max_rel < 1e-4);
    }
  }
}

TEST_CASE("graph: identical seeds produce bit-identical values and gradients") {
  auto run = [](std::uint64_t seed) {
    ParamStore store;
    add_mlp_params(store, "net", 3, std::vector<Index>{4, 2}, seed);
    Rng rng(seed);
    Graph g(&store);
    NodeId x = g.constant(random_matrix(5, 3, rng));
    NodeId out = mlp_forward(g, x, std::vector<Index>{4, 2}, "net",
                             {.dropout = 0.3, .mode = Mode::kTrain, .rng = &rng});
    NodeId loss = g.mse_mean(out, random_matrix(5, 2, rng));
    store.zero_grads();
    g.backward(loss);
    return std::make_pair(g.scalar_value(loss), store.snapshot_values());
  };
  auto [loss_a, vals_a] = run(99);
  auto [loss_b, vals_b] = run(99);
  CHECK(loss_a == loss_b);
  for (const auto& [name, value] : vals_a) {
    CHECK(value == vals_b.at(name));
  }
}

TEST_CASE("adam: single-step closed form holds to 1e-9") {
  ParamStore store;
  store.add("w", {1}) = Matrix::Constant(1, 1, 0.5);
  store.grad("w")(0, 0) = 1.0;
  AdamState adam(store, {.lr = 0.001, .beta1 = 0.9, .beta2 = 0.999, .epsilon = 1e-8});
  adam.step(store);
  CHECK(adam.step_count() == 1);
  CHECK(std::fabs(store.value("w")(0, 0) - (0.5 - 0.001)) <= 1e-9);
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  Rng rng(3);
  ParamStore store;
  store.add("w", {3, 2}) = random_matrix(3, 2, rng);
  const Matrix before = store.value("w");
  AdamState adam(store, {});
  adam.step(store);
  adam.step(store);
  CHECK(store.value("w") == before);
}

TEST_CASE("adam: identical parameters with identical grads get identical updates") {
  ParamStore store;
  store.add("a", {2}) = Matrix::Constant(2, 1, 0.7);
  store.add("b", {2}) = Matrix::Constant(2, 1, 0.7);
  store.grad("a") = Matrix::Constant(2, 1, -0.3);
  store.grad("b") = Matrix::Constant(2, 1, -0.3);
  AdamState adam(store, {});
  adam.step(store);
  CHECK(store.value("a") == store.value("b"));
}

TEST_CASE("adam: state must cover every tensor") {
  ParamStore store;
  store.add("w", {1});
  AdamState adam(store, {});
  store.add("late", {1});
  CHECK_THROWS_AS(adam.step(store), ContractError);
}

TEST_CASE("dropout: rate zero and infer mode are the exact identity") {
  ParamStore store;
  Graph g(&store);
  Rng rng(5);
  NodeId x = g.constant((Matrix(1, 3) << 1.0, -2.0, 3.0).finished());
  NodeId same_rate0 = g.dropout(x, 0.0, Mode::kTrain, rng);
  NodeId same_infer = g.dropout(x, 0.9, Mode::kInfer, rng);
  CHECK(same_rate0.index == x.index);
  CHECK(same_infer.index == x.index);
}

TEST_CASE("dropout: rejects rates outside [0, 1)") {
  Graph g;
  Rng rng(5);
  NodeId x = g.constant(Matrix::Ones(1, 2));
  CHECK_THROWS_AS(g.dropout(x, 1.0, Mode::kTrain, rng), ConfigError);
  CHECK_THROWS_AS(g.dropout(x, -0.1, Mode::kTrain, rng), ConfigError);
}

TEST_CASE("dropout: seeded monte-carlo mean stays within 3% of the input") {
  Matrix x(1, 4);
  x << 0.5, 1.0, 2.0, -1.5;
  Rng rng(123);
  Matrix acc = Matrix::Zero(1, 4);
  const int kDraws = 10000;
  for (int k = 0; k < kDraws; ++k) {
    Graph g;
    NodeId n = g.dropout(g.constant(x), 0.5, Mode::kTrain, rng);
    acc += g.value(n);
  }
  acc /= static_cast<double>(kDraws);
  for (Index j = 0; j < 4; ++j) {
    CHECK(std::fabs(acc(0, j) - x(0, j)) <= 0.03 * std::fabs(x(0, j)));
  }
}

TEST_CASE("penalty: frozen scalar examples") {
  ParamStore store;
  store.add("w", {1}) = Matrix::Constant(1, 1, 2.0);

  Graph g(&store);
  CHECK(g.scalar_value(g.penalty(0.0, 0.0)) == 0.0);
  CHECK(g.scalar_value(g.penalty(1.0, 0.0)) == 2.0);
  // 0.5 * |2| + 0.25 * 4 = 2
  CHECK(g.scalar_value(g.penalty(0.5, 0.25)) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(g.penalty(-0.1, 0.0), ConfigError);
}

TEST_CASE("bce_mean: clamping counts saturations and rejects bad labels") {
  Graph g;
  NodeId p = g.constant((Matrix(2, 1) << 1.0, 0.4).finished());
  NodeId loss = g.bce_mean(p, (Matrix(2, 1) << 1.0, 0.0).finished());
  CHECK(g.saturation_count() == 1);
  CHECK(std::isfinite(g.scalar_value(loss)));
  CHECK_THROWS_AS(g.bce_mean(p, (Matrix(2, 1) << 0.5, 0.0).finished()), DataError);
}

TEST_CASE("checkpoint: round-trips values and embedded config exactly") {
  Rng rng(17);
  ParamStore store;
  store.add("alpha", {3, 2}) = random_matrix(3, 2, rng);
  store.add("beta", {4}) = random_matrix(4, 1, rng);

  const auto dir = std::filesystem::temp_directory_path() / "dbmtl_ckpt_test";
  std::filesystem::remove_all(dir);
  nlohmann::json config = {{"family", "vanilla"}, {"note", 42}};
  save_checkpoint(store, config, dir);

  ParamStore loaded;
  loaded.add("alpha", {3, 2});
  loaded.add("beta", {4});
  nlohmann::json round = load_checkpoint(loaded, dir);
  CHECK(round == config);
  CHECK(loaded.value("alpha") == store.value("alpha"));
  CHECK(loaded.value("beta") == store.value("beta"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("param store: contracts") {
  ParamStore store;
  store.add("w", {2});
  CHECK_THROWS_AS(store.add("w", {2}), ConfigError);
  CHECK_THROWS_AS(store.value("missing"), ContractError);
  CHECK_THROWS_AS(store.add("bad", {0, 2}), ConfigError);
}
