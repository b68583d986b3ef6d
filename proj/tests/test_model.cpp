#include <cmath>

#include "doctest.h"
#include "fedet/errors.hpp"
#include "fedet/model.hpp"
#include "test_support.hpp"

using namespace fedet;

TEST_CASE("param count of the documented configuration is 388") {
  // widths [16], d=8, u=8, N=4:
  // 8*16+16 + 16*8+8 + (8*8+8) + (8*4+4) = 144+136+72+36
  const Model model = build_model({{16}, 8, 8}, 4, 1);
  CHECK(model.param_count() == 388);
}

TEST_CASE("build_model is deterministic in the seed") {
  const Model a = build_model({{12, 6}, 5, 4}, 3, 77);
  const Model b = build_model({{12, 6}, 5, 4}, 3, 77);
  CHECK(test::models_identical(a, b));
  const Model c = build_model({{12, 6}, 5, 4}, 3, 78);
  CHECK(!test::models_identical(a, c));
}

TEST_CASE("built models produce a valid simplex") {
  Rng rng(5);
  const Model model = build_model({{10}, 6, 4}, 5, 9);
  const Tensor out = model.predict(test::random_input(rng, 6));
  double total = 0.0;
  for (double v : out.data) {
    CHECK(v >= 0.0);
    total += v;
  }
  CHECK(std::fabs(total - 1.0) < 1e-9);
}

TEST_CASE("build_model rejects degenerate shapes") {
  CHECK_THROWS_AS(build_model({{0}, 8, 8}, 4, 1), ArgumentError);
  CHECK_THROWS_AS(build_model({{8}, 0, 8}, 4, 1), ArgumentError);
  CHECK_THROWS_AS(build_model({{8}, 8, 8}, 1, 1), ArgumentError);
}

TEST_CASE("registry init orders model sizes and keeps the server largest") {
  const std::vector<BackboneSpec> smalls{{{8}, 8, 16},
                                         {{16}, 8, 16},
                                         {{32}, 8, 16}};
  const ModelRegistry registry =
      registry_init(smalls, {{64, 64}, 8, 16}, 4, 3);
  REQUIRE(registry.small_models.size() == 3);
  std::size_t previous = 0;
  for (const auto& [model_id, model] : registry.small_models) {
    // Hand count: 9w + (w+1)*16 backbone, 17*16 + 17*4 head.
    const std::size_t w = static_cast<std::size_t>(8) << (model_id - 1);
    const std::size_t expected = (8 * w + w) + (w * 16 + 16) +
                                 (16 * 16 + 16) + (16 * 4 + 4);
    CHECK(model.param_count() == expected);
    CHECK(model.param_count() > previous);
    previous = model.param_count();
  }
  CHECK(registry.server_model.param_count() > previous);
}

TEST_CASE("a single small model trivially satisfies the registry contract") {
  const ModelRegistry registry = registry_init({{{4}, 6, 8}}, {{32}, 6, 8}, 3, 5);
  CHECK(registry.small_models.size() == 1);
  CHECK(registry.server_model.param_count() >
        registry.small_models.at(1).param_count());
}

TEST_CASE("a server no larger than a small model is a configuration error") {
  CHECK_THROWS_AS(registry_init({{{32}, 8, 16}}, {{8}, 8, 16}, 4, 7),
                  ConfigError);
  // Equal sizes are rejected too: the ordering is strict.
  CHECK_THROWS_AS(registry_init({{{32}, 8, 16}}, {{32}, 8, 16}, 4, 7),
                  ConfigError);
}

TEST_CASE("heads share one shape across every model in a registry") {
  const ModelRegistry registry = registry_init(
      {{{8}, 8, 16}, {{16, 12}, 8, 16}}, {{64}, 8, 16}, 4, 11);
  const Head server_head = registry.server_model.head();
  for (const auto& [model_id, model] : registry.small_models) {
    const Head head = model.head();
    CHECK(head.hidden.weights.same_shape(server_head.hidden.weights));
    CHECK(head.output.weights.same_shape(server_head.output.weights));
  }
}

TEST_CASE("uniform assignment with one model maps everyone to id 1") {
  std::vector<int> clients{0, 1, 2, 3, 4};
  const auto assignment = assign_models(clients, 1, 13);
  for (int client : clients) CHECK(assignment.at(client) == 1);
}

TEST_CASE("assignment shares are near-uniform over many clients") {
  std::vector<int> clients(10000);
  for (int i = 0; i < 10000; ++i) clients[i] = i;
  const auto assignment = assign_models(clients, 4, 17);
  std::vector<std::size_t> counts(5, 0);
  for (const auto& [client, model_id] : assignment) ++counts[model_id];
  for (int model_id = 1; model_id <= 4; ++model_id) {
    CHECK(std::fabs(static_cast<double>(counts[model_id]) - 2500.0) <=
          0.05 * 2500.0);
  }
}

TEST_CASE("assignment replays identically for one seed") {
  std::vector<int> clients{0, 1, 2, 3, 4, 5, 6, 7};
  CHECK(assign_models(clients, 3, 19) == assign_models(clients, 3, 19));
}

TEST_CASE("set_head(get_head) is the identity") {
  Model model = build_model({{10}, 6, 8}, 4, 23);
  const Model before = model;
  model.set_head(model.head());
  CHECK(test::models_identical(model, before));
}

TEST_CASE("set_head changes the forward output") {
  Rng rng(29);
  Model model = build_model({{10}, 6, 8}, 4, 23);
  const Tensor probe = test::random_input(rng, 6);
  const Tensor before = model.predict(probe);
  Head other = build_model({{10}, 6, 8}, 4, 31).head();
  model.set_head(other);
  CHECK(model.predict(probe).data != before.data);
}

TEST_CASE("heads from a different configuration are rejected") {
  Model model = build_model({{10}, 6, 8}, 4, 23);
  const Head wrong = build_model({{10}, 6, 12}, 4, 23).head();
  CHECK_THROWS_AS(model.set_head(wrong), DimensionError);
}
