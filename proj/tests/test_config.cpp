#include <fstream>

#include "doctest.h"
#include "fedet/config.hpp"
#include "fedet/errors.hpp"
#include "test_support.hpp"

using namespace fedet;

namespace {

std::string write_config(const test::TempDir& dir, const std::string& body) {
  const std::string path = dir.file("run.cfg");
  std::ofstream file(path);
  file << body;
  return path;
}

}  // namespace

TEST_CASE("config files parse key = value lines with comments") {
  test::TempDir dir("fedet-config");
  const std::string path = write_config(dir,
                                        "# experiment\n"
                                        "K = 10\n"
                                        "m = 4\n"
                                        "alpha = 0.5\n"
                                        "lambda = 0.05\n"
                                        "algorithm = fedavg\n"
                                        "small_widths = 4 | 8 | 12\n"
                                        "U = 3\n"
                                        "\n"
                                        "seed = 123\n");
  const RunConfig config = parse_config_file(path);
  CHECK(config.K == 10);
  CHECK(config.m == 4);
  CHECK(config.alpha == 0.5);
  CHECK(config.lambda == 0.05);
  CHECK(config.algorithm == "fedavg");
  CHECK(config.seed == 123);
  CHECK(config.small_specs().size() == 3);
}

TEST_CASE("unknown keys are rejected") {
  test::TempDir dir("fedet-config");
  const std::string path = write_config(dir, "K = 10\nmystery = 3\n");
  CHECK_THROWS_AS(parse_config_file(path), ConfigError);
}

TEST_CASE("duplicate keys are rejected") {
  test::TempDir dir("fedet-config");
  const std::string path = write_config(dir, "K = 10\nK = 12\n");
  CHECK_THROWS_AS(parse_config_file(path), ConfigError);
}

TEST_CASE("malformed values are rejected with context") {
  test::TempDir dir("fedet-config");
  const std::string path = write_config(dir, "K = ten\n");
  try {
    parse_config_file(path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("validation enforces the run invariants") {
  RunConfig config;
  validate(config);  // defaults are coherent

  RunConfig over_m = config;
  over_m.m = over_m.K + 1;
  CHECK_THROWS_AS(validate(over_m), ConfigError);

  RunConfig zero_tau = config;
  zero_tau.tau = 0;
  CHECK_THROWS_AS(validate(zero_tau), ConfigError);

  RunConfig negative_lambda = config;
  negative_lambda.lambda = -0.1;
  CHECK_THROWS_AS(validate(negative_lambda), ConfigError);

  RunConfig bad_algorithm = config;
  bad_algorithm.algorithm = "gossip";
  CHECK_THROWS_AS(validate(bad_algorithm), ConfigError);

  RunConfig mismatched_u = config;
  mismatched_u.U = 2;  // small_widths still lists 3
  CHECK_THROWS_AS(validate(mismatched_u), ConfigError);

  // Zero learning rates are allowed; they make rounds into no-ops.
  RunConfig frozen = config;
  frozen.eta = 0.0;
  frozen.eta_s = 0.0;
  validate(frozen);
}

TEST_CASE("width strings parse into backbone specs") {
  RunConfig config;
  config.small_widths = "8 | 16,12 | 32";
  config.d = 8;
  config.u = 16;
  const auto specs = config.small_specs();
  REQUIRE(specs.size() == 3);
  CHECK(specs[0].hidden_widths == std::vector<std::size_t>{8});
  CHECK(specs[1].hidden_widths == (std::vector<std::size_t>{16, 12}));
  CHECK(specs[2].hidden_widths == std::vector<std::size_t>{32});
  CHECK(specs[1].input_dim == 8);
  CHECK(specs[1].feature_dim == 16);
  config.small_widths = "8 | | 32";
  CHECK_THROWS_AS(config.small_specs(), ConfigError);
}
