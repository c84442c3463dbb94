#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "polopt/harness.hpp"

using namespace polopt;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("polopt_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("parse_seeds accepts ranges and lists") {
    CHECK(parse_seeds("0..3") == std::vector<std::uint64_t>{0, 1, 2, 3});
    CHECK(parse_seeds("4") == std::vector<std::uint64_t>{4});
    CHECK_THROWS(parse_seeds("3..1"));
    CHECK_THROWS(parse_seeds("x"));
  }

  TEST_CASE("config errors list every violation") {
    auto doc = nlohmann::json::parse(R"({"algorithm": "nope", "k_max": -1, "bogus": 1,
                                         "eval": {"targets": "guess"}})");
    try {
      validate(parse_config(doc));
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.violations().size() >= 2);
    }
  }

  TEST_CASE("reruns write byte-identical seed files") {
    fs::path out = scratch("rerun");
    auto doc = nlohmann::json::parse(R"({"algorithm": "pda-fa", "k_max": 4, "seeds": [0, 1],
      "environment": {"kind": "random-tabular", "n_states": 5, "n_actions": 2},
      "schedule": {"kind": "linear-const", "lambda": 1.0},
      "eval": {"n_samples": 40, "burn_in": 5, "truncation": 10, "n_anchors": 10, "n_frequencies": 20}})");
    doc["output"] = out.string();
    const char* files[] = {"seed_0.csv", "seed_1.csv", "aggregate.csv"};
    run(parse_config(doc));
    std::vector<std::string> first;
    for (const char* f : files) first.push_back(slurp(out / f));
    run(parse_config(doc));
    for (std::size_t i = 0; i < 3; ++i) CHECK(slurp(out / files[i]) == first[i]);
    fs::remove_all(out);
  }

  TEST_CASE("aggregate can be rebuilt from seed files") {
    fs::path out = scratch("reaggregate");
    auto doc = nlohmann::json::parse(R"({"algorithm": "pmd-exact", "k_max": 6, "seeds": "0..2",
      "environment": {"kind": "random-tabular", "n_states": 6, "n_actions": 3},
      "schedule": {"kind": "constant", "eta": 1.0}})");
    doc["output"] = out.string();
    RunSummary s = run(parse_config(doc));
    std::vector<SeedResult> back;
    for (int i = 0; i < 3; ++i) back.push_back(read_seed_csv((out / ("seed_" + std::to_string(i) + ".csv")).string()));
    auto agg = aggregate(back);
    REQUIRE(agg.size() == s.aggregate.size());
    for (std::size_t i = 0; i < agg.size(); ++i) {
      CHECK(agg[i].iteration == s.aggregate[i].iteration);
      CHECK(agg[i].mean[0] == doctest::Approx(s.aggregate[i].mean[0]).epsilon(1e-9));
    }
    fs::remove_all(out);
  }

  TEST_CASE("value iteration reports its Bellman residual") {
    auto doc = nlohmann::json::parse(R"({"algorithm": "value-iteration", "seeds": [0],
      "environment": {"kind": "random-tabular", "n_states": 5, "n_actions": 2}})");
    RunSummary s = run(parse_config(doc), false);
    bool found = false;
    for (const auto& [k, v] : s.seeds[0].meta)
      if (k == "bellman_residual") {
        found = true;
        CHECK(std::stod(v) < 1e-8);
      }
    CHECK(found);
  }

  TEST_CASE("gridsearch breaks ties by the smallest grid point") {
    auto doc = nlohmann::json::parse(R"({"algorithm": "pmd-exact", "k_max": 4, "seeds": [0],
      "environment": {"kind": "random-tabular", "n_states": 4, "n_actions": 2},
      "schedule": {"kind": "constant", "eta": 1.0},
      "grid": {"eval.n_samples": [30, 10, 20], "schedule.eta": [0.1, 1.0]}})");
    GridResult g = gridsearch(parse_config(doc), false);
    CHECK(g.table.size() == 6u);
    CHECK(g.table[g.best].values["schedule.eta"] == 1.0);
    CHECK(g.table[g.best].values["eval.n_samples"] == 10);
  }

  TEST_CASE("shipped TOML configs load and validate") {
    for (const char* name : {"gridworld_pda.toml", "lqr_pda.toml"}) {
      RunConfig c = load_config(std::string(POLOPT_SOURCE_DIR "/configs/") + name);
      CHECK_NOTHROW(validate(c));
      CHECK(c.algorithm == "pda-fa");
    }
    CHECK_THROWS_AS(load_config("/nonexistent/config.toml"), ConfigError);
  }
}
