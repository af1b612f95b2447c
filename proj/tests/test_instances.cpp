#include <set>

#include "doctest.h"
#include "rlap/instances.hpp"

using namespace rlap;

namespace {

ApInstance two_class_instance() {
  ApInstance inst;
  inst.tasks = {{3, {"A"}}, {4, {"B"}}, {5, {"A"}}};
  inst.workers = {{15, "A"}, {15, "B"}, {15, "A"}};
  inst.cost = {{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
  return inst;
}

}  // namespace

TEST_CASE("generate_ap_instance follows the default recipe") {
  const auto inst = generate_ap_instance(10, 7);
  CHECK(inst.tasks.size() == 10);
  REQUIRE(inst.workers.size() == 12);
  for (const auto& w : inst.workers) CHECK(w.capacity == 15);
  for (const auto& t : inst.tasks) {
    CHECK(t.effort >= 1);
    CHECK(t.effort <= 15);
    CHECK(t.eligibility == std::vector<WorkerClass>{"c0"});
  }
  REQUIRE(inst.cost.size() == 10);
  for (const auto& row : inst.cost) {
    REQUIRE(row.size() == 12);
    for (auto c : row) {
      CHECK(c >= 10);
      CHECK(c <= 200);
    }
  }
  CHECK(inst.seed == 7);
  CHECK_NOTHROW(validate(inst));
}

TEST_CASE("generators are deterministic and handle n = 0") {
  CHECK(generate_ap_instance(10, 7) == generate_ap_instance(10, 7));
  CHECK_FALSE(generate_ap_instance(10, 7) == generate_ap_instance(10, 8));
  CHECK(generate_bin_instance(10, 3) == generate_bin_instance(10, 3));
  CHECK(generate_vrp_instance(10, 3) == generate_vrp_instance(10, 3));

  const auto ap = generate_ap_instance(0, 1);
  CHECK(ap.tasks.empty());
  CHECK(ap.workers.size() == 2);
  CHECK(ap.cost.empty());

  CHECK(generate_bin_instance(0, 1).items.empty());
  const auto vrp = generate_vrp_instance(0, 1);
  CHECK(vrp.customers.empty());
  CHECK(vrp.depot == Point{500.0, 500.0});
}

TEST_CASE("bin and vrp generators mirror the assignment recipe") {
  const auto bin = generate_bin_instance(10, 5);
  CHECK(bin.items.size() == 10);
  REQUIRE(bin.bins.size() == 12);
  for (auto c : bin.bins) CHECK(c == 15);
  for (const auto& it : bin.items) {
    CHECK(it.weight >= 1);
    CHECK(it.weight <= 15);
    CHECK(it.value >= 10);
    CHECK(it.value <= 200);
  }
  const auto vrp = generate_vrp_instance(10, 5);
  CHECK(vrp.customers.size() == 10);
  CHECK(vrp.vehicles.size() == 12);
  for (const auto& c : vrp.customers) {
    CHECK(c.demand >= 1);
    CHECK(c.demand <= 15);
    CHECK(c.location.x >= 0.0);
    CHECK(c.location.x <= 1000.0);
  }
}

TEST_CASE("GenConfig rejects inconsistent settings") {
  GenConfig g;
  g.effort_cap = 16;
  CHECK_THROWS_AS(generate_ap_instance(3, 1, g), ConfigError);
  g = {};
  g.cost_range = {5, 4};
  CHECK_THROWS_AS(generate_ap_instance(3, 1, g), ConfigError);
}

TEST_CASE("default generator always admits a full assignment") {
  // Each task fits an untouched worker and there are more workers than tasks.
  for (RngSeed s = 0; s < 200; ++s) {
    const auto inst = generate_ap_instance(static_cast<std::size_t>(s % 50), s);
    TimeUnits min_cap = 1 << 30;
    for (const auto& w : inst.workers) min_cap = std::min(min_cap, w.capacity);
    for (const auto& t : inst.tasks) CHECK(t.effort <= min_cap);
    CHECK(inst.workers.size() >= inst.tasks.size());
  }
}

TEST_CASE("resample_dynamic redraws only the dynamic field") {
  const auto base = generate_ap_instance(10, 7);
  CHECK(std::get<ApInstance>(resample_dynamic(base, 7)) == base);
  const auto other = std::get<ApInstance>(resample_dynamic(base, 99));
  CHECK(other.cost == base.cost);
  CHECK(other.workers == base.workers);
  CHECK(other.seed == 99);
  bool changed = false;
  for (std::size_t i = 0; i < base.tasks.size(); ++i) changed |= other.tasks[i].effort != base.tasks[i].effort;
  CHECK(changed);

  const auto vbase = generate_vrp_instance(8, 3);
  const auto v = std::get<VrpInstance>(resample_dynamic(vbase, 4));
  for (std::size_t i = 0; i < v.customers.size(); ++i) CHECK(v.customers[i].location == vbase.customers[i].location);
}

TEST_CASE("eligibility_clusters") {
  SUBCASE("single class is the identity") {
    const auto inst = generate_ap_instance(6, 2);
    const auto clusters = eligibility_clusters(inst);
    REQUIRE(clusters.size() == 1);
    CHECK(clusters[0].instance.tasks == inst.tasks);
    CHECK(clusters[0].instance.workers == inst.workers);
    CHECK(clusters[0].instance.cost == inst.cost);
  }
  SUBCASE("two classes split into (2 tasks, 2 workers) and (1 task, 1 worker)") {
    const auto clusters = eligibility_clusters(two_class_instance());
    REQUIRE(clusters.size() == 2);
    std::multiset<std::pair<std::size_t, std::size_t>> shapes;
    for (const auto& c : clusters) shapes.insert({c.task_ids.size(), c.worker_ids.size()});
    CHECK(shapes == std::multiset<std::pair<std::size_t, std::size_t>>{{1, 1}, {2, 2}});
    for (const auto& c : clusters)
      for (std::size_t i = 0; i < c.task_ids.size(); ++i)
        for (std::size_t j = 0; j < c.worker_ids.size(); ++j)
          CHECK(c.instance.cost[i][j] == two_class_instance().cost[c.task_ids[i]][c.worker_ids[j]]);
  }
  SUBCASE("a class nobody holds is infeasible") {
    auto inst = two_class_instance();
    inst.tasks[1].eligibility = {"C"};
    CHECK_THROWS_AS(eligibility_clusters(inst), InfeasibleError);
  }
  SUBCASE("random multi-class instances partition the tasks") {
    GenConfig g;
    g.class_count = 3;
    for (RngSeed s = 0; s < 50; ++s) {
      const auto inst = generate_ap_instance(12, s, g);
      std::vector<std::size_t> seen;
      for (const auto& c : eligibility_clusters(inst)) seen.insert(seen.end(), c.task_ids.begin(), c.task_ids.end());
      std::sort(seen.begin(), seen.end());
      std::vector<std::size_t> all(12);
      std::iota(all.begin(), all.end(), 0);
      CHECK(seen == all);
    }
  }
}

TEST_CASE("serialize/parse roundtrip") {
  CHECK(std::get<ApInstance>(parse_instance(serialize_instance(generate_ap_instance(10, 7)))) == generate_ap_instance(10, 7));
  const auto vrp = generate_vrp_instance(9, 11);
  CHECK(std::get<VrpInstance>(parse_instance(serialize_instance(vrp))) == vrp);

  Rng rng(5);
  for (int k = 0; k < 1000; ++k) {
    GenConfig g;
    g.class_count = static_cast<std::size_t>(rng.uniform_int(1, 3));
    const auto kind = static_cast<ProblemKind>(k % 3);
    const auto inst = generate_instance(kind, static_cast<std::size_t>(rng.uniform_int(0, 15)), rng.next_u64(), g);
    REQUIRE(parse_instance(serialize_instance(inst)) == inst);
  }
}

TEST_CASE("parse errors name the line and field") {
  SUBCASE("missing cost") {
    const std::string text = R"({
  "kind": "ap",
  "seed": 1,
  "tasks": [{"effort": 3, "eligibility": ["c0"]}],
  "workers": [{"capacity": 15, "class": "c0"}]
})";
    try {
      parse_instance(text);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.field() == "/cost");
    }
  }
  SUBCASE("bad value on a known line") {
    const std::string text = "{\n  \"kind\": \"ap\",\n  \"seed\": 1,\n  \"tasks\": [\n    {\"effort\": \"x\", \"eligibility\": [\"c0\"]}\n  ],\n"
                             "  \"workers\": [{\"capacity\": 15, \"class\": \"c0\"}],\n  \"cost\": [[1]]\n}";
    try {
      parse_instance(text);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 5);
      CHECK(e.field() == "/tasks/0/effort");
    }
  }
  SUBCASE("unknown fields and malformed text") {
    CHECK_THROWS_AS(parse_instance(R"({"kind": "bin", "seed": 1, "items": [], "bins": [], "extra": 1})"), ParseError);
    CHECK_THROWS_AS(parse_instance("{\"kind\": "), ParseError);
    CHECK_THROWS_AS(parse_instance(R"({"kind": "tsp", "seed": 1})"), ParseError);
  }
  SUBCASE("coordinates carry at most six fractional digits") {
    CHECK_NOTHROW(parse_instance(R"({"kind": "vrp", "seed": 0, "depot": [0.123456, 1], "customers": [], "vehicles": [15]})"));
    CHECK_THROWS_AS(
        parse_instance(R"({"kind": "vrp", "seed": 0, "depot": [0.1234567, 1], "customers": [], "vehicles": [15]})"),
        ParseError);
  }
}

TEST_CASE("validate rejects malformed instances") {
  auto inst = two_class_instance();
  inst.cost.pop_back();
  CHECK_THROWS_AS(validate(inst), InvariantError);
  inst = two_class_instance();
  inst.tasks[0].effort = 0;
  CHECK_THROWS_AS(validate(inst), InvariantError);
  inst = two_class_instance();
  inst.tasks[0].eligibility.clear();
  CHECK_THROWS_AS(validate(inst), InvariantError);
}

TEST_CASE("derive_seed separates streams") {
  CHECK(derive_seed(1, 1) != derive_seed(1, 2));
  CHECK(derive_seed(1, 1) == derive_seed(1, 1));
  Rng a(3), b(3);
  for (int k = 0; k < 10; ++k) CHECK(a.uniform_int(-5, 5) == b.uniform_int(-5, 5));
}
