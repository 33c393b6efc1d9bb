#include <catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "lockless/core.hpp"

using namespace lockless;
using lockless::testing::example_t1;
using lockless::testing::example_t2;

namespace {

const Subtransaction& on(const std::vector<Subtransaction>& subs, const AccountId& a) {
  for (const auto& s : subs)
    if (s.object == a) return s;
  FAIL("no subtransaction on " << a);
  return subs.front();
}

}  // namespace

TEST_CASE("split T1 into three per-account subtransactions") {
  Partition part(3, {{"Rock", 0}, {"Asma", 1}, {"Mark", 2}});
  auto subs = split(example_t1(), part);
  REQUIRE(subs.size() == 3);

  const auto& r = on(subs, "Rock");
  CHECK(r.shard == 0);
  REQUIRE(r.conditions.size() == 1);
  CHECK(r.conditions[0].amount == 3000);
  REQUIRE(r.update);
  CHECK(r.delta() == -2000);

  const auto& a = on(subs, "Asma");
  CHECK(a.shard == 1);
  CHECK(a.conditions[0].amount == 500);
  CHECK(a.delta() == 2000);

  const auto& m = on(subs, "Mark");
  CHECK(m.conditions[0].amount == 200);
  CHECK_FALSE(m.update);
  CHECK_FALSE(m.writes());

  CHECK(destination_shards(subs) == std::vector<ShardIndex>{0, 1, 2});
}

TEST_CASE("split T2: unconditioned credit") {
  auto subs = split(example_t2(), Partition(2));
  REQUIRE(subs.size() == 2);
  CHECK(on(subs, "Asma").delta() == -500);
  CHECK(on(subs, "Asma").conditions.size() == 1);
  CHECK(on(subs, "Bob").conditions.empty());
  CHECK(on(subs, "Bob").delta() == 500);
}

TEST_CASE("split of a single read-only condition") {
  Transaction t;
  t.conditions = {{"X", Comparator::GreaterEqual, 10}};
  auto subs = split(t, Partition(4));
  REQUIRE(subs.size() == 1);
  CHECK_FALSE(subs[0].update);
}

TEST_CASE("split merges repeated updates and keeps all conditions") {
  Transaction t;
  t.conditions = {{"A", Comparator::GreaterEqual, 5}, {"A", Comparator::LessEqual, 100}};
  t.updates = {{"A", -3}, {"A", -4}, {"B", 7}};
  auto subs = split(t, Partition(2));
  REQUIRE(subs.size() == 2);
  CHECK(on(subs, "A").conditions.size() == 2);
  CHECK(on(subs, "A").delta() == -7);
}

TEST_CASE("split rejects a transaction with no accounts") {
  CHECK_THROWS_AS(split(Transaction{}, Partition(2)), MalformedTransaction);
}

TEST_CASE("evaluate_condition") {
  CHECK(evaluate_condition({"Rock", Comparator::GreaterEqual, 3000}, {"Rock", 3000, 0}));
  CHECK(evaluate_condition({"X", Comparator::GreaterEqual, 0}, {"X", 0, 0}));
  CHECK_FALSE(evaluate_condition({"Asma", Comparator::GreaterEqual, 5000}, {"Asma", 2500, 0}));
  CHECK(evaluate_condition({"A", Comparator::LessEqual, 5}, {"A", 5, 0}));
  CHECK_FALSE(evaluate_condition({"A", Comparator::Equal, 5}, {"A", 6, 0}));
  CHECK_THROWS_AS(evaluate_condition({"A", Comparator::Equal, 5}, {"B", 5, 0}), ContractViolation);
}

TEST_CASE("admissibility rejects overdraft") {
  Subtransaction s;
  s.object = "A";
  s.update = Update{"A", -10};
  CHECK(subtx_admissible(s, {"A", 10, 0}));
  CHECK_FALSE(subtx_admissible(s, {"A", 9, 0}));
}

TEST_CASE("partition pins override the hash and are range-checked") {
  Partition p(4, {{"Rock", 3}});
  CHECK(p("Rock") == 3);
  CHECK(p("Other") == Partition(4)("Other"));
  CHECK_THROWS_AS(Partition(2, {{"Rock", 2}}), ConfigError);
  CHECK_THROWS_AS(Partition(0), ConfigError);
}

TEST_CASE("shard config validation") {
  ShardConfig c;
  CHECK_NOTHROW(c.validate());
  c.nodes_per_shard = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.min_delay = c.delta1 + 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("protocol names round-trip") {
  for (auto p : {Protocol::Lockless, Protocol::Locked, Protocol::NoLock})
    CHECK(protocol_from_string(to_string(p)) == p);
  CHECK_THROWS(protocol_from_string("2pc"));
}
