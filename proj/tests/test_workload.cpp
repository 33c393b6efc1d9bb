#include <catch_amalgamated.hpp>

#include "lockless/workload.hpp"

using namespace lockless;

TEST_CASE("gen_accounts: 1000 accounts of 3000") {
  auto a = gen_accounts(1000, 3000, 7);
  REQUIRE(a.size() == 1000);
  std::set<AccountId> ids;
  for (const auto& x : a) {
    ids.insert(x.id);
    CHECK(x.balance == 3000);
    CHECK(x.id.size() >= 5);
  }
  CHECK(ids.size() == 1000);
  CHECK(total_balance(initial_balances(a)) == 3'000'000);
}

TEST_CASE("gen_accounts: degenerate and deterministic") {
  auto one = gen_accounts(1, 0, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].balance == 0);
  CHECK(gen_accounts(50, 10, 4) == gen_accounts(50, 10, 4));
  CHECK(gen_accounts(50, 10, 4) != gen_accounts(50, 10, 5));
  CHECK_THROWS(gen_accounts(0, 1, 1));
}

TEST_CASE("gen_transactions: default shape") {
  auto accts = gen_accounts(1000, 3000, 2);
  auto txs = gen_transactions(1500, accts, 4, 2);
  REQUIRE(txs.size() == 1500);
  for (std::size_t i = 0; i < txs.size(); ++i) {
    const auto& t = txs[i];
    REQUIRE(t.conditions.size() == 4);
    REQUIRE(t.updates.size() == 2);
    CHECK(t.updates[0].delta == -t.updates[1].delta);
    CHECK(t.updates[0].account != t.updates[1].account);
    CHECK(t.conditions[0].account == t.updates[0].account);
    CHECK(t.conditions[0].amount == t.updates[1].delta);
    CHECK(t.updates[1].delta >= 1);
    CHECK(t.updates[1].delta <= 500);
    std::set<AccountId> distinct{t.updates[1].account};
    for (const auto& c : t.conditions) distinct.insert(c.account);
    CHECK(distinct.size() == 5);
    CHECK(t.leader_shard == static_cast<ShardIndex>(i % 4));
    CHECK(t.id.origin_node == t.leader_shard);
    if (i > 0) CHECK(txs[i - 1].id < t.id);
  }
}

TEST_CASE("gen_transactions: single transfer with only the sufficiency check") {
  auto accts = gen_accounts(2, 3000, 1);
  auto txs = gen_transactions(1, accts, 1, 1);
  REQUIRE(txs.size() == 1);
  CHECK(txs[0].conditions.size() == 1);
  CHECK(txs[0].updates.size() == 2);
}

TEST_CASE("gen_transactions: constraint sweep shares transfers") {
  auto accts = gen_accounts(100, 3000, 9);
  auto base = gen_transactions(50, accts, 1, 9);
  std::vector<std::vector<Transaction>> sweep;
  for (int k = 1; k <= 8; ++k) sweep.push_back(gen_transactions(50, accts, k, 9));
  for (int k = 1; k <= 8; ++k)
    for (std::size_t i = 0; i < 50; ++i) {
      const auto& t = sweep[static_cast<std::size_t>(k - 1)][i];
      CHECK(t.updates == base[i].updates);
      CHECK(t.id == base[i].id);
      REQUIRE(t.conditions.size() == static_cast<std::size_t>(k));
      if (k > 1) {
        const auto& prev = sweep[static_cast<std::size_t>(k - 2)][i].conditions;
        CHECK(std::equal(prev.begin(), prev.end(), t.conditions.begin()));
      }
    }
}

TEST_CASE("gen_transactions: input checks") {
  auto accts = gen_accounts(3, 1, 1);
  CHECK_THROWS(gen_transactions(1, accts, 3, 1));
  CHECK_THROWS(gen_transactions(1, accts, 0, 1));
  CHECK_THROWS(gen_transactions(1, {}, 1, 1));
}

TEST_CASE("failing fraction produces unsatisfiable extras") {
  auto accts = gen_accounts(100, 3000, 3);
  TxGenOptions opt;
  opt.failing_fraction = 1.0;
  auto txs = gen_transactions(10, accts, 3, 3, opt);
  for (const auto& t : txs) CHECK(t.conditions[1].amount > 3'000'000);
}
