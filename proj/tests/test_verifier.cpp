#include <catch_amalgamated.hpp>

#include <random>

#include "fixtures.hpp"
#include "lockless/verifier.hpp"

using namespace lockless;
using namespace lockless::testing;

namespace {

using Chains = std::vector<std::vector<ChainEntry>>;

ChainEntry entry(TxId tx, const AccountId& obj, ShardIndex shard, Balance delta) {
  auto s = std::make_shared<Subtransaction>();
  s->parent = tx;
  s->shard = shard;
  s->object = obj;
  if (delta != 0) s->update = Update{obj, delta};
  return ChainEntry{s, 1, EntryStatus::Released, 0, std::nullopt, delta};
}

const TxId kT1{1, 0, 1}, kT2{2, 0, 2}, kT3{3, 0, 3};

std::size_t node(const CausalGraph& g, TxId tx, const AccountId& obj) { return g.index.at({tx, obj}); }

/// T1 before T2 on A (shard 0), T2 before T1 on B (shard 1).
Chains crossed() {
  return {{entry(kT1, "A", 0, 1), entry(kT2, "A", 0, 1)}, {entry(kT2, "B", 1, 1), entry(kT1, "B", 1, 1)}};
}

/// Random released chains over `ntx` transactions, two shards, four objects.
Chains random_chains(std::mt19937_64& rng, int ntx) {
  const std::vector<std::pair<AccountId, ShardIndex>> objects = {{"A", 0}, {"B", 0}, {"C", 1}, {"D", 1}};
  Chains chains(2);
  std::bernoulli_distribution coin(0.5);
  for (int t = 0; t < ntx; ++t) {
    TxId id{t, 0, t};
    bool any = false;
    for (const auto& [obj, shard] : objects)
      if (coin(rng)) {
        chains[static_cast<std::size_t>(shard)].push_back(entry(id, obj, shard, coin(rng) ? 1 : 0));
        any = true;
      }
    if (!any) chains[0].push_back(entry(id, "A", 0, 0));
  }
  for (auto& c : chains) std::shuffle(c.begin(), c.end(), rng);
  return chains;
}

/// Brute force: some order of the transactions puts every conflicting pair
/// in chain order.
bool has_consistent_order(const CausalGraph& g) {
  std::vector<TxId> txs;
  for (const auto& [tx, _] : g.by_tx) txs.push_back(tx);
  std::sort(txs.begin(), txs.end());
  do {
    std::map<TxId, std::size_t> pos;
    for (std::size_t i = 0; i < txs.size(); ++i) pos[txs[i]] = i;
    bool ok = true;
    for (auto [a, b] : g.intra)
      if (pos[g.nodes[a].key.tx] > pos[g.nodes[b].key.tx]) ok = false;
    if (ok) return true;
  } while (std::next_permutation(txs.begin(), txs.end()));
  return false;
}

}  // namespace

TEST_CASE("independent transactions have no edges") {
  Chains c{{entry(kT1, "A", 0, 5)}, {entry(kT2, "B", 1, 5)}};
  auto g = build_graph(c);
  CHECK(g.intra.empty());
  CHECK_FALSE(g.causes(0, 1));
  CHECK_FALSE(g.causes(1, 0));
  auto s = serialize(g);
  CHECK(s.order == std::vector<TxId>{kT1, kT2});
}

TEST_CASE("conflict edge and its lifts") {
  // T1 writes Asma (shard 0) and Rock (shard 1); T2 writes Asma then Bob (shard 1).
  Chains c{{entry(kT1, "Asma", 0, 5), entry(kT2, "Asma", 0, -5)},
           {entry(kT1, "Rock", 1, -5), entry(kT2, "Bob", 1, 5)}};
  auto g = build_graph(c);
  CHECK(g.causes(node(g, kT1, "Asma"), node(g, kT2, "Asma")));
  CHECK(g.causes(node(g, kT1, "Asma"), node(g, kT2, "Bob")));
  CHECK(g.causes(node(g, kT1, "Rock"), node(g, kT2, "Asma")));
  // Each lift keeps one end on the conflicting object; the two do not compose.
  CHECK_FALSE(g.causes(node(g, kT1, "Rock"), node(g, kT2, "Bob")));
  CHECK_FALSE(g.causes(node(g, kT2, "Bob"), node(g, kT1, "Rock")));
  CHECK(check_valid(g).ok);
}

TEST_CASE("two readers do not conflict") {
  Chains c{{entry(kT1, "A", 0, 0), entry(kT2, "A", 0, 0)}};
  auto g = build_graph(c);
  CHECK(g.intra.empty());
}

TEST_CASE("closure is transitive across three transactions") {
  Chains c{{entry(kT1, "A", 0, 1), entry(kT2, "A", 0, 1)}, {entry(kT2, "B", 1, 1), entry(kT3, "B", 1, 1)}};
  auto g = build_graph(c);
  CHECK(g.causes(node(g, kT1, "A"), node(g, kT3, "B")));
  CHECK_FALSE(g.causes(node(g, kT3, "B"), node(g, kT1, "A")));
}

TEST_CASE("closure agrees with a matrix closure on random graphs") {
  std::mt19937_64 rng(17);
  for (int round = 0; round < 200; ++round) {
    auto g = build_graph(random_chains(rng, 1 + static_cast<int>(rng() % 5)));
    const auto n = g.size();
    REQUIRE(n <= 20);
    std::vector<std::vector<bool>> m(n, std::vector<bool>(n, false));
    for (std::size_t u = 0; u < n; ++u)
      for (auto v : g.succ[u]) m[u][v] = true;
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (m[i][k] && m[k][j]) m[i][j] = true;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) REQUIRE(g.causes(i, j) == m[i][j]);
  }
}

TEST_CASE("empty graph is valid") {
  auto g = build_graph({});
  CHECK(check_valid(g).ok);
  CHECK(check_shard_coherence(g).ok);
  CHECK(serialize(g).ok);
  CHECK(serialize(g).order.empty());
}

TEST_CASE("a crossed pair yields a length-3 counterexample") {
  auto g = build_graph(crossed());
  auto v = check_valid(g);
  CHECK_FALSE(v.ok);
  REQUIRE(v.cycle.size() == 3);
  CHECK(v.cycle.front() == v.cycle.back());
  CHECK(v.cycle[0].tx != v.cycle[1].tx);
  for (std::size_t i = 0; i + 1 < v.cycle.size(); ++i)
    CHECK(g.causes(g.index.at(v.cycle[i]), g.index.at(v.cycle[i + 1])));
}

TEST_CASE("opposite orders on two shards break coherence") {
  auto g = build_graph(crossed());
  auto c = check_shard_coherence(g);
  CHECK_FALSE(c.ok);
  REQUIRE(c.violation);
  std::set<TxId> pair{c.violation->earlier, c.violation->later};
  CHECK(pair == std::set<TxId>{kT1, kT2});
  auto s = serialize(g);
  CHECK_FALSE(s.ok);
  CHECK_FALSE(s.cycle.empty());
}

TEST_CASE("serial execution is coherent") {
  Chains c{{entry(kT1, "A", 0, 1), entry(kT2, "A", 0, 1), entry(kT3, "A", 0, 1)},
           {entry(kT1, "B", 1, 1), entry(kT3, "B", 1, 1)}};
  auto g = build_graph(c);
  CHECK(check_valid(g).ok);
  CHECK(check_shard_coherence(g).ok);
  CHECK(serialize(g).order == std::vector<TxId>{kT1, kT2, kT3});
}

TEST_CASE("example 2: T1 committed first on Asma serializes first despite a larger id") {
  TxId t1{5, 0, 1}, t2{1, 1, 2};
  Chains c{{entry(t1, "Rock", 0, -2000)},
           {entry(t1, "Asma", 1, 2000), entry(t2, "Asma", 1, -500)},
           {entry(t1, "Mark", 2, 0), entry(t2, "Bob", 2, 500)}};
  auto g = build_graph(c);
  auto s = serialize(g);
  REQUIRE(s.ok);
  CHECK(s.order == std::vector<TxId>{t1, t2});
  CHECK(respects_edges(g, s.order));
  CHECK_FALSE(respects_edges(g, {t2, t1}));
}

TEST_CASE("validity matches a brute-force order search") {
  std::mt19937_64 rng(99);
  int invalid = 0;
  for (int round = 0; round < 300; ++round) {
    auto g = build_graph(random_chains(rng, 2 + static_cast<int>(rng() % 7)));
    bool brute = has_consistent_order(g);
    REQUIRE(check_valid(g).ok == brute);
    auto s = serialize(g);
    REQUIRE(s.ok == brute);
    if (brute) {
      REQUIRE(respects_edges(g, s.order));
      REQUIRE(s.order.size() == g.by_tx.size());
    } else {
      ++invalid;
    }
  }
  CHECK(invalid > 0);
}

TEST_CASE("build_graph rejects malformed chains") {
  Chains dup{{entry(kT1, "A", 0, 1), entry(kT1, "A", 0, 1)}};
  CHECK_THROWS_AS(build_graph(dup), StructuralError);
  Chains tentative{{entry(kT1, "A", 0, 1)}};
  tentative[0][0].status = EntryStatus::Tentative;
  CHECK_THROWS_AS(build_graph(tentative), StructuralError);
}

TEST_CASE("replay of example 1") {
  auto t1 = example_t1();
  auto r = oracle_replay({t1.id}, {{"Rock", 3000}, {"Asma", 500}, {"Mark", 200}}, index_transactions({t1}));
  CHECK(r.violations.empty());
  CHECK(r.balances == BalanceMap{{"Rock", 1000}, {"Asma", 2500}, {"Mark", 200}});
}

TEST_CASE("replay of an empty order returns the initial balances") {
  BalanceMap init{{"A", 4}};
  auto r = oracle_replay({}, init, {});
  CHECK(r.balances == init);
  CHECK(r.violations.empty());
}

TEST_CASE("replay flags a committed transaction whose conditions fail") {
  auto t2 = example_t2();
  auto r = oracle_replay({t2.id}, {{"Asma", 500}, {"Bob", 0}}, index_transactions({t2}));
  CHECK(r.violations.size() == 1);
  CHECK(r.balances.at("Asma") == 500);
  auto missing = oracle_replay({kT3}, {}, {});
  CHECK(missing.violations.size() == 1);
}

TEST_CASE("verify end to end on example 1") {
  auto t1 = example_t1();
  Chains c{{entry(t1.id, "Rock", 0, -2000)}, {entry(t1.id, "Asma", 1, 2000)}, {entry(t1.id, "Mark", 2, 0)}};
  BalanceMap init{{"Rock", 3000}, {"Asma", 500}, {"Mark", 200}};
  auto ok = verify(c, init, index_transactions({t1}), {{"Rock", 1000}, {"Asma", 2500}, {"Mark", 200}});
  CHECK(ok.ok());
  CHECK(ok.serialization == std::vector<TxId>{t1.id});
  auto bad = verify(c, init, index_transactions({t1}), {{"Rock", 1000}, {"Asma", 2400}, {"Mark", 200}});
  CHECK_FALSE(bad.replay_match);
  CHECK_FALSE(bad.ok());
}
