#include <catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "lockless/json_io.hpp"
#include "lockless/simulator.hpp"
#include "lockless/workload.hpp"

using namespace lockless;
using namespace lockless::testing;

namespace {

RunConfig example_config(Protocol p = Protocol::Lockless) {
  RunConfig c;
  c.shards.shard_count = 3;
  c.shards.delta1 = 10;
  c.shards.delta3 = 30;
  c.protocol = p;
  c.record_trace = true;
  c.placement = {{"Rock", 0}, {"Asma", 1}, {"Mark", 2}, {"Bob", 2}};
  return c;
}

Workload example_workload() {
  Workload wl;
  wl.accounts = {{"Rock", 3000}, {"Asma", 500}, {"Mark", 200}};
  wl.transactions = {example_t1()};
  return wl;
}

Workload random_workload(std::int32_t txs, std::int32_t shards, std::uint64_t seed, std::int32_t accounts = 200) {
  Workload wl;
  wl.accounts = gen_accounts(accounts, 3000, seed);
  TxGenOptions opt;
  opt.shard_count = shards;
  wl.transactions = gen_transactions(txs, wl.accounts, 4, seed, opt);
  return wl;
}

}  // namespace

TEST_CASE("example 1 commits T1 with the expected balances") {
  for (auto p : {Protocol::Lockless, Protocol::Locked, Protocol::NoLock}) {
    auto r = run(example_config(p), example_workload());
    INFO(to_string(p));
    CHECK(r.quiesced);
    CHECK(r.committed == 1);
    CHECK(r.discarded == 0);
    CHECK(r.final_balances == BalanceMap{{"Rock", 1000}, {"Asma", 2500}, {"Mark", 200}});
  }
}

TEST_CASE("empty workload quiesces immediately") {
  Workload wl;
  wl.accounts = {{"A", 1}};
  auto r = run(RunConfig{}, wl);
  CHECK(r.quiesced);
  CHECK(r.tx_total == 0);
  CHECK(r.committed == 0);
  CHECK(r.end_time == 0);
}

TEST_CASE("happy path latency is within 7 * (delta1 + delta3)") {
  auto r = run(example_config(), example_workload());
  REQUIRE(r.per_tx.size() == 1);
  const auto& rec = r.per_tx[0];
  CHECK(rec.commit_time - rec.submitted_at <= 7 * (10 + 30));
  CHECK(rec.commit_time - rec.submitted_at >= 7 * (1 + 30));
}

TEST_CASE("phase 2 vote leaves 30 ms after the dispatch arrives") {
  auto r = run(example_config(), example_workload());
  std::map<AccountId, SimTime> arrived;
  for (const auto& t : r.trace)
    if (t.kind == MessageKind::SubtxDispatch) arrived[t.object] = t.t_deliver;
  REQUIRE(arrived.size() == 3);
  int votes = 0;
  for (const auto& t : r.trace)
    if (t.kind == MessageKind::CommitVote) {
      ++votes;
      CHECK(t.t_send == arrived.at(t.object) + 30);
    }
  CHECK(votes == 3);
}

TEST_CASE("happy path phases are monotone per subtransaction") {
  auto r = run(example_config(), example_workload());
  const std::vector<MessageKind> order = {MessageKind::SubtxDispatch, MessageKind::CommitVote, MessageKind::Commit,
                                          MessageKind::Committed,     MessageKind::Release,    MessageKind::Released};
  for (const auto* obj : {"Rock", "Asma", "Mark"}) {
    SimTime last = -1;
    for (auto k : order) {
      auto it = std::find_if(r.trace.begin(), r.trace.end(),
                             [&](const TraceRecord& t) { return t.kind == k && t.object == obj; });
      REQUIRE(it != r.trace.end());
      CHECK(it->t_send > last);
      last = it->t_send;
    }
  }
}

TEST_CASE("zero consensus delay is allowed") {
  auto c = example_config();
  c.shards.delta3 = 0;
  auto r = run(c, example_workload());
  CHECK(r.committed == 1);
  CHECK(r.per_tx[0].commit_time - r.per_tx[0].submitted_at <= 7 * 10);
}

TEST_CASE("delivery delay stays in [1, delta1] over many draws") {
  RunConfig c;
  c.shards.delta1 = 10;
  c.record_trace = true;
  auto r = run(c, random_workload(600, 4, 3));
  REQUIRE(r.trace.size() >= 10000);
  std::set<SimTime> seen;
  for (const auto& t : r.trace) {
    auto lag = t.t_deliver - t.t_send;
    REQUIRE(lag >= 1);
    REQUIRE(lag <= 10);
    seen.insert(lag);
  }
  CHECK(seen.size() == 10);
}

TEST_CASE("delta1 of 1 delivers on the next tick") {
  auto c = example_config();
  c.shards.delta1 = 1;
  auto r = run(c, example_workload());
  for (const auto& t : r.trace) CHECK(t.t_deliver == t.t_send + 1);
}

TEST_CASE("gossip is emitted every delta2 per shard") {
  RunConfig c;
  c.shards.delta2 = 50;
  c.record_trace = true;
  auto r = run(c, random_workload(100, 4, 5));
  std::map<ShardIndex, std::vector<SimTime>> sends;
  for (const auto& t : r.trace)
    if (t.kind == MessageKind::LowestIdGossip && t.to == (t.from + 1) % 4) sends[t.from].push_back(t.t_send);
  REQUIRE(sends.size() == 4);
  for (auto& [s, v] : sends) {
    std::sort(v.begin(), v.end());
    REQUIRE(v.size() >= 2);
    for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] - v[i - 1] == 50);
  }
}

TEST_CASE("same seed gives an identical report") {
  RunConfig c;
  c.seed = 11;
  auto wl = random_workload(300, 4, 11);
  auto a = report_to_json(run(c, wl)).dump();
  auto b = report_to_json(run(c, wl)).dump();
  CHECK(a == b);
  c.seed = 12;
  CHECK(report_to_json(run(c, wl)).dump() != a);
}

TEST_CASE("random runs quiesce and conserve money for every protocol") {
  auto wl = random_workload(300, 4, 21, 50);
  for (auto p : {Protocol::Lockless, Protocol::Locked, Protocol::NoLock}) {
    RunConfig c;
    c.protocol = p;
    auto r = run(c, wl);
    INFO(to_string(p) << " " << r.diagnostics);
    CHECK(r.quiesced);
    CHECK(r.committed + r.discarded == r.tx_total);
    CHECK(total_balance(r.final_balances) == total_balance(r.initial_balances));
  }
}

TEST_CASE("lockless shards end quiescent with consistent sets") {
  RunConfig c;
  auto wl = random_workload(300, 4, 8, 40);
  Simulator sim(c, wl);
  auto r = sim.run();
  REQUIRE(r.quiesced);
  for (const auto& d : sim.destinations()) {
    CHECK(d.quiescent());
    CHECK(d.set_invariants_hold());
  }
  for (const auto& l : sim.leaders()) CHECK(l.conservation_holds());
}

TEST_CASE("the horizon watchdog reports non-quiescence") {
  RunConfig c;
  c.horizon_ms = 20;
  auto r = run(c, random_workload(100, 4, 1));
  CHECK_FALSE(r.quiesced);
  CHECK_FALSE(r.diagnostics.empty());
}

TEST_CASE("simulator rejects bad inputs") {
  auto wl = example_workload();
  wl.transactions[0].leader_shard = 7;
  CHECK_THROWS(run(example_config(), wl));
  auto dup = example_workload();
  dup.accounts.push_back({"Rock", 1});
  CHECK_THROWS(run(example_config(), dup));
  RunConfig bad;
  bad.shards.delta1 = 0;
  CHECK_THROWS_AS(run(bad, example_workload()), ConfigError);
}
