#pragma once

// Small hand-built transactions and partitions shared by the tests.

#include <map>
#include <string>

#include "lockless/core.hpp"

namespace lockless::testing {

/// Partition with an explicit account -> shard table.
inline Partition table_partition(std::int32_t shards, const std::map<AccountId, ShardIndex>& table) {
  return Partition(shards, table);
}

/// "Transfer 2000 from Rock to Asma, if Rock has 3000 and Asma has 500 and
/// Mark has 200."
inline Transaction example_t1(TxId id = {0, 0, 1}, ShardIndex leader = 0) {
  Transaction t;
  t.id = id;
  t.leader_shard = leader;
  t.conditions = {{"Rock", Comparator::GreaterEqual, 3000},
                  {"Asma", Comparator::GreaterEqual, 500},
                  {"Mark", Comparator::GreaterEqual, 200}};
  t.updates = {{"Rock", -2000}, {"Asma", 2000}};
  return t;
}

/// "Transfer 500 from Asma to Bob, if Asma has 5000."
inline Transaction example_t2(TxId id = {1, 1, 2}, ShardIndex leader = 1) {
  Transaction t;
  t.id = id;
  t.leader_shard = leader;
  t.conditions = {{"Asma", Comparator::GreaterEqual, 5000}};
  t.updates = {{"Asma", -500}, {"Bob", 500}};
  return t;
}

inline Transaction transfer(TxId id, ShardIndex leader, const AccountId& from, const AccountId& to, Balance amt) {
  Transaction t;
  t.id = id;
  t.leader_shard = leader;
  t.conditions = {{from, Comparator::GreaterEqual, amt}};
  t.updates = {{from, -amt}, {to, amt}};
  return t;
}

}  // namespace lockless::testing
