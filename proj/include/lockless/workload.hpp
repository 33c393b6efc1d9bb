#pragma once

// Randomized transfer workload: letter-named accounts with a common initial
// balance, and conditional two-account transfers with a configurable number of
// balance conditions.

#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "lockless/core.hpp"

namespace lockless {

struct AccountInit {
  AccountId id;
  Balance balance = 0;

  friend bool operator==(const AccountInit&, const AccountInit&) = default;
};

struct Workload {
  std::vector<AccountInit> accounts;
  std::vector<Transaction> transactions;
};

struct TxGenOptions {
  std::int32_t shard_count = 4;
  SimTime arrival_interval_ms = 1;
  Balance min_amount = 1;
  Balance max_amount = 500;
  // Extra conditions are "balance >= threshold" with threshold in
  // [0, extra_threshold_max].
  Balance extra_threshold_max = 1000;
  // Fraction of extra conditions generated to fail (threshold above any
  // reachable balance).
  double failing_fraction = 0.0;
};

/// 64-bit mix used to derive independent per-transaction sub-streams.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

[[nodiscard]] inline std::vector<AccountInit> gen_accounts(std::int32_t count, Balance initial_balance,
                                                           std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("account count must be >= 1");
  std::mt19937_64 rng(mix_seed(seed, 0xacc0));
  std::uniform_int_distribution<int> letter(0, 25);
  std::uniform_int_distribution<int> length(5, 8);
  std::set<std::string> seen;
  std::vector<AccountInit> out;
  out.reserve(static_cast<std::size_t>(count));
  while (static_cast<std::int32_t>(out.size()) < count) {
    std::string name(static_cast<std::size_t>(length(rng)), 'a');
    for (auto& ch : name) ch = static_cast<char>('a' + letter(rng));
    name[0] = static_cast<char>(name[0] - 'a' + 'A');
    if (seen.insert(name).second) out.push_back({name, initial_balance});
  }
  return out;
}

/// Leader assignment: transaction i goes to shard i mod w; its TxId carries the
/// leader as origin node.
inline void assign_leaders(std::vector<Transaction>& txs, std::int32_t shard_count) {
  for (auto& tx : txs) {
    tx.leader_shard = static_cast<ShardIndex>(tx.id.seq % shard_count);
    tx.id.origin_node = tx.leader_shard;
  }
}

[[nodiscard]] inline std::vector<Transaction> gen_transactions(
    std::int32_t count, const std::vector<AccountInit>& accounts, std::int32_t constraints_per_tx,
    std::uint64_t seed, const TxGenOptions& opt = {}) {
  if (accounts.empty()) throw std::invalid_argument("no accounts to draw from");
  if (constraints_per_tx < 1) throw std::invalid_argument("constraints_per_tx must be >= 1");
  if (static_cast<std::int64_t>(accounts.size()) < constraints_per_tx + 1)
    throw std::invalid_argument("need at least constraints_per_tx + 1 accounts");
  if (accounts.size() < 2) throw std::invalid_argument("a transfer needs two accounts");

  const auto n = static_cast<std::int64_t>(accounts.size());
  std::mt19937_64 transfers(mix_seed(seed, 0x7a5f));
  std::uniform_int_distribution<std::int64_t> pick(0, n - 1);
  std::uniform_int_distribution<Balance> amount(opt.min_amount, opt.max_amount);

  std::vector<Transaction> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int32_t i = 0; i < count; ++i) {
    std::int64_t from = pick(transfers);
    std::int64_t to = pick(transfers);
    while (to == from) to = pick(transfers);
    Balance amt = amount(transfers);

    Transaction tx;
    tx.id = TxId{static_cast<SimTime>(i) * opt.arrival_interval_ms, 0, i};
    const auto& a = accounts[static_cast<std::size_t>(from)].id;
    const auto& b = accounts[static_cast<std::size_t>(to)].id;
    tx.conditions.push_back({a, Comparator::GreaterEqual, amt});

    // Per-transaction stream: the k-th extra condition is the same for every
    // constraints_per_tx >= k + 1.
    std::mt19937_64 extras(mix_seed(seed, 0x10000ull + static_cast<std::uint64_t>(i)));
    std::uniform_int_distribution<Balance> threshold(0, opt.extra_threshold_max);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::set<std::int64_t> used{from, to};
    for (std::int32_t k = 1; k < constraints_per_tx; ++k) {
      std::int64_t c = pick(extras);
      while (used.contains(c)) c = pick(extras);
      used.insert(c);
      Balance th = threshold(extras);
      bool failing = coin(extras) < opt.failing_fraction;
      if (failing) th = std::numeric_limits<Balance>::max() / 4;
      tx.conditions.push_back({accounts[static_cast<std::size_t>(c)].id, Comparator::GreaterEqual, th});
    }
    tx.updates.push_back({a, -amt});
    tx.updates.push_back({b, amt});
    out.push_back(std::move(tx));
  }
  assign_leaders(out, opt.shard_count);
  return out;
}

[[nodiscard]] inline BalanceMap initial_balances(const std::vector<AccountInit>& accounts) {
  BalanceMap m;
  for (const auto& a : accounts) m[a.id] = a.balance;
  return m;
}

}  // namespace lockless
