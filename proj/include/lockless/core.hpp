#pragma once

// Domain model shared by every protocol component: transaction identity,
// shard configuration, accounts, conditions/updates and the split of a
// transaction into single-object subtransactions.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace lockless {

/// Simulated milliseconds.
using SimTime = std::int64_t;
using ShardIndex = std::int32_t;
using Balance = std::int64_t;
using Version = std::int64_t;

inline constexpr ShardIndex kClient = -1;

/// Globally ordered transaction identifier. Ordering is timestamp-major with
/// (origin_node, seq) as tie-breakers, so smaller means older and higher
/// priority.
struct TxId {
  SimTime timestamp = 0;
  std::int32_t origin_node = 0;
  std::int64_t seq = 0;

  friend constexpr auto operator<=>(const TxId&, const TxId&) = default;
};

inline std::string to_string(const TxId& id) {
  return "T(" + std::to_string(id.timestamp) + "," + std::to_string(id.origin_node) + "," +
         std::to_string(id.seq) + ")";
}

enum class Protocol : std::uint8_t { Lockless, Locked, NoLock };

inline std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::Lockless: return "lockless";
    case Protocol::Locked: return "locked";
    case Protocol::NoLock: return "nolock";
  }
  return "?";
}

inline Protocol protocol_from_string(std::string_view s) {
  if (s == "lockless") return Protocol::Lockless;
  if (s == "locked") return Protocol::Locked;
  if (s == "nolock") return Protocol::NoLock;
  throw std::invalid_argument("unknown protocol: " + std::string(s));
}

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShardConfig {
  std::int32_t shard_count = 4;
  std::int32_t nodes_per_shard = 4;
  std::int32_t byzantine_per_shard = 1;
  SimTime delta1 = 5;   // max message delay
  SimTime delta2 = 50;  // lowest-id gossip period
  SimTime delta3 = 30;  // consensus decision delay
  SimTime min_delay = 1;
  // Clock-skew constant. With a single simulated clock skew is zero, so this
  // only enters the liveness bound.
  std::int64_t clock_skew_c = 1;

  void validate() const {
    if (shard_count < 1) throw ConfigError("shard_count must be >= 1");
    if (nodes_per_shard <= 3 * byzantine_per_shard)
      throw ConfigError("nodes_per_shard must exceed 3 * byzantine_per_shard");
    if (byzantine_per_shard < 0) throw ConfigError("byzantine_per_shard must be >= 0");
    if (delta1 <= 0) throw ConfigError("delta1 must be > 0");
    if (delta2 <= 0) throw ConfigError("delta2 must be > 0");
    if (delta3 < 0) throw ConfigError("delta3 must be >= 0");
    if (min_delay < 1 || min_delay > delta1) throw ConfigError("min_delay must be in [1, delta1]");
    if (clock_skew_c < 0) throw ConfigError("clock_skew_c must be >= 0");
  }
};

using AccountId = std::string;

/// Fixed partition function: FNV-1a over the account name, modulo shard count.
/// Stable across platforms and standard libraries.
class Partition {
 public:
  explicit Partition(std::int32_t shard_count) : shard_count_(shard_count) {
    if (shard_count < 1) throw ConfigError("partition needs at least one shard");
  }

  /// Hash placement with explicit overrides for pinned accounts.
  Partition(std::int32_t shard_count, std::map<AccountId, ShardIndex> pinned) : Partition(shard_count) {
    for (const auto& [acct, shard] : pinned)
      if (shard < 0 || shard >= shard_count) throw ConfigError("account " + acct + " pinned outside [0, w)");
    pinned_ = std::make_shared<const std::map<AccountId, ShardIndex>>(std::move(pinned));
  }

  [[nodiscard]] ShardIndex operator()(std::string_view account) const {
    if (pinned_) {
      auto it = pinned_->find(std::string(account));
      if (it != pinned_->end()) return it->second;
    }
    std::uint64_t h = 14695981039346656037ull;  // FNV-1a
    for (unsigned char ch : account) {
      h ^= ch;
      h *= 1099511628211ull;
    }
    return static_cast<ShardIndex>(h % static_cast<std::uint64_t>(shard_count_));
  }

  [[nodiscard]] std::int32_t shard_count() const { return shard_count_; }

 private:
  std::int32_t shard_count_;
  std::shared_ptr<const std::map<AccountId, ShardIndex>> pinned_;
};

struct VersionedObject {
  AccountId id;
  Balance balance = 0;
  Version version = 0;
};

enum class Comparator : std::uint8_t { GreaterEqual, LessEqual, Equal };

inline std::string_view to_string(Comparator c) {
  switch (c) {
    case Comparator::GreaterEqual: return ">=";
    case Comparator::LessEqual: return "<=";
    case Comparator::Equal: return "==";
  }
  return "?";
}

inline Comparator comparator_from_string(std::string_view s) {
  if (s == ">=") return Comparator::GreaterEqual;
  if (s == "<=") return Comparator::LessEqual;
  if (s == "==" || s == "=") return Comparator::Equal;
  throw std::invalid_argument("unknown comparator: " + std::string(s));
}

struct Condition {
  AccountId account;
  Comparator comparator = Comparator::GreaterEqual;
  Balance amount = 0;

  friend bool operator==(const Condition&, const Condition&) = default;
};

struct Update {
  AccountId account;
  Balance delta = 0;

  friend bool operator==(const Update&, const Update&) = default;
};

struct Transaction {
  TxId id;
  ShardIndex leader_shard = 0;
  std::vector<Condition> conditions;
  std::vector<Update> updates;

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

/// Fragment of a transaction for one object on its home shard.
struct Subtransaction {
  TxId parent;
  ShardIndex leader = 0;
  ShardIndex shard = 0;
  AccountId object;
  std::vector<Condition> conditions;
  std::optional<Update> update;

  [[nodiscard]] bool writes() const { return update.has_value() && update->delta != 0; }
  [[nodiscard]] Balance delta() const { return update ? update->delta : 0; }
};

/// Identity of a subtransaction: parent transaction plus the object it touches.
struct SubtxKey {
  TxId tx;
  AccountId object;

  friend auto operator<=>(const SubtxKey&, const SubtxKey&) = default;
};

inline SubtxKey key_of(const Subtransaction& s) { return {s.parent, s.object}; }

struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

struct MalformedTransaction : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

[[nodiscard]] inline bool evaluate_condition(const Condition& cond, const VersionedObject& obj) {
  if (cond.account != obj.id)
    throw ContractViolation("condition on " + cond.account + " evaluated against " + obj.id);
  switch (cond.comparator) {
    case Comparator::GreaterEqual: return obj.balance >= cond.amount;
    case Comparator::LessEqual: return obj.balance <= cond.amount;
    case Comparator::Equal: return obj.balance == cond.amount;
  }
  return false;
}

/// True when every condition holds and the update does not overdraw `obj`.
[[nodiscard]] inline bool subtx_admissible(const Subtransaction& s, const VersionedObject& obj) {
  for (const auto& c : s.conditions)
    if (!evaluate_condition(c, obj)) return false;
  return obj.balance + s.delta() >= 0;
}

/// Accounts referenced by `tx` in first-appearance order (conditions first).
[[nodiscard]] inline std::vector<AccountId> referenced_accounts(const Transaction& tx) {
  std::vector<AccountId> out;
  auto add = [&](const AccountId& a) {
    if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
  };
  for (const auto& c : tx.conditions) add(c.account);
  for (const auto& u : tx.updates) add(u.account);
  return out;
}

/// One subtransaction per distinct account. Conditions on an account are kept
/// (conjunction), multiple updates on an account are merged into a net delta.
[[nodiscard]] inline std::vector<Subtransaction> split(const Transaction& tx,
                                                       const Partition& partition) {
  auto accounts = referenced_accounts(tx);
  if (accounts.empty())
    throw MalformedTransaction("transaction " + to_string(tx.id) + " references no account");

  std::vector<Subtransaction> out;
  out.reserve(accounts.size());
  for (const auto& acct : accounts) {
    Subtransaction s;
    s.parent = tx.id;
    s.leader = tx.leader_shard;
    s.shard = partition(acct);
    s.object = acct;
    for (const auto& c : tx.conditions)
      if (c.account == acct) s.conditions.push_back(c);
    bool touched = false;
    Balance net = 0;
    for (const auto& u : tx.updates)
      if (u.account == acct) {
        touched = true;
        net += u.delta;
      }
    if (touched) s.update = Update{acct, net};
    out.push_back(std::move(s));
  }
  return out;
}

/// Destination shards S(T_i), ascending and de-duplicated.
[[nodiscard]] inline std::vector<ShardIndex> destination_shards(
    const std::vector<Subtransaction>& subtxs) {
  std::vector<ShardIndex> out;
  for (const auto& s : subtxs) out.push_back(s.shard);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

[[nodiscard]] inline Balance net_delta(const Transaction& tx) {
  Balance sum = 0;
  for (const auto& u : tx.updates) sum += u.delta;
  return sum;
}

using BalanceMap = std::map<AccountId, Balance>;

/// Net delta per updated account.
[[nodiscard]] inline BalanceMap account_deltas(const Transaction& tx) {
  BalanceMap m;
  for (const auto& u : tx.updates) m[u.account] += u.delta;
  return m;
}

[[nodiscard]] inline Balance total_balance(const BalanceMap& m) {
  Balance sum = 0;
  for (const auto& [_, b] : m) sum += b;
  return sum;
}

}  // namespace lockless
