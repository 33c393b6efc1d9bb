#pragma once

// Destination-shard state machine for the lockless protocol: snapshot-version
// validation (phases 2/4/6), the local chain L_j, the lowest-ID override and
// the recursive suffix rollback.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "lockless/core.hpp"
#include "lockless/messages.hpp"

namespace lockless {

enum class EntryStatus : std::uint8_t { Tentative, Released };

struct ChainEntry {
  std::shared_ptr<const Subtransaction> subtx;
  std::uint32_t attempt = 0;
  EntryStatus status = EntryStatus::Tentative;
  Version snapshot_version = 0;
  std::optional<Version> resulting_version;
  Balance applied_delta = 0;

  [[nodiscard]] SubtxKey key() const { return key_of(*subtx); }
};

/// Which chain entries a force rollback removes together with its target.
enum class RollbackScope : std::uint8_t {
  ShardSuffix,   // every later entry of L_j
  ObjectSuffix,  // later entries on the same object only
};

struct DestCounters {
  std::uint64_t commit_votes = 0;
  std::uint64_t abort_votes = 0;
  std::uint64_t restart_votes = 0;
  std::uint64_t override_commits = 0;
  std::uint64_t override_rollbacks = 0;  // ForceRollback requests raised by the override
  std::uint64_t cascade_rollbacks = 0;   // ForceRollback requests raised by suffix removal
  std::uint64_t entries_undone = 0;
  std::uint64_t stale_dropped = 0;
};

/// Read-only view of one account for reporting.
struct AccountSnapshot {
  Balance balance = 0;
  Version version = 0;
};

class DestinationShard {
 public:
  DestinationShard(ShardIndex id, std::int32_t shard_count,
                   RollbackScope scope = RollbackScope::ObjectSuffix)
      : id_(id), scope_(scope), latest_gossip_(static_cast<std::size_t>(shard_count)) {}

  [[nodiscard]] ShardIndex id() const { return id_; }

  void add_account(const AccountId& id, Balance balance) {
    store_[id] = VersionedObject{id, balance, 0};
  }

  Outbox handle(const ProtocolMessage& m, SimTime now) {
    switch (m.kind) {
      case MessageKind::SubtxDispatch: return phase2_validate(m, now);
      case MessageKind::Commit:
      case MessageKind::Abort: return phase4_commit(m, now);
      case MessageKind::Release:
      case MessageKind::Restart: return phase6_finalize(m, now);
      case MessageKind::ForceRollback: return handle_force_rollback(m, now);
      default: return {};
    }
  }

  /// Phase 2: snapshot the object version and check the conditions plus the
  /// update's validity. Success joins R(O_d) (and W(O_d) for writers).
  Outbox phase2_validate(const ProtocolMessage& m, SimTime /*now*/) {
    if (is_dead(m.key(), m.attempt) || !m.subtx) return drop();
    const auto& s = *m.subtx;
    auto obj = store_.find(s.object);
    bool ok = obj != store_.end() && s.shard == id_ && subtx_admissible(s, obj->second);
    if (!ok) {
      ++counters_.abort_votes;
      return {reply(s, MessageKind::AbortVote, m.attempt)};
    }
    auto key = m.key();
    active_[key] = Active{m.subtx, m.attempt, obj->second.version, s.writes()};
    readers_[s.object].insert(key);
    if (s.writes()) writers_[s.object].insert(key);
    ++counters_.commit_votes;
    return {reply(s, MessageKind::CommitVote, m.attempt)};
  }

  /// Phase 4. Commit is eligible when no other writer holds the object (or the
  /// subtransaction is the only reader-writer) and the version still equals
  /// the snapshot, or when the parent is the lowest known TxId. The update is
  /// applied provisionally and a tentative chain entry appended.
  Outbox phase4_commit(const ProtocolMessage& m, SimTime /*now*/) {
    auto key = m.key();
    if (m.kind == MessageKind::Abort) {
      forget(key, m.attempt);
      return {reply_to(m, MessageKind::Aborted)};
    }

    auto it = active_.find(key);
    if (it == active_.end() || it->second.attempt != m.attempt) return drop();
    auto& st = it->second;
    const auto& s = *st.subtx;
    auto& obj = store_.at(s.object);

    auto& writers = writers_[s.object];
    auto& readers = readers_[s.object];
    bool other_writer = std::any_of(writers.begin(), writers.end(),
                                    [&](const SubtxKey& k) { return k != key; });
    bool other_reader = std::any_of(readers.begin(), readers.end(),
                                    [&](const SubtxKey& k) { return k != key; });
    bool sets_ok = !other_writer || (st.writer && !other_reader);
    bool normal = sets_ok && obj.version == st.snapshot_version;
    bool lowest = lowest_known_ && *lowest_known_ == key.tx;

    Outbox out;
    if (!normal && !lowest) {
      ++counters_.restart_votes;
      return {reply(s, MessageKind::RestartVote, st.attempt)};
    }
    if (!normal) {
      // Override: the oldest transaction in the system evicts every other
      // writer of the object before it appends.
      ++counters_.override_commits;
      std::vector<SubtxKey> victims;
      for (const auto& k : writers)
        if (k != key) victims.push_back(k);
      for (const auto& v : victims) {
        auto vit = active_.find(v);
        if (vit == active_.end()) continue;
        auto victim = vit->second;
        ++counters_.override_rollbacks;
        out.push_back(rollback_request(*victim.subtx, victim.attempt));
        rollback_local(v, victim.attempt, out);
      }
    }
    // Conditions are re-checked against the current balance: a provisional
    // delta seen in phase 2 may have been undone since.
    if (!subtx_admissible(s, obj)) {
      ++counters_.restart_votes;
      out.push_back(reply(s, MessageKind::RestartVote, st.attempt));
      return out;
    }
    obj.balance += s.delta();
    chain_.push_back(ChainEntry{st.subtx, st.attempt, EntryStatus::Tentative, st.snapshot_version,
                                std::nullopt, s.delta()});
    st.has_entry = true;
    out.push_back(reply(s, MessageKind::Committed, st.attempt));
    return out;
  }

  /// Phase 6. Release bumps the version of written objects and finalizes the
  /// chain entry; Restart undoes the provisional delta and drops the entry.
  Outbox phase6_finalize(const ProtocolMessage& m, SimTime /*now*/) {
    auto key = m.key();
    if (m.kind == MessageKind::Restart) {
      forget(key, m.attempt);
      return {reply_to(m, MessageKind::Restarted)};
    }

    auto it = active_.find(key);
    if (it == active_.end() || it->second.attempt != m.attempt || !it->second.has_entry)
      return drop();
    auto pos = find_entry(key, m.attempt);
    if (pos == chain_.size() || chain_[pos].status != EntryStatus::Tentative)
      throw ContractViolation("release without tentative entry for " + to_string(key.tx));
    auto& entry = chain_[pos];
    auto& obj = store_.at(key.object);
    if (it->second.writer) {
      ++obj.version;
      entry.resulting_version = obj.version;
    }
    entry.status = EntryStatus::Released;
    const auto& s = *it->second.subtx;
    auto r = reply(s, MessageKind::Released, m.attempt);
    erase_active(key, m.attempt);
    return {r};
  }

  /// Force rollback of T'_{x,j}: leave R/W, remove the suffix Z starting at its
  /// chain entry (undoing balances and versions in reverse order), acknowledge
  /// to T''s leader and ask the leaders of the other members of Z to roll
  /// back too. Idempotent.
  Outbox handle_force_rollback(const ProtocolMessage& m, SimTime /*now*/) {
    Outbox out;
    rollback_local(m.key(), m.attempt, out);
    out.push_back(reply_to(m, MessageKind::Rollbacked));
    return out;
  }

  /// Records the sender's latest lowest TxId and recomputes T''_l.
  void update_lowest(ShardIndex from, std::optional<TxId> lowest) {
    latest_gossip_.at(static_cast<std::size_t>(from)) = lowest;
    lowest_known_.reset();
    for (const auto& v : latest_gossip_)
      if (v && (!lowest_known_ || *v < *lowest_known_)) lowest_known_ = v;
  }

  [[nodiscard]] std::optional<TxId> lowest_known() const { return lowest_known_; }

  [[nodiscard]] std::optional<AccountSnapshot> query(const AccountId& id) const {
    auto it = store_.find(id);
    if (it == store_.end()) return std::nullopt;
    return AccountSnapshot{it->second.balance, it->second.version};
  }

  [[nodiscard]] const std::map<AccountId, VersionedObject>& store() const { return store_; }
  [[nodiscard]] const std::vector<ChainEntry>& chain() const { return chain_; }
  [[nodiscard]] const DestCounters& counters() const { return counters_; }

  [[nodiscard]] std::set<SubtxKey> read_set(const AccountId& o) const {
    auto it = readers_.find(o);
    return it == readers_.end() ? std::set<SubtxKey>{} : it->second;
  }
  [[nodiscard]] std::set<SubtxKey> write_set(const AccountId& o) const {
    auto it = writers_.find(o);
    return it == writers_.end() ? std::set<SubtxKey>{} : it->second;
  }
  [[nodiscard]] std::optional<Version> snapshot_of(const SubtxKey& k) const {
    auto it = active_.find(k);
    if (it == active_.end()) return std::nullopt;
    return it->second.snapshot_version;
  }

  /// W(O_d) ⊆ R(O_d) and every R member has a snapshot.
  [[nodiscard]] bool set_invariants_hold() const {
    for (const auto& [obj, ws] : writers_) {
      auto rit = readers_.find(obj);
      for (const auto& k : ws)
        if (rit == readers_.end() || !rit->second.contains(k)) return false;
    }
    for (const auto& [obj, rs] : readers_)
      for (const auto& k : rs)
        if (!active_.contains(k)) return false;
    return true;
  }

  /// No subtransaction is mid-protocol on this shard.
  [[nodiscard]] bool quiescent() const {
    return active_.empty() && std::none_of(chain_.begin(), chain_.end(), [](const ChainEntry& e) {
             return e.status == EntryStatus::Tentative;
           });
  }

 private:
  struct Active {
    std::shared_ptr<const Subtransaction> subtx;
    std::uint32_t attempt = 0;
    Version snapshot_version = 0;
    bool writer = false;
    bool has_entry = false;
  };

  Outbound reply(const Subtransaction& s, MessageKind kind, std::uint32_t attempt) const {
    return {s.leader, make_msg(kind, s.parent, attempt, s.object)};
  }

  static Outbound reply_to(const ProtocolMessage& m, MessageKind kind) {
    if (!m.subtx) throw ContractViolation("leader order without subtransaction identity");
    return {m.subtx->leader, make_msg(kind, m.tx, m.attempt, m.object)};
  }

  static Outbound rollback_request(const Subtransaction& s, std::uint32_t attempt) {
    auto m = make_msg(MessageKind::ForceRollback, s.parent, attempt, s.object);
    m.subtx = std::make_shared<Subtransaction>(s);
    m.to_leader = true;
    return {s.leader, std::move(m)};
  }

  Outbox drop() {
    ++counters_.stale_dropped;
    return {};
  }

  [[nodiscard]] bool is_dead(const SubtxKey& key, std::uint32_t attempt) const {
    auto it = dead_below_.find(key);
    return it != dead_below_.end() && attempt < it->second;
  }

  void bury(const SubtxKey& key, std::uint32_t attempt) {
    auto& floor = dead_below_[key];
    floor = std::max(floor, attempt + 1);
  }

  std::size_t find_entry(const SubtxKey& key, std::uint32_t attempt) const {
    for (std::size_t i = chain_.size(); i-- > 0;)
      if (chain_[i].attempt == attempt && chain_[i].key() == key) return i;
    return chain_.size();
  }

  void erase_active(const SubtxKey& key, std::uint32_t attempt) {
    auto it = active_.find(key);
    if (it != active_.end() && it->second.attempt == attempt) {
      readers_[key.object].erase(key);
      writers_[key.object].erase(key);
      active_.erase(it);
    }
    bury(key, attempt);
  }

  /// Abort/Restart cleanup: undo a tentative entry if present, leave R/W.
  void forget(const SubtxKey& key, std::uint32_t attempt) {
    auto it = active_.find(key);
    if (it != active_.end() && it->second.attempt == attempt && it->second.has_entry) {
      auto pos = find_entry(key, attempt);
      if (pos < chain_.size() && chain_[pos].status == EntryStatus::Tentative) {
        store_.at(key.object).balance -= chain_[pos].applied_delta;
        chain_.erase(chain_.begin() + static_cast<std::ptrdiff_t>(pos));
      }
    }
    erase_active(key, attempt);
  }

  /// Removes `key` (at `attempt`) from R/W and its chain suffix. Requests
  /// rollback of the other transactions found in the suffix.
  void rollback_local(const SubtxKey& key, std::uint32_t attempt, Outbox& out) {
    erase_active(key, attempt);
    auto pos = find_entry(key, attempt);
    if (pos == chain_.size()) return;

    std::vector<std::size_t> suffix;
    for (std::size_t i = pos; i < chain_.size(); ++i)
      if (i == pos || scope_ == RollbackScope::ShardSuffix || chain_[i].subtx->object == key.object)
        suffix.push_back(i);

    for (auto i = suffix.rbegin(); i != suffix.rend(); ++i) {
      auto& e = chain_[*i];
      auto& obj = store_.at(e.subtx->object);
      obj.balance -= e.applied_delta;
      if (e.resulting_version) {
        if (obj.version != *e.resulting_version)
          throw ContractViolation("version undo out of order on " + obj.id);
        --obj.version;
      }
      ++counters_.entries_undone;
    }
    std::vector<ChainEntry> removed;
    for (auto i = suffix.rbegin(); i != suffix.rend(); ++i) {
      removed.push_back(std::move(chain_[*i]));
      chain_.erase(chain_.begin() + static_cast<std::ptrdiff_t>(*i));
    }
    std::reverse(removed.begin(), removed.end());

    for (const auto& e : removed) {
      auto k = e.key();
      if (k == key) continue;
      erase_active(k, e.attempt);
      ++counters_.cascade_rollbacks;
      out.push_back(rollback_request(*e.subtx, e.attempt));
    }
  }

  ShardIndex id_;
  RollbackScope scope_;
  std::map<AccountId, VersionedObject> store_;
  std::map<SubtxKey, Active> active_;
  std::map<AccountId, std::set<SubtxKey>> readers_;
  std::map<AccountId, std::set<SubtxKey>> writers_;
  std::map<SubtxKey, std::uint32_t> dead_below_;
  std::vector<ChainEntry> chain_;
  std::vector<std::optional<TxId>> latest_gossip_;
  std::optional<TxId> lowest_known_;
  DestCounters counters_;
};

}  // namespace lockless
