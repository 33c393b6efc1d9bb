#pragma once

// Comparison protocols: exclusive-lock and no-isolation destinations. Both use
// the two-round exchange (dispatch/vote, commit/ack) driven by LeaderShard in
// baseline mode, and append released entries to the local chain on commit so
// the verifier can inspect their histories.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "lockless/core.hpp"
#include "lockless/destination.hpp"
#include "lockless/messages.hpp"

namespace lockless {

enum class LockResult : std::uint8_t { Granted, Enqueued };

/// Per-shard exclusive locks: one holder per account, FIFO wait queue.
class LockTable {
 public:
  LockResult acquire(const AccountId& account, const TxId& tx) {
    auto& slot = slots_[account];
    if (!slot.holder || *slot.holder == tx) {
      slot.holder = tx;
      return LockResult::Granted;
    }
    if (std::find(slot.waiters.begin(), slot.waiters.end(), tx) == slot.waiters.end())
      slot.waiters.push_back(tx);
    return LockResult::Enqueued;
  }

  /// Releases `tx`'s hold (or queue position). Returns the waiter that now
  /// holds the lock, if any.
  std::optional<TxId> release(const AccountId& account, const TxId& tx) {
    auto it = slots_.find(account);
    if (it == slots_.end()) return std::nullopt;
    auto& slot = it->second;
    std::erase(slot.waiters, tx);
    if (slot.holder != tx) return std::nullopt;
    slot.holder.reset();
    if (slot.waiters.empty()) return std::nullopt;
    slot.holder = slot.waiters.front();
    slot.waiters.pop_front();
    return slot.holder;
  }

  [[nodiscard]] std::optional<TxId> holder(const AccountId& account) const {
    auto it = slots_.find(account);
    return it == slots_.end() ? std::nullopt : it->second.holder;
  }

  [[nodiscard]] std::vector<TxId> waiters(const AccountId& account) const {
    auto it = slots_.find(account);
    if (it == slots_.end()) return {};
    return {it->second.waiters.begin(), it->second.waiters.end()};
  }

 private:
  struct Slot {
    std::optional<TxId> holder;
    std::deque<TxId> waiters;
  };
  std::map<AccountId, Slot> slots_;
};

/// Deferred effects a baseline destination asks the simulator to schedule.
struct BaselineEffects {
  Outbox out;
  // Subtransactions granted a lock while waiting; each needs a phase-2
  // decision of its own.
  std::vector<SubtxKey> granted;
  // Lock waits that need a timeout timer.
  std::vector<std::pair<SubtxKey, std::uint32_t>> waiting;
};

class BaselineDestination {
 public:
  BaselineDestination(ShardIndex id, Protocol protocol) : id_(id), protocol_(protocol) {
    if (protocol == Protocol::Lockless)
      throw ConfigError("baseline destination needs locked or nolock protocol");
  }

  [[nodiscard]] ShardIndex id() const { return id_; }
  [[nodiscard]] Protocol protocol() const { return protocol_; }

  void add_account(const AccountId& id, Balance balance) {
    store_[id] = VersionedObject{id, balance, 0};
  }

  BaselineEffects handle(const ProtocolMessage& m, SimTime now) {
    switch (m.kind) {
      case MessageKind::SubtxDispatch: return on_dispatch(m, now);
      case MessageKind::Commit: return on_commit(m);
      case MessageKind::Abort: return on_finish(m, MessageKind::Aborted);
      case MessageKind::Restart: return on_finish(m, MessageKind::Restarted);
      default: return {};
    }
  }

  /// Phase-2 decision for a subtransaction that was waiting and now holds its
  /// lock.
  BaselineEffects vote_granted(const SubtxKey& key) {
    BaselineEffects fx;
    auto it = active_.find(key);
    if (it == active_.end() || !it->second.holds_lock || it->second.voted) return fx;
    fx.out.push_back(vote(it->second));
    return fx;
  }

  /// Lock-wait timeout. The waiter restarts when it is younger than the
  /// current holder; older waiters keep waiting (the younger member of any
  /// deadlock cycle gives way). Returns whether the wait is still pending.
  BaselineEffects lock_timeout(const SubtxKey& key, std::uint32_t attempt, bool& still_waiting) {
    BaselineEffects fx;
    still_waiting = false;
    auto it = active_.find(key);
    if (it == active_.end() || it->second.attempt != attempt || it->second.holds_lock ||
        it->second.voted)
      return fx;
    auto holder = locks_.holder(key.object);
    if (holder && key.tx > *holder) {
      it->second.voted = true;
      ++timeouts_;
      fx.out.push_back({it->second.subtx->leader,
                        make_msg(MessageKind::RestartVote, key.tx, attempt, key.object)});
      return fx;
    }
    still_waiting = true;
    return fx;
  }

  [[nodiscard]] const std::map<AccountId, VersionedObject>& store() const { return store_; }
  [[nodiscard]] const std::vector<ChainEntry>& chain() const { return chain_; }
  [[nodiscard]] const LockTable& locks() const { return locks_; }
  [[nodiscard]] std::uint64_t lock_timeouts() const { return timeouts_; }
  [[nodiscard]] bool quiescent() const { return active_.empty(); }

 private:
  struct Active {
    std::shared_ptr<const Subtransaction> subtx;
    std::uint32_t attempt = 0;
    bool holds_lock = false;
    bool voted = false;
  };

  Outbound vote(Active& a) {
    a.voted = true;
    const auto& s = *a.subtx;
    auto obj = store_.find(s.object);
    bool ok = obj != store_.end() && subtx_admissible(s, obj->second);
    return {s.leader, make_msg(ok ? MessageKind::CommitVote : MessageKind::AbortVote, s.parent,
                               a.attempt, s.object)};
  }

  bool dead(const SubtxKey& key, std::uint32_t attempt) const {
    auto it = dead_below_.find(key);
    return it != dead_below_.end() && attempt < it->second;
  }

  BaselineEffects on_dispatch(const ProtocolMessage& m, SimTime /*now*/) {
    BaselineEffects fx;
    auto key = m.key();
    if (dead(key, m.attempt) || !m.subtx) return fx;
    auto& a = active_[key];
    a = Active{m.subtx, m.attempt, false, false};
    if (protocol_ == Protocol::NoLock ||
        locks_.acquire(key.object, key.tx) == LockResult::Granted) {
      a.holds_lock = protocol_ == Protocol::Locked;
      fx.out.push_back(vote(a));
    } else {
      fx.waiting.emplace_back(key, m.attempt);
    }
    return fx;
  }

  BaselineEffects on_commit(const ProtocolMessage& m) {
    BaselineEffects fx;
    auto key = m.key();
    auto it = active_.find(key);
    if (it == active_.end() || it->second.attempt != m.attempt) return fx;
    const auto& s = *it->second.subtx;
    auto& obj = store_.at(s.object);
    obj.balance += s.delta();
    ChainEntry e{it->second.subtx, m.attempt, EntryStatus::Released, obj.version, std::nullopt,
                 s.delta()};
    if (s.writes()) e.resulting_version = ++obj.version;
    chain_.push_back(std::move(e));
    fx.out.push_back({s.leader, make_msg(MessageKind::Committed, s.parent, m.attempt, s.object)});
    finish(key, m.attempt, fx);
    return fx;
  }

  BaselineEffects on_finish(const ProtocolMessage& m, MessageKind ack) {
    BaselineEffects fx;
    if (!m.subtx) return fx;
    fx.out.push_back({m.subtx->leader, make_msg(ack, m.tx, m.attempt, m.object)});
    finish(m.key(), m.attempt, fx);
    return fx;
  }

  void finish(const SubtxKey& key, std::uint32_t attempt, BaselineEffects& fx) {
    auto& floor = dead_below_[key];
    floor = std::max(floor, attempt + 1);
    auto it = active_.find(key);
    if (it == active_.end() || it->second.attempt != attempt) return;
    active_.erase(it);
    if (protocol_ != Protocol::Locked) return;
    if (auto next = locks_.release(key.object, key.tx)) {
      SubtxKey granted{*next, key.object};
      auto g = active_.find(granted);
      if (g != active_.end()) {
        g->second.holds_lock = true;
        fx.granted.push_back(granted);
      }
    }
  }

  ShardIndex id_;
  Protocol protocol_;
  std::map<AccountId, VersionedObject> store_;
  std::map<SubtxKey, Active> active_;
  std::map<SubtxKey, std::uint32_t> dead_below_;
  std::vector<ChainEntry> chain_;
  LockTable locks_;
  std::uint64_t timeouts_ = 0;
};

}  // namespace lockless
