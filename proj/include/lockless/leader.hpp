#pragma once

// Leader-shard state machine: transaction pool, phases 1/3/5/7 and the leader
// side of force rollback. The same coordinator drives the two baselines, which
// skip the release round (phase 5 completes the transaction directly).

#include <cassert>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "lockless/core.hpp"
#include "lockless/messages.hpp"

namespace lockless {

enum class TxOutcome : std::uint8_t { Pending, Committed, Discarded };

inline std::string_view to_string(TxOutcome o) {
  switch (o) {
    case TxOutcome::Pending: return "pending";
    case TxOutcome::Committed: return "committed";
    case TxOutcome::Discarded: return "discarded";
  }
  return "?";
}

/// Lifecycle record reported to the metrics sink.
struct TxRecord {
  TxId tx;
  ShardIndex leader = 0;
  SimTime submitted_at = 0;
  std::uint32_t attempts = 0;
  TxOutcome outcome = TxOutcome::Pending;
  SimTime commit_time = 0;  // completion time for discarded transactions
};

struct ProtocolViolation : std::logic_error {
  using std::logic_error::logic_error;
};

struct TxProgress {
  enum class Stage : std::uint8_t { Voting, Outcome, Finalizing, RollingBack };

  std::shared_ptr<const Transaction> tx;
  std::vector<std::shared_ptr<const Subtransaction>> subtxs;
  std::vector<ShardIndex> destinations;
  std::uint32_t attempt = 0;
  Stage stage = Stage::Voting;
  // Acks are indexed like `subtxs`; one object per subtransaction means a shard
  // holding two objects of the same transaction answers twice.
  std::vector<std::optional<MessageKind>> votes;
  std::vector<std::optional<MessageKind>> phase5_acks;
  std::vector<std::optional<MessageKind>> phase7_acks;
  std::vector<bool> rollback_acks;
  MessageKind finalize_with = MessageKind::Release;
  bool aborting = false;
};

struct CommittedTx {
  std::shared_ptr<const Transaction> tx;
  std::vector<std::shared_ptr<const Subtransaction>> subtxs;
  std::uint32_t attempt = 0;
  // Set while a force rollback of this committed transaction is collecting acks.
  std::optional<std::vector<bool>> rollback_acks;
};

struct LeaderCounters {
  std::uint64_t restarts = 0;
  std::uint64_t rollbacks = 0;
  std::uint64_t discards = 0;
  std::uint64_t stale_dropped = 0;
};

class LeaderShard {
 public:
  LeaderShard(ShardIndex id, Partition partition, Protocol protocol, std::int32_t pipeline_depth)
      : id_(id), partition_(partition), protocol_(protocol), pipeline_depth_(pipeline_depth) {
    if (pipeline_depth < 1) throw ConfigError("pipeline_depth must be >= 1");
  }

  [[nodiscard]] ShardIndex id() const { return id_; }

  /// Admits a transaction into the pool P_k.
  void submit(std::shared_ptr<const Transaction> tx, SimTime now) {
    if (tx->leader_shard != id_)
      throw ContractViolation("transaction " + to_string(tx->id) + " submitted to wrong leader");
    if (records_.contains(tx->id))
      throw ContractViolation("duplicate transaction id " + to_string(tx->id));
    records_[tx->id] = TxRecord{tx->id, id_, now, 0, TxOutcome::Pending, 0};
    pool_.emplace(tx->id, std::move(tx));
  }

  /// Reserves phase-1 decisions for free pipeline slots; returns how many
  /// decisions the caller should schedule.
  std::int32_t claim_dispatch_slots() {
    std::int32_t claimed = 0;
    while (static_cast<std::int64_t>(in_flight_.size()) + pending_dispatch_ < pipeline_depth_ &&
           static_cast<std::int64_t>(pool_.size()) > pending_dispatch_) {
      ++pending_dispatch_;
      ++claimed;
    }
    return claimed;
  }

  /// Phase 1: dequeue the minimum TxId, split it and dispatch its
  /// subtransactions in parallel.
  Outbox phase1_dispatch(SimTime /*now*/) {
    if (pending_dispatch_ > 0) --pending_dispatch_;
    Outbox out;
    if (pool_.empty()) return out;
    auto node = pool_.extract(pool_.begin());
    auto tx = std::move(node.mapped());

    TxProgress p;
    p.tx = tx;
    for (auto& s : split(*tx, partition_)) p.subtxs.push_back(std::make_shared<Subtransaction>(std::move(s)));
    std::vector<Subtransaction> plain;
    for (const auto& s : p.subtxs) plain.push_back(*s);
    p.destinations = destination_shards(plain);
    auto& rec = records_.at(tx->id);
    p.attempt = ++rec.attempts;
    p.votes.assign(p.subtxs.size(), std::nullopt);

    for (const auto& s : p.subtxs) {
      auto m = make_msg(MessageKind::SubtxDispatch, tx->id, p.attempt, s->object);
      m.subtx = s;
      out.push_back({s->shard, std::move(m)});
    }
    in_flight_.emplace(tx->id, std::move(p));
    return out;
  }

  /// Routes a leader-bound message to its phase handler.
  Outbox handle(const ProtocolMessage& m, SimTime now) {
    switch (m.kind) {
      case MessageKind::CommitVote:
      case MessageKind::AbortVote: return phase3_collect(m, now);
      case MessageKind::Committed:
      case MessageKind::Aborted: return phase5_collect(m, now);
      case MessageKind::RestartVote: {
        // A restart vote answers a commit (phase 5) in the lockless protocol;
        // in the locked baseline it can also answer a dispatch (lock timeout).
        auto it = in_flight_.find(m.tx);
        if (it != in_flight_.end() && it->second.stage == TxProgress::Stage::Voting)
          return phase3_collect(m, now);
        return phase5_collect(m, now);
      }
      case MessageKind::Released:
      case MessageKind::Restarted: return phase7_collect(m, now);
      case MessageKind::ForceRollback: return handle_force_rollback(m, now);
      case MessageKind::Rollbacked: return handle_rollbacked(m, now);
      default:
        throw ProtocolViolation("leader received " + std::string(to_string(m.kind)));
    }
  }

  /// Phase 3: all commit votes -> Commit broadcast; any abort vote -> Abort
  /// broadcast without waiting for the remaining votes.
  Outbox phase3_collect(const ProtocolMessage& m, SimTime /*now*/) {
    auto* p = live_progress(m, TxProgress::Stage::Voting);
    if (!p) return {};
    auto idx = index_of(*p, m.object);
    if (!idx) return drop();
    p->votes[*idx] = m.kind;

    if (m.kind == MessageKind::AbortVote) {
      p->stage = TxProgress::Stage::Outcome;
      p->aborting = true;
      p->phase5_acks.assign(p->subtxs.size(), std::nullopt);
      return broadcast(*p, MessageKind::Abort);
    }
    if (m.kind == MessageKind::RestartVote) return begin_restart(*p);
    for (const auto& v : p->votes)
      if (v != MessageKind::CommitVote) return {};
    p->stage = TxProgress::Stage::Outcome;
    p->phase5_acks.assign(p->subtxs.size(), std::nullopt);
    return broadcast(*p, MessageKind::Commit);
  }

  /// Phase 5: all committed -> Release (lockless) or completion (baselines);
  /// any restart vote -> Restart; all aborted -> permanent discard.
  Outbox phase5_collect(const ProtocolMessage& m, SimTime now) {
    auto* p = live_progress(m, TxProgress::Stage::Outcome);
    if (!p) return {};
    // A restart vote racing an abort broadcast is superseded by the Aborted
    // ack the same destination sends next.
    if (m.kind == MessageKind::RestartVote && p->aborting) return drop();
    auto idx = index_of(*p, m.object);
    if (!idx) return drop();
    p->phase5_acks[*idx] = m.kind;

    if (m.kind == MessageKind::RestartVote) return begin_restart(*p);

    bool all = true;
    bool any_committed = false;
    bool any_aborted = false;
    for (const auto& a : p->phase5_acks) {
      if (!a) all = false;
      else if (*a == MessageKind::Committed) any_committed = true;
      else if (*a == MessageKind::Aborted) any_aborted = true;
    }
    if (any_committed && any_aborted)
      throw ProtocolViolation("mixed committed/aborted acks for " + to_string(m.tx));
    if (!all) return {};

    if (any_aborted) {
      auto& rec = records_.at(m.tx);
      rec.outcome = TxOutcome::Discarded;
      rec.commit_time = now;
      ++counters_.discards;
      in_flight_.erase(m.tx);
      return {};
    }
    if (protocol_ != Protocol::Lockless) {
      complete(m.tx, now);
      return {};
    }
    p->stage = TxProgress::Stage::Finalizing;
    p->finalize_with = MessageKind::Release;
    p->phase7_acks.assign(p->subtxs.size(), std::nullopt);
    return broadcast(*p, MessageKind::Release);
  }

  /// Phase 7: all released -> C_k; all restarted -> back to P_k with the
  /// original TxId.
  Outbox phase7_collect(const ProtocolMessage& m, SimTime now) {
    auto* p = live_progress(m, TxProgress::Stage::Finalizing);
    if (!p) return {};
    auto expected =
        p->finalize_with == MessageKind::Release ? MessageKind::Released : MessageKind::Restarted;
    if (m.kind != expected) return drop();
    auto idx = index_of(*p, m.object);
    if (!idx) return drop();
    p->phase7_acks[*idx] = m.kind;
    for (const auto& a : p->phase7_acks)
      if (!a) return {};

    if (expected == MessageKind::Released) {
      complete(m.tx, now);
    } else {
      ++counters_.restarts;
      repool(m.tx);
    }
    return {};
  }

  /// Force-rollback request for a transaction this shard leads. Broadcasts
  /// ForceRollback to every destination of T' and suppresses its pending
  /// phase guards. Unknown or stale requests are no-ops.
  Outbox handle_force_rollback(const ProtocolMessage& m, SimTime /*now*/) {
    if (auto it = in_flight_.find(m.tx); it != in_flight_.end()) {
      auto& p = it->second;
      if (p.attempt != m.attempt || p.stage == TxProgress::Stage::RollingBack) return {};
      p.stage = TxProgress::Stage::RollingBack;
      p.rollback_acks.assign(p.subtxs.size(), false);
      return rollback_orders(p.tx->id, p.attempt, p.subtxs);
    }
    if (auto it = committed_.find(m.tx); it != committed_.end()) {
      auto& c = it->second;
      if (c.attempt != m.attempt || c.rollback_acks) return {};
      c.rollback_acks.emplace(c.subtxs.size(), false);
      return rollback_orders(c.tx->id, c.attempt, c.subtxs);
    }
    return {};
  }

  /// Collects Rollbacked acks; when every destination acknowledged, T' goes
  /// back to P_k and leaves C_k.
  Outbox handle_rollbacked(const ProtocolMessage& m, SimTime /*now*/) {
    if (auto it = in_flight_.find(m.tx); it != in_flight_.end()) {
      auto& p = it->second;
      if (p.attempt != m.attempt || p.stage != TxProgress::Stage::RollingBack) return drop();
      auto idx = index_of(p, m.object);
      if (!idx) return drop();
      p.rollback_acks[*idx] = true;
      if (all_true(p.rollback_acks)) {
        ++counters_.rollbacks;
        repool(m.tx);
      }
      return {};
    }
    if (auto it = committed_.find(m.tx); it != committed_.end()) {
      auto& c = it->second;
      if (c.attempt != m.attempt || !c.rollback_acks) return drop();
      std::optional<std::size_t> idx;
      for (std::size_t i = 0; i < c.subtxs.size(); ++i)
        if (c.subtxs[i]->object == m.object) idx = i;
      if (!idx) return drop();
      (*c.rollback_acks)[*idx] = true;
      if (all_true(*c.rollback_acks)) {
        ++counters_.rollbacks;
        auto tx = c.tx;
        committed_.erase(it);
        auto& rec = records_.at(tx->id);
        rec.outcome = TxOutcome::Pending;
        rec.commit_time = 0;
        pool_.emplace(tx->id, std::move(tx));
      }
      return {};
    }
    return drop();
  }

  /// Lowest TxId over the pool, in-flight transactions and committed
  /// transactions that are being rolled back.
  [[nodiscard]] std::optional<TxId> gossip_lowest() const {
    std::optional<TxId> best;
    auto consider = [&](const TxId& id) {
      if (!best || id < *best) best = id;
    };
    if (!pool_.empty()) consider(pool_.begin()->first);
    if (!in_flight_.empty()) consider(in_flight_.begin()->first);
    for (const auto& [id, c] : committed_)
      if (c.rollback_acks) consider(id);
    return best;
  }

  [[nodiscard]] bool idle() const {
    if (!pool_.empty() || !in_flight_.empty()) return false;
    for (const auto& [_, c] : committed_)
      if (c.rollback_acks) return false;
    return true;
  }

  /// Every submitted transaction sits in exactly one of P_k, in_flight, C_k or
  /// the discarded set, and the record outcomes agree.
  [[nodiscard]] bool conservation_holds() const {
    std::size_t discarded = 0;
    for (const auto& [id, rec] : records_) {
      int where = (pool_.contains(id) ? 1 : 0) + (in_flight_.contains(id) ? 1 : 0) +
                  (committed_.contains(id) ? 1 : 0);
      if (rec.outcome == TxOutcome::Discarded) {
        ++discarded;
        if (where != 0) return false;
      } else if (where != 1) {
        return false;
      } else if ((rec.outcome == TxOutcome::Committed) != committed_.contains(id)) {
        return false;
      }
    }
    return pool_.size() + in_flight_.size() + committed_.size() + discarded == records_.size();
  }

  [[nodiscard]] const std::map<TxId, std::shared_ptr<const Transaction>>& pool() const {
    return pool_;
  }
  [[nodiscard]] const std::map<TxId, TxProgress>& in_flight() const { return in_flight_; }
  [[nodiscard]] const std::map<TxId, CommittedTx>& committed() const { return committed_; }
  [[nodiscard]] const std::map<TxId, TxRecord>& records() const { return records_; }
  [[nodiscard]] const LeaderCounters& counters() const { return counters_; }
  [[nodiscard]] Protocol protocol() const { return protocol_; }

 private:
  TxProgress* live_progress(const ProtocolMessage& m, TxProgress::Stage stage) {
    auto it = in_flight_.find(m.tx);
    if (it == in_flight_.end() || it->second.attempt != m.attempt || it->second.stage != stage) {
      ++counters_.stale_dropped;
      return nullptr;
    }
    return &it->second;
  }

  static std::optional<std::size_t> index_of(const TxProgress& p, const AccountId& object) {
    for (std::size_t i = 0; i < p.subtxs.size(); ++i)
      if (p.subtxs[i]->object == object) return i;
    return std::nullopt;
  }

  static bool all_true(const std::vector<bool>& v) {
    for (bool b : v)
      if (!b) return false;
    return true;
  }

  Outbox drop() {
    ++counters_.stale_dropped;
    return {};
  }

  Outbox broadcast(const TxProgress& p, MessageKind kind) const {
    Outbox out;
    for (const auto& s : p.subtxs) {
      auto m = make_msg(kind, p.tx->id, p.attempt, s->object);
      m.subtx = s;
      out.push_back({s->shard, std::move(m)});
    }
    return out;
  }

  Outbox begin_restart(TxProgress& p) {
    p.stage = TxProgress::Stage::Finalizing;
    p.finalize_with = MessageKind::Restart;
    p.phase7_acks.assign(p.subtxs.size(), std::nullopt);
    return broadcast(p, MessageKind::Restart);
  }

  static Outbox rollback_orders(const TxId& tx, std::uint32_t attempt,
                                const std::vector<std::shared_ptr<const Subtransaction>>& subtxs) {
    Outbox out;
    for (const auto& s : subtxs) {
      auto m = make_msg(MessageKind::ForceRollback, tx, attempt, s->object);
      m.subtx = s;
      out.push_back({s->shard, std::move(m)});
    }
    return out;
  }

  void complete(const TxId& id, SimTime now) {
    auto node = in_flight_.extract(id);
    auto& p = node.mapped();
    auto& rec = records_.at(id);
    rec.outcome = TxOutcome::Committed;
    rec.commit_time = now;
    committed_.emplace(id, CommittedTx{p.tx, p.subtxs, p.attempt, std::nullopt});
  }

  void repool(const TxId& id) {
    auto node = in_flight_.extract(id);
    pool_.emplace(id, node.mapped().tx);
  }

  ShardIndex id_;
  Partition partition_;
  Protocol protocol_;
  std::int32_t pipeline_depth_;
  std::int64_t pending_dispatch_ = 0;

  std::map<TxId, std::shared_ptr<const Transaction>> pool_;
  std::map<TxId, TxProgress> in_flight_;
  std::map<TxId, CommittedTx> committed_;
  std::map<TxId, TxRecord> records_;
  LeaderCounters counters_;
};

}  // namespace lockless
