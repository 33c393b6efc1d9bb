#pragma once

// Deterministic discrete-event simulation of a sharded system. A single
// simulated clock drives message delivery (uniform delay in [min_delay,
// delta1]), consensus decisions (fixed delay delta3 per protocol decision),
// lowest-ID gossip every delta2, and client arrivals.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "lockless/baselines.hpp"
#include "lockless/core.hpp"
#include "lockless/destination.hpp"
#include "lockless/leader.hpp"
#include "lockless/messages.hpp"
#include "lockless/workload.hpp"

namespace lockless {

struct RunConfig {
  ShardConfig shards;
  Protocol protocol = Protocol::Lockless;
  std::int32_t pipeline_depth = 8;
  std::uint64_t seed = 1;
  SimTime horizon_ms = 3'600'000;
  bool record_trace = false;
  RollbackScope rollback_scope = RollbackScope::ObjectSuffix;
  // Lock-wait timeout for the locked baseline; 0 means 10 * delta3.
  SimTime lock_timeout_ms = 0;
  // Accounts placed on a fixed shard instead of by hash (test fixtures).
  std::map<AccountId, ShardIndex> placement;

  [[nodiscard]] SimTime effective_lock_timeout() const {
    if (lock_timeout_ms > 0) return lock_timeout_ms;
    return std::max<SimTime>(10 * shards.delta3, 10);
  }
};

struct TraceRecord {
  SimTime t_send = 0;
  SimTime t_deliver = 0;
  ShardIndex from = 0;
  ShardIndex to = 0;
  MessageKind kind = MessageKind::LowestIdGossip;
  TxId tx;
  std::uint32_t attempt = 0;
  AccountId object;
};

struct RunReport {
  Protocol protocol = Protocol::Lockless;
  std::int32_t shard_count = 0;
  std::int64_t tx_total = 0;
  std::int64_t committed = 0;
  std::int64_t discarded = 0;
  std::int64_t restarts_total = 0;
  std::int64_t rollbacks_total = 0;
  SimTime sim_duration_ms = 0;
  double throughput = 0.0;  // committed per simulated second
  double avg_exec_time_ms = 0.0;
  std::vector<TxRecord> per_tx;

  bool quiesced = true;
  std::string diagnostics;
  std::int64_t restart_votes = 0;
  std::int64_t override_rollbacks = 0;
  std::int64_t cascade_rollbacks = 0;
  std::int64_t lock_timeouts = 0;
  std::int64_t messages_sent = 0;
  SimTime end_time = 0;

  BalanceMap initial_balances;
  BalanceMap final_balances;
  std::vector<std::vector<ChainEntry>> chains;  // per shard, released entries only
  std::vector<TraceRecord> trace;
};

struct DeliverEvent {
  Envelope env;
};

/// A protocol decision taken by a shard's consensus; effects apply when the
/// event fires.
struct DecisionEvent {
  enum class Kind : std::uint8_t { Message, Dispatch, LockGrant };
  ShardIndex shard = 0;
  Kind kind = Kind::Message;
  ProtocolMessage msg;
  SubtxKey key;
};

struct TimerEvent {
  enum class Kind : std::uint8_t { Gossip, LockTimeout };
  ShardIndex shard = 0;
  Kind kind = Kind::Gossip;
  SubtxKey key;
  std::uint32_t attempt = 0;
};

struct ArrivalEvent {
  std::shared_ptr<const Transaction> tx;
};

using SimAction = std::variant<DeliverEvent, DecisionEvent, TimerEvent, ArrivalEvent>;

struct SimEvent {
  SimTime fire_time = 0;
  std::uint64_t seq = 0;
  SimAction action;
  bool background = false;  // gossip traffic; does not keep the run alive
};

/// Min-queue on (fire_time, seq).
class EventQueue {
 public:
  void push(SimTime at, SimAction action, bool background) {
    if (!background) ++foreground_;
    heap_.push(SimEvent{at, next_seq_++, std::move(action), background});
  }

  SimEvent pop() {
    SimEvent e = heap_.top();
    heap_.pop();
    if (!e.background) --foreground_;
    return e;
  }

  [[nodiscard]] bool empty() const { return heap_.empty(); }
  [[nodiscard]] std::size_t foreground() const { return foreground_; }
  [[nodiscard]] std::uint64_t issued() const { return next_seq_; }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      if (a.fire_time != b.fire_time) return a.fire_time > b.fire_time;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> heap_;
  std::uint64_t next_seq_ = 0;
  std::size_t foreground_ = 0;
};

struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Simulator {
 public:
  Simulator(RunConfig config, const Workload& workload)
      : config_(std::move(config)), partition_(config_.shards.shard_count, config_.placement),
        rng_(config_.seed) {
    config_.shards.validate();
    const auto w = config_.shards.shard_count;
    for (ShardIndex s = 0; s < w; ++s) {
      leaders_.emplace_back(s, partition_, config_.protocol, config_.pipeline_depth);
      if (config_.protocol == Protocol::Lockless)
        lockless_.emplace_back(s, w, config_.rollback_scope);
      else
        baseline_.emplace_back(s, config_.protocol);
    }
    for (const auto& a : workload.accounts) {
      auto home = partition_(a.id);
      if (initial_.contains(a.id)) throw std::invalid_argument("duplicate account " + a.id);
      initial_[a.id] = a.balance;
      if (config_.protocol == Protocol::Lockless)
        lockless_[static_cast<std::size_t>(home)].add_account(a.id, a.balance);
      else
        baseline_[static_cast<std::size_t>(home)].add_account(a.id, a.balance);
    }
    for (const auto& tx : workload.transactions) {
      if (tx.leader_shard < 0 || tx.leader_shard >= w)
        throw std::invalid_argument("transaction " + to_string(tx.id) + " has leader outside [0, w)");
      (void)split(tx, partition_);  // rejects malformed transactions up front
      queue_.push(tx.id.timestamp, ArrivalEvent{std::make_shared<Transaction>(tx)}, false);
    }
    tx_total_ = static_cast<std::int64_t>(workload.transactions.size());
    if (config_.protocol == Protocol::Lockless)
      for (ShardIndex s = 0; s < w; ++s)
        queue_.push(0, TimerEvent{s, TimerEvent::Kind::Gossip, {}, 0}, true);
  }

  /// Runs until every transaction is committed or discarded and no protocol
  /// work is pending, or until the horizon is exceeded.
  RunReport run() {
    bool quiesced = true;
    while (!queue_.empty()) {
      if (queue_.foreground() == 0 && all_idle()) break;
      auto ev = queue_.pop();
      if (ev.fire_time < now_) throw SimulationError("event scheduled in the past");
      now_ = ev.fire_time;
      if (now_ > config_.horizon_ms) {
        quiesced = false;
        break;
      }
      std::visit([this](auto& a) { this->execute(a); }, ev.action);
    }
    if (!all_idle()) quiesced = false;
    return build_report(quiesced);
  }

  [[nodiscard]] SimTime now() const { return now_; }
  [[nodiscard]] const std::vector<LeaderShard>& leaders() const { return leaders_; }
  [[nodiscard]] const std::vector<DestinationShard>& destinations() const { return lockless_; }
  [[nodiscard]] const std::vector<BaselineDestination>& baseline_destinations() const {
    return baseline_;
  }

 private:
  void send(ShardIndex from, ShardIndex to, ProtocolMessage msg) {
    if (!is_valid_kind(msg.kind)) throw SimulationError("message kind outside vocabulary");
    std::uniform_int_distribution<SimTime> delay(config_.shards.min_delay, config_.shards.delta1);
    Envelope env{from, to, now_, now_ + delay(rng_), std::move(msg)};
    ++messages_sent_;
    bool background = env.msg.kind == MessageKind::LowestIdGossip;
    queue_.push(env.deliver_time, DeliverEvent{std::move(env)}, background);
  }

  void send_all(ShardIndex from, Outbox&& out) {
    for (auto& o : out) send(from, o.to, std::move(o.msg));
  }

  void decide(DecisionEvent d) {
    queue_.push(now_ + config_.shards.delta3, std::move(d), false);
  }

  void schedule_dispatches(ShardIndex s) {
    auto n = leaders_[static_cast<std::size_t>(s)].claim_dispatch_slots();
    for (std::int32_t i = 0; i < n; ++i) decide(DecisionEvent{s, DecisionEvent::Kind::Dispatch, {}, {}});
  }

  void execute(DeliverEvent& e) {
    const auto& env = e.env;
    auto lag = env.deliver_time - env.send_time;
    if (lag <= 0 || lag > config_.shards.delta1) throw SimulationError("delivery bound violated");
    if (config_.record_trace)
      trace_.push_back({env.send_time, env.deliver_time, env.from, env.to, env.msg.kind, env.msg.tx,
                        env.msg.attempt, env.msg.object});
    switch (env.msg.kind) {
      case MessageKind::ClientSubmit: {
        auto& leader = leaders_[static_cast<std::size_t>(env.to)];
        leader.submit(env.msg.transaction, env.msg.transaction->id.timestamp);
        schedule_dispatches(env.to);
        return;
      }
      case MessageKind::LowestIdGossip:
        lockless_[static_cast<std::size_t>(env.to)].update_lowest(env.from, env.msg.lowest);
        return;
      default:
        decide(DecisionEvent{env.to, DecisionEvent::Kind::Message, env.msg, {}});
    }
  }

  void execute(DecisionEvent& d) {
    const auto s = d.shard;
    auto& leader = leaders_[static_cast<std::size_t>(s)];
    switch (d.kind) {
      case DecisionEvent::Kind::Dispatch:
        send_all(s, leader.phase1_dispatch(now_));
        break;
      case DecisionEvent::Kind::LockGrant: {
        auto fx = baseline_[static_cast<std::size_t>(s)].vote_granted(d.key);
        apply_baseline(s, std::move(fx));
        break;
      }
      case DecisionEvent::Kind::Message:
        if (leader_bound(d.msg)) {
          send_all(s, leader.handle(d.msg, now_));
        } else if (config_.protocol == Protocol::Lockless) {
          send_all(s, lockless_[static_cast<std::size_t>(s)].handle(d.msg, now_));
        } else {
          apply_baseline(s, baseline_[static_cast<std::size_t>(s)].handle(d.msg, now_));
        }
        break;
    }
    schedule_dispatches(s);
  }

  void apply_baseline(ShardIndex s, BaselineEffects fx) {
    send_all(s, std::move(fx.out));
    for (auto& k : fx.granted) decide(DecisionEvent{s, DecisionEvent::Kind::LockGrant, {}, k});
    for (auto& [k, attempt] : fx.waiting)
      queue_.push(now_ + config_.effective_lock_timeout(),
                  TimerEvent{s, TimerEvent::Kind::LockTimeout, k, attempt}, false);
  }

  void execute(TimerEvent& t) {
    if (t.kind == TimerEvent::Kind::Gossip) {
      auto lowest = leaders_[static_cast<std::size_t>(t.shard)].gossip_lowest();
      lockless_[static_cast<std::size_t>(t.shard)].update_lowest(t.shard, lowest);
      for (ShardIndex to = 0; to < config_.shards.shard_count; ++to) {
        if (to == t.shard) continue;
        ProtocolMessage m;
        m.kind = MessageKind::LowestIdGossip;
        m.lowest = lowest;
        send(t.shard, to, std::move(m));
      }
      queue_.push(now_ + config_.shards.delta2, t, true);
      return;
    }
    bool still_waiting = false;
    auto fx = baseline_[static_cast<std::size_t>(t.shard)].lock_timeout(t.key, t.attempt, still_waiting);
    apply_baseline(t.shard, std::move(fx));
    if (still_waiting)
      queue_.push(now_ + config_.effective_lock_timeout(), t, false);
  }

  void execute(ArrivalEvent& a) {
    ProtocolMessage m;
    m.kind = MessageKind::ClientSubmit;
    m.tx = a.tx->id;
    m.transaction = a.tx;
    send(kClient, a.tx->leader_shard, std::move(m));
  }

  bool all_idle() const {
    for (const auto& l : leaders_)
      if (!l.idle()) return false;
    std::int64_t resolved = 0;
    for (const auto& l : leaders_) resolved += static_cast<std::int64_t>(l.records().size());
    return resolved == tx_total_;
  }

  RunReport build_report(bool quiesced) {
    RunReport r;
    r.protocol = config_.protocol;
    r.shard_count = config_.shards.shard_count;
    r.tx_total = tx_total_;
    r.quiesced = quiesced;
    r.end_time = now_;
    r.messages_sent = messages_sent_;
    r.initial_balances = initial_;

    double exec_sum = 0.0;
    for (const auto& l : leaders_) {
      r.restarts_total += static_cast<std::int64_t>(l.counters().restarts);
      r.rollbacks_total += static_cast<std::int64_t>(l.counters().rollbacks);
      for (const auto& [id, rec] : l.records()) {
        r.per_tx.push_back(rec);
        if (rec.outcome == TxOutcome::Committed) {
          ++r.committed;
          exec_sum += static_cast<double>(rec.commit_time - rec.submitted_at);
        } else if (rec.outcome == TxOutcome::Discarded) {
          ++r.discarded;
        }
        if (rec.outcome != TxOutcome::Pending)
          r.sim_duration_ms = std::max(r.sim_duration_ms, rec.commit_time);
      }
    }
    std::sort(r.per_tx.begin(), r.per_tx.end(),
              [](const TxRecord& a, const TxRecord& b) { return a.tx < b.tx; });
    if (r.committed > 0) {
      r.avg_exec_time_ms = exec_sum / static_cast<double>(r.committed);
      if (r.sim_duration_ms > 0)
        r.throughput = static_cast<double>(r.committed) * 1000.0 / static_cast<double>(r.sim_duration_ms);
    }

    auto keep_released = [](const std::vector<ChainEntry>& chain) {
      std::vector<ChainEntry> out;
      for (const auto& e : chain)
        if (e.status == EntryStatus::Released) out.push_back(e);
      return out;
    };
    for (const auto& d : lockless_) {
      r.restart_votes += static_cast<std::int64_t>(d.counters().restart_votes);
      r.override_rollbacks += static_cast<std::int64_t>(d.counters().override_rollbacks);
      r.cascade_rollbacks += static_cast<std::int64_t>(d.counters().cascade_rollbacks);
      for (const auto& [id, obj] : d.store()) r.final_balances[id] = obj.balance;
      r.chains.push_back(keep_released(d.chain()));
    }
    for (const auto& d : baseline_) {
      r.lock_timeouts += static_cast<std::int64_t>(d.lock_timeouts());
      for (const auto& [id, obj] : d.store()) r.final_balances[id] = obj.balance;
      r.chains.push_back(keep_released(d.chain()));
    }
    if (!quiesced) {
      std::ostringstream os;
      os << "run did not quiesce by t=" << now_ << " (horizon " << config_.horizon_ms << ")";
      for (const auto& l : leaders_)
        os << "; shard " << l.id() << ": pool=" << l.pool().size()
           << " in_flight=" << l.in_flight().size();
      r.diagnostics = os.str();
    }
    r.trace = std::move(trace_);
    return r;
  }

  RunConfig config_;
  Partition partition_;
  std::mt19937_64 rng_;
  EventQueue queue_;
  SimTime now_ = 0;
  std::vector<LeaderShard> leaders_;
  std::vector<DestinationShard> lockless_;
  std::vector<BaselineDestination> baseline_;
  BalanceMap initial_;
  std::int64_t tx_total_ = 0;
  std::int64_t messages_sent_ = 0;
  std::vector<TraceRecord> trace_;
};

/// Convenience entry point.
[[nodiscard]] inline RunReport run(const RunConfig& config, const Workload& workload) {
  Simulator sim(config, workload);
  return sim.run();
}

}  // namespace lockless
