#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>

#include "lockless/core.hpp"

namespace lockless {

enum class MessageKind : std::uint8_t {
  SubtxDispatch,
  CommitVote,
  AbortVote,
  Commit,
  Abort,
  Committed,
  RestartVote,
  Aborted,
  Release,
  Restart,
  Released,
  Restarted,
  ForceRollback,
  Rollbacked,
  LowestIdGossip,
  ClientSubmit,
};

inline constexpr std::size_t kMessageKindCount = 16;

inline constexpr std::array<std::string_view, kMessageKindCount> kMessageKindNames = {
    "SubtxDispatch", "CommitVote", "AbortVote",  "Commit",   "Abort",         "Committed",
    "RestartVote",   "Aborted",    "Release",    "Restart",  "Released",      "Restarted",
    "ForceRollback", "Rollbacked", "LowestIdGossip", "ClientSubmit"};

inline std::string_view to_string(MessageKind k) {
  auto i = static_cast<std::size_t>(k);
  return i < kMessageKindCount ? kMessageKindNames[i] : std::string_view{"<invalid>"};
}

inline bool is_valid_kind(MessageKind k) {
  return static_cast<std::size_t>(k) < kMessageKindCount;
}

/// Protocol phase that consumes a message kind.
enum class Phase : std::uint8_t {
  Phase1,
  Phase2,
  Phase3,
  Phase4,
  Phase5,
  Phase6,
  Phase7,
  Rollback,
  Gossip,
  Arrival,
};

inline std::string_view to_string(Phase p) {
  constexpr std::array<std::string_view, 10> names = {"phase1", "phase2", "phase3", "phase4",
                                                      "phase5", "phase6", "phase7", "rollback",
                                                      "gossip", "arrival"};
  return names[static_cast<std::size_t>(p)];
}

[[nodiscard]] constexpr Phase classify(MessageKind k) {
  switch (k) {
    case MessageKind::SubtxDispatch: return Phase::Phase2;
    case MessageKind::CommitVote:
    case MessageKind::AbortVote: return Phase::Phase3;
    case MessageKind::Commit:
    case MessageKind::Abort: return Phase::Phase4;
    case MessageKind::Committed:
    case MessageKind::RestartVote:
    case MessageKind::Aborted: return Phase::Phase5;
    case MessageKind::Release:
    case MessageKind::Restart: return Phase::Phase6;
    case MessageKind::Released:
    case MessageKind::Restarted: return Phase::Phase7;
    case MessageKind::ForceRollback:
    case MessageKind::Rollbacked: return Phase::Rollback;
    case MessageKind::LowestIdGossip: return Phase::Gossip;
    case MessageKind::ClientSubmit: return Phase::Arrival;
  }
  return Phase::Gossip;
}

/// A wire message. Subtransaction-scoped kinds carry `object` (the one object
/// the subtransaction touches) and the leader-side `attempt` counter, which lets
/// a destination discard messages that belong to an abandoned attempt.
struct ProtocolMessage {
  MessageKind kind = MessageKind::LowestIdGossip;
  TxId tx;
  std::uint32_t attempt = 0;
  AccountId object;
  std::shared_ptr<const Subtransaction> subtx;  // SubtxDispatch, ForceRollback (dest -> leader)
  std::shared_ptr<const Transaction> transaction;  // ClientSubmit
  std::optional<TxId> lowest;  // LowestIdGossip; nullopt = "none"
  // ForceRollback travels both ways: destination -> leader (request) and
  // leader -> destination (order). Set on the request leg.
  bool to_leader = false;

  [[nodiscard]] SubtxKey key() const { return {tx, object}; }
};

/// True when the message is consumed by the leader role of the receiving shard.
[[nodiscard]] inline bool leader_bound(const ProtocolMessage& m) {
  switch (m.kind) {
    case MessageKind::CommitVote:
    case MessageKind::AbortVote:
    case MessageKind::Committed:
    case MessageKind::RestartVote:
    case MessageKind::Aborted:
    case MessageKind::Released:
    case MessageKind::Restarted:
    case MessageKind::Rollbacked:
    case MessageKind::ClientSubmit: return true;
    case MessageKind::ForceRollback: return m.to_leader;
    default: return false;
  }
}

struct Envelope {
  ShardIndex from = kClient;
  ShardIndex to = 0;
  SimTime send_time = 0;
  SimTime deliver_time = 0;
  ProtocolMessage msg;
};

/// Handler output: a message addressed to a shard, sent when the emitting
/// decision completes.
struct Outbound {
  ShardIndex to = 0;
  ProtocolMessage msg;
};

using Outbox = std::vector<Outbound>;

inline ProtocolMessage make_msg(MessageKind kind, const TxId& tx, std::uint32_t attempt,
                                AccountId object = {}) {
  ProtocolMessage m;
  m.kind = kind;
  m.tx = tx;
  m.attempt = attempt;
  m.object = std::move(object);
  return m;
}

}  // namespace lockless
