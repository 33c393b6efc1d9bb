#pragma once

// JSON and line-delimited JSON formats: workloads, account sets, run configs,
// chain dumps, traces and run reports.

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lockless/core.hpp"
#include "lockless/simulator.hpp"
#include "lockless/verifier.hpp"
#include "lockless/workload.hpp"

namespace lockless {

using nlohmann::json;

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline json to_json_value(const TxId& id) {
  return json{{"ts", id.timestamp}, {"node", id.origin_node}, {"seq", id.seq}};
}

inline TxId txid_from_json(const json& j) {
  return TxId{j.at("ts").get<SimTime>(), j.at("node").get<std::int32_t>(), j.at("seq").get<std::int64_t>()};
}

inline json to_json_value(const Transaction& tx) {
  json conds = json::array();
  for (const auto& c : tx.conditions)
    conds.push_back({{"acct", c.account}, {"cmp", std::string(to_string(c.comparator))}, {"amt", c.amount}});
  json ups = json::array();
  for (const auto& u : tx.updates) ups.push_back({{"acct", u.account}, {"delta", u.delta}});
  return json{{"id", to_json_value(tx.id)}, {"leader", tx.leader_shard}, {"conditions", conds}, {"updates", ups}};
}

inline Transaction transaction_from_json(const json& j) {
  Transaction tx;
  tx.id = txid_from_json(j.at("id"));
  tx.leader_shard = j.at("leader").get<ShardIndex>();
  for (const auto& c : j.at("conditions"))
    tx.conditions.push_back({c.at("acct").get<std::string>(),
                             comparator_from_string(c.at("cmp").get<std::string>()), c.at("amt").get<Balance>()});
  for (const auto& u : j.at("updates"))
    tx.updates.push_back({u.at("acct").get<std::string>(), u.at("delta").get<Balance>()});
  return tx;
}

inline void write_transactions(std::ostream& os, const std::vector<Transaction>& txs) {
  for (const auto& tx : txs) os << to_json_value(tx).dump() << '\n';
}

inline std::vector<Transaction> read_transactions(std::istream& is) {
  std::vector<Transaction> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(transaction_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw FormatError("workload line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline json accounts_to_json(const std::vector<AccountInit>& accounts) {
  json arr = json::array();
  for (const auto& a : accounts) arr.push_back({{"id", a.id}, {"balance", a.balance}});
  return arr;
}

inline std::vector<AccountInit> accounts_from_json(const json& j) {
  std::vector<AccountInit> out;
  for (const auto& a : j) out.push_back({a.at("id").get<std::string>(), a.at("balance").get<Balance>()});
  return out;
}

inline json balances_to_json(const BalanceMap& m) {
  json j = json::object();
  for (const auto& [id, b] : m) j[id] = b;
  return j;
}

inline BalanceMap balances_from_json(const json& j) {
  BalanceMap m;
  for (const auto& [id, b] : j.items()) m[id] = b.get<Balance>();
  return m;
}

/// Workload generation parameters carried in the run config.
struct WorkloadParams {
  std::int32_t accounts = 1000;
  Balance balance = 3000;
  std::int32_t transactions = 1500;
  std::int32_t constraints = 4;
  SimTime arrival_interval_ms = 1;
  double failing_fraction = 0.0;
};

struct RunFile {
  RunConfig run;
  WorkloadParams workload;
};

inline json to_json_value(const RunFile& f) {
  const auto& c = f.run;
  return json{{"shards", c.shards.shard_count},
              {"nodes_per_shard", c.shards.nodes_per_shard},
              {"byzantine_per_shard", c.shards.byzantine_per_shard},
              {"delta1", c.shards.delta1},
              {"delta2", c.shards.delta2},
              {"delta3", c.shards.delta3},
              {"min_delay", c.shards.min_delay},
              {"clock_skew_c", c.shards.clock_skew_c},
              {"pipeline_depth", c.pipeline_depth},
              {"seed", c.seed},
              {"horizon_ms", c.horizon_ms},
              {"protocol", std::string(to_string(c.protocol))},
              {"rollback_scope", c.rollback_scope == RollbackScope::ObjectSuffix ? "object" : "shard"},
              {"lock_timeout_ms", c.lock_timeout_ms},
              {"accounts", f.workload.accounts},
              {"balance", f.workload.balance},
              {"transactions", f.workload.transactions},
              {"constraints", f.workload.constraints},
              {"arrival_interval_ms", f.workload.arrival_interval_ms},
              {"failing_fraction", f.workload.failing_fraction}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline RunFile run_file_from_json(const json& j) {
  RunFile f;
  auto& c = f.run;
  for (const auto& [key, v] : j.items()) {
    if (key == "shards") c.shards.shard_count = v.get<std::int32_t>();
    else if (key == "nodes_per_shard") c.shards.nodes_per_shard = v.get<std::int32_t>();
    else if (key == "byzantine_per_shard") c.shards.byzantine_per_shard = v.get<std::int32_t>();
    else if (key == "delta1") c.shards.delta1 = v.get<SimTime>();
    else if (key == "delta2") c.shards.delta2 = v.get<SimTime>();
    else if (key == "delta3") c.shards.delta3 = v.get<SimTime>();
    else if (key == "min_delay") c.shards.min_delay = v.get<SimTime>();
    else if (key == "clock_skew_c") c.shards.clock_skew_c = v.get<SimTime>();
    else if (key == "pipeline_depth") c.pipeline_depth = v.get<std::int32_t>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "horizon_ms") c.horizon_ms = v.get<SimTime>();
    else if (key == "protocol") c.protocol = protocol_from_string(v.get<std::string>());
    else if (key == "rollback_scope") {
      auto s = v.get<std::string>();
      if (s == "object") c.rollback_scope = RollbackScope::ObjectSuffix;
      else if (s == "shard") c.rollback_scope = RollbackScope::ShardSuffix;
      else throw ConfigError("rollback_scope must be \"object\" or \"shard\"");
    } else if (key == "lock_timeout_ms") c.lock_timeout_ms = v.get<SimTime>();
    else if (key == "accounts") f.workload.accounts = v.get<std::int32_t>();
    else if (key == "balance") f.workload.balance = v.get<Balance>();
    else if (key == "transactions") f.workload.transactions = v.get<std::int32_t>();
    else if (key == "constraints") f.workload.constraints = v.get<std::int32_t>();
    else if (key == "arrival_interval_ms") f.workload.arrival_interval_ms = v.get<SimTime>();
    else if (key == "failing_fraction") f.workload.failing_fraction = v.get<double>();
    else throw ConfigError("unknown config key \"" + key + "\"");
  }
  c.shards.validate();
  if (c.pipeline_depth < 1) throw ConfigError("pipeline_depth must be >= 1");
  return f;
}

inline RunFile load_run_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return run_file_from_json(json::parse(in));
}

inline Workload generate_workload(const WorkloadParams& p, std::int32_t shard_count, std::uint64_t seed) {
  Workload wl;
  wl.accounts = gen_accounts(p.accounts, p.balance, seed);
  TxGenOptions opt;
  opt.shard_count = shard_count;
  opt.arrival_interval_ms = p.arrival_interval_ms;
  opt.failing_fraction = p.failing_fraction;
  wl.transactions = gen_transactions(p.transactions, wl.accounts, p.constraints, seed, opt);
  return wl;
}

inline json chain_entry_to_json(std::size_t seq, const ChainEntry& e) {
  json j{{"seq", seq},
         {"tx", to_json_value(e.subtx->parent)},
         {"subtx_object", e.subtx->object},
         {"status", e.status == EntryStatus::Released ? "released" : "tentative"},
         {"snapshot_v", e.snapshot_version},
         {"delta", e.applied_delta}};
  j["result_v"] = e.resulting_version ? json(*e.resulting_version) : json(nullptr);
  return j;
}

inline void write_chain(std::ostream& os, const std::vector<ChainEntry>& chain) {
  for (std::size_t i = 0; i < chain.size(); ++i) os << chain_entry_to_json(i, chain[i]).dump() << '\n';
}

/// Rebuilds released chain entries from a dump. Conditions come from the
/// workload so the verifier sees read/write roles exactly.
inline std::vector<ChainEntry> read_chain(std::istream& is, ShardIndex shard,
                                          const std::map<TxId, Transaction>& transactions,
                                          const Partition& partition) {
  std::vector<ChainEntry> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = json::parse(line);
    auto id = txid_from_json(j.at("tx"));
    auto object = j.at("subtx_object").get<std::string>();
    auto it = transactions.find(id);
    if (it == transactions.end()) throw FormatError("chain references unknown transaction " + to_string(id));
    std::shared_ptr<const Subtransaction> subtx;
    for (auto& s : split(it->second, partition))
      if (s.object == object) subtx = std::make_shared<Subtransaction>(std::move(s));
    if (!subtx) throw FormatError("transaction " + to_string(id) + " has no subtransaction on " + object);
    if (subtx->shard != shard) throw FormatError(object + " does not live on shard " + std::to_string(shard));
    ChainEntry e{subtx, 0, EntryStatus::Released, j.at("snapshot_v").get<Version>(), std::nullopt,
                 j.value("delta", subtx->delta())};
    if (j.at("status").get<std::string>() != "released") e.status = EntryStatus::Tentative;
    if (!j.at("result_v").is_null()) e.resulting_version = j.at("result_v").get<Version>();
    out.push_back(std::move(e));
  }
  return out;
}

inline void write_trace(std::ostream& os, const std::vector<TraceRecord>& trace) {
  for (const auto& t : trace) {
    json j{{"t_send", t.t_send}, {"t_deliver", t.t_deliver}, {"from", t.from}, {"to", t.to},
           {"kind", std::string(to_string(t.kind))}, {"tx", to_json_value(t.tx)}, {"attempt", t.attempt},
           {"object", t.object}};
    os << j.dump() << '\n';
  }
}

inline json report_to_json(const RunReport& r) {
  json per_tx = json::array();
  for (const auto& t : r.per_tx)
    per_tx.push_back({{"tx", to_json_value(t.tx)}, {"leader", t.leader}, {"submitted_at", t.submitted_at},
                      {"attempts", t.attempts}, {"outcome", std::string(to_string(t.outcome))},
                      {"commit_time", t.commit_time}});
  return json{{"protocol", std::string(to_string(r.protocol))},
              {"shard_count", r.shard_count},
              {"tx_total", r.tx_total},
              {"committed", r.committed},
              {"discarded", r.discarded},
              {"restarts_total", r.restarts_total},
              {"rollbacks_total", r.rollbacks_total},
              {"sim_duration_ms", r.sim_duration_ms},
              {"throughput", r.throughput},
              {"avg_exec_time_ms", r.avg_exec_time_ms},
              {"quiesced", r.quiesced},
              {"diagnostics", r.diagnostics},
              {"restart_votes", r.restart_votes},
              {"override_rollbacks", r.override_rollbacks},
              {"cascade_rollbacks", r.cascade_rollbacks},
              {"lock_timeouts", r.lock_timeouts},
              {"messages_sent", r.messages_sent},
              {"end_time", r.end_time},
              {"total_balance", total_balance(r.final_balances)},
              {"per_tx", per_tx}};
}

inline json verify_to_json(const VerifyReport& v) {
  json order = json::array();
  for (const auto& t : v.serialization) order.push_back(to_string(t));
  return json{{"valid", v.valid},
              {"shard_coherent", v.shard_coherent},
              {"serialization", order},
              {"replay_match", v.replay_match},
              {"violations", v.violations}};
}

}  // namespace lockless
