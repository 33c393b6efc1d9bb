#pragma once

// Command implementations shared by the bench, workload and verify tools.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "lockless/bench.hpp"
#include "lockless/json_io.hpp"
#include "lockless/simulator.hpp"
#include "lockless/verifier.hpp"
#include "lockless/workload.hpp"

namespace lockless::cli {

namespace fs = std::filesystem;

/// Log level from LOCKLESS_LOG (trace, debug, info, warn, error, off).
inline void init_logging() {
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("LOCKLESS_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
  spdlog::set_pattern("[%l] %v");
}

inline void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

inline std::vector<Transaction> read_workload(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_transactions(in);
}

// ---- workload gen ---------------------------------------------------------

struct GenOptions {
  WorkloadParams params;
  std::int32_t shards = 4;
  std::uint64_t seed = 1;
  std::string out = "workload.jsonl";
  std::string accounts_out;
};

inline void add_gen_options(CLI::App& app, GenOptions& o) {
  app.add_option("--accounts", o.params.accounts, "Number of accounts")->capture_default_str();
  app.add_option("--balance", o.params.balance, "Initial balance per account")->capture_default_str();
  app.add_option("--txs", o.params.transactions, "Number of transactions")->capture_default_str();
  app.add_option("--constraints", o.params.constraints, "Conditions per transaction")->capture_default_str();
  app.add_option("--arrival-interval", o.params.arrival_interval_ms, "Sim ms between arrivals")
      ->capture_default_str();
  app.add_option("--failing-fraction", o.params.failing_fraction, "Fraction of extra conditions made to fail")
      ->capture_default_str();
  app.add_option("--shards", o.shards, "Shard count used for leader assignment")->capture_default_str();
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app.add_option("--out", o.out, "Transactions output (JSONL)")->capture_default_str();
  app.add_option("--accounts-out", o.accounts_out, "Accounts output (JSON); default accounts.json next to --out");
}

inline int run_gen(const GenOptions& o) {
  auto wl = generate_workload(o.params, o.shards, o.seed);
  fs::path out(o.out);
  fs::path accounts = o.accounts_out.empty() ? out.parent_path() / "accounts.json" : fs::path(o.accounts_out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out.string());
  write_transactions(os, wl.transactions);
  write_file(accounts, accounts_to_json(wl.accounts).dump(2) + "\n");
  spdlog::info("wrote {} transactions to {} and {} accounts to {}", wl.transactions.size(), out.string(),
               wl.accounts.size(), accounts.string());
  return 0;
}

// ---- verify ---------------------------------------------------------------

struct VerifyOptions {
  std::string chains;
  std::string workload;
  std::string accounts;
  std::string final_balances;
  std::string report;
};

inline void add_verify_options(CLI::App& app, VerifyOptions& o) {
  app.add_option("--chains", o.chains, "Directory with chain_<k>.jsonl dumps")->required();
  app.add_option("--workload", o.workload, "Workload JSONL; default <chains>/workload.jsonl");
  app.add_option("--accounts", o.accounts, "Initial accounts JSON; default <chains>/accounts.json");
  app.add_option("--final", o.final_balances, "Final balances JSON; default <chains>/final_balances.json");
  app.add_option("--report", o.report, "Write the verification report here (JSON)");
}

inline int run_verify(const VerifyOptions& o) {
  fs::path dir(o.chains);
  auto pick = [&](const std::string& given, const char* name) { return given.empty() ? dir / name : fs::path(given); };
  auto txs = read_workload(pick(o.workload, "workload.jsonl"));
  auto initial = initial_balances(accounts_from_json(read_json(pick(o.accounts, "accounts.json"))));
  auto final_balances = balances_from_json(read_json(pick(o.final_balances, "final_balances.json")));

  std::int32_t shards = 0;
  while (fs::exists(dir / ("chain_" + std::to_string(shards) + ".jsonl"))) ++shards;
  if (shards == 0) throw std::runtime_error("no chain_<k>.jsonl files in " + dir.string());
  Partition partition(shards);
  auto index = index_transactions(txs);
  std::vector<std::vector<ChainEntry>> chains;
  for (std::int32_t s = 0; s < shards; ++s) {
    std::ifstream in(dir / ("chain_" + std::to_string(s) + ".jsonl"));
    chains.push_back(read_chain(in, s, index, partition));
  }
  auto rep = verify(chains, initial, index, final_balances);
  auto j = verify_to_json(rep);
  if (!o.report.empty()) write_file(o.report, j.dump(2) + "\n");
  spdlog::info("valid={} shard_coherent={} serialized={} replay_match={} ({} transactions in B)", rep.valid,
               rep.shard_coherent, rep.serialized, rep.replay_match, rep.serialization.size());
  for (const auto& v : rep.violations) spdlog::error("{}", v);
  return rep.ok() ? 0 : 1;
}

// ---- run ------------------------------------------------------------------

struct RunOptions {
  std::string config;
  std::string protocol;
  std::string workload;
  std::string accounts;
  std::string out = "run";
  bool trace = false;
  bool wall_clock = false;
};

inline void add_run_options(CLI::App& app, RunOptions& o) {
  app.add_option("--config", o.config, "Run config JSON (defaults apply when omitted)");
  app.add_option("--protocol", o.protocol, "lockless | locked | nolock (overrides the config)")
      ->check(CLI::IsMember({"lockless", "locked", "nolock"}));
  app.add_option("--workload", o.workload, "Workload JSONL; generated from the config when omitted");
  app.add_option("--accounts", o.accounts, "Accounts JSON to pair with --workload");
  app.add_option("--out", o.out, "Run directory")->capture_default_str();
  app.add_flag("--trace", o.trace, "Also write trace.jsonl");
  app.add_flag("--wall-clock", o.wall_clock, "Also report host wall-clock time and tx per wall second");
}

inline RunFile load_config(const std::string& path) {
  if (path.empty()) return RunFile{};
  return load_run_file(path);
}

inline int run_single(const RunOptions& o) {
  auto file = load_config(o.config);
  if (!o.protocol.empty()) file.run.protocol = protocol_from_string(o.protocol);
  file.run.record_trace = o.trace;

  Workload wl;
  if (!o.workload.empty()) {
    if (o.accounts.empty()) throw std::runtime_error("--workload needs --accounts");
    wl.transactions = read_workload(o.workload);
    wl.accounts = accounts_from_json(read_json(o.accounts));
  } else {
    wl = generate_workload(file.workload, file.run.shards.shard_count, file.run.seed);
  }

  fs::path dir(o.out);
  fs::create_directories(dir);
  write_file(dir / "config.json", to_json_value(file).dump(2) + "\n");
  {
    std::ofstream os(dir / "workload.jsonl");
    write_transactions(os, wl.transactions);
  }
  write_file(dir / "accounts.json", accounts_to_json(wl.accounts).dump(2) + "\n");

  spdlog::info("running {} on {} shards: {} transactions, {} accounts", to_string(file.run.protocol),
               file.run.shards.shard_count, wl.transactions.size(), wl.accounts.size());
  auto started = std::chrono::steady_clock::now();
  auto checked = run_checked(file.run, wl);
  const auto& r = checked.report;
  if (o.wall_clock) {
    std::chrono::duration<double> took = std::chrono::steady_clock::now() - started;
    spdlog::info("wall clock: {:.3f} s including verification, {:.1f} committed tx per wall second",
                 took.count(), took.count() > 0 ? static_cast<double>(r.committed) / took.count() : 0.0);
  }

  write_file(dir / "report.json", report_to_json(r).dump(2) + "\n");
  write_file(dir / "final_balances.json", balances_to_json(r.final_balances).dump(2) + "\n");
  write_file(dir / "verify.json", verify_to_json(checked.verification).dump(2) + "\n");
  for (std::size_t s = 0; s < r.chains.size(); ++s) {
    std::ofstream os(dir / ("chain_" + std::to_string(s) + ".jsonl"));
    write_chain(os, r.chains[s]);
  }
  if (o.trace) {
    std::ofstream os(dir / "trace.jsonl");
    write_trace(os, r.trace);
  }

  spdlog::info("committed={} discarded={} restarts={} rollbacks={} throughput={:.3f} tx/s avg_exec={:.1f} ms",
               r.committed, r.discarded, r.restarts_total, r.rollbacks_total, r.throughput, r.avg_exec_time_ms);
  if (!r.quiesced) spdlog::error("{}", r.diagnostics);
  const auto& v = checked.verification;
  spdlog::info("verify: valid={} shard_coherent={} replay_match={}", v.valid, v.shard_coherent, v.replay_match);
  for (const auto& msg : v.violations) spdlog::warn("{}", msg);
  bool must_verify = r.protocol != Protocol::NoLock;
  return r.quiesced && (!must_verify || v.ok()) ? 0 : 1;
}

// ---- sweeps ---------------------------------------------------------------

struct SweepOptions {
  std::string config;
  std::vector<std::int32_t> xs;
  std::vector<std::string> protocols{"lockless", "locked", "nolock"};
  std::string out = "sweep";
  std::int32_t shards = 4;
};

inline std::vector<Protocol> parse_protocols(const std::vector<std::string>& names) {
  std::vector<Protocol> out;
  for (const auto& n : names) out.push_back(protocol_from_string(n));
  return out;
}

inline int report_rows(const std::vector<SweepRow>& rows, const char* x_name) {
  for (const auto& r : rows) {
    spdlog::info("{}={} {:<8} throughput={:.3f} avg_exec={:.1f} restarts={} rollbacks={}{}", x_name, r.x,
                 to_string(r.protocol), r.throughput, r.avg_exec_time_ms, r.restarts, r.rollbacks,
                 r.ok() ? "" : "  FAILED");
    if (!r.ok())
      for (const auto& v : r.violations) spdlog::error("  {}", v);
  }
  return all_ok(rows) ? 0 : 1;
}

inline int run_sweep_shards(SweepOptions o) {
  if (o.xs.empty()) o.xs = {2, 4, 8, 16};
  auto file = load_config(o.config);
  auto wl = generate_workload(file.workload, file.run.shards.shard_count, file.run.seed);
  auto rows = sweep_shards(file, wl, o.xs, parse_protocols(o.protocols));
  fs::create_directories(o.out);
  write_file(fs::path(o.out) / "config.json", to_json_value(file).dump(2) + "\n");
  std::ostringstream csv;
  write_fig1_csv(csv, rows);
  write_file(fs::path(o.out) / "fig1_throughput_vs_shards.csv", csv.str());
  return report_rows(rows, "shards");
}

inline int run_sweep_constraints(SweepOptions o) {
  if (o.xs.empty()) o.xs = {1, 2, 4, 6, 8};
  auto file = load_config(o.config);
  auto rows = sweep_constraints(file, o.xs, parse_protocols(o.protocols), o.shards);
  fs::create_directories(o.out);
  write_file(fs::path(o.out) / "config.json", to_json_value(file).dump(2) + "\n");
  std::ostringstream csv;
  write_fig2_csv(csv, rows);
  write_file(fs::path(o.out) / "fig2_exectime_vs_constraints.csv", csv.str());
  return report_rows(rows, "k");
}

inline void add_sweep_options(CLI::App& app, SweepOptions& o, const char* values_flag, const char* help) {
  app.add_option("--config", o.config, "Base run config JSON");
  app.add_option(values_flag, o.xs, help)->delimiter(',');
  app.add_option("--protocols", o.protocols, "Protocols to compare")
      ->delimiter(',')
      ->check(CLI::IsMember({"lockless", "locked", "nolock"}))
      ->capture_default_str();
  app.add_option("--out", o.out, "Output directory")->capture_default_str();
}

/// Runs a CLI11 app with uniform error handling.
template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
}

}  // namespace lockless::cli
