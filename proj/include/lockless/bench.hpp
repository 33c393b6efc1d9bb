#pragma once

// Shard-count and constraint-count sweeps over the three protocols, with
// per-run verification and CSV plot data.

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lockless/json_io.hpp"
#include "lockless/simulator.hpp"
#include "lockless/verifier.hpp"
#include "lockless/workload.hpp"

namespace lockless {

struct SweepRow {
  std::int32_t x = 0;  // shard count or constraints per transaction
  Protocol protocol = Protocol::Lockless;
  double throughput = 0.0;
  double avg_exec_time_ms = 0.0;
  std::int64_t restarts = 0;
  std::int64_t rollbacks = 0;
  std::int64_t committed = 0;
  std::int64_t discarded = 0;
  bool quiesced = false;
  bool verify_required = false;
  bool verified = false;
  std::vector<std::string> violations;

  [[nodiscard]] bool ok() const { return quiesced && (!verify_required || verified); }
};

struct CheckedRun {
  RunReport report;
  VerifyReport verification;
};

/// Runs once and checks the resulting chains.
[[nodiscard]] inline CheckedRun run_checked(const RunConfig& config, const Workload& workload) {
  CheckedRun out;
  out.report = run(config, workload);
  out.verification = verify(out.report.chains, out.report.initial_balances,
                            index_transactions(workload.transactions), out.report.final_balances);
  return out;
}

[[nodiscard]] inline SweepRow make_row(std::int32_t x, const CheckedRun& c) {
  SweepRow row;
  row.x = x;
  row.protocol = c.report.protocol;
  row.throughput = c.report.throughput;
  row.avg_exec_time_ms = c.report.avg_exec_time_ms;
  row.restarts = c.report.restarts_total;
  row.rollbacks = c.report.rollbacks_total;
  row.committed = c.report.committed;
  row.discarded = c.report.discarded;
  row.quiesced = c.report.quiesced && c.report.committed + c.report.discarded == c.report.tx_total;
  // The no-lock baseline is not isolated, so its chains may legitimately fail.
  row.verify_required = c.report.protocol != Protocol::NoLock;
  row.verified = c.verification.ok();
  row.violations = c.verification.violations;
  if (!c.report.quiesced) row.violations.push_back(c.report.diagnostics);
  return row;
}

/// Same accounts and transfers for every shard count; leaders re-assigned
/// round-robin over the current shard count.
[[nodiscard]] inline Workload repartition(Workload wl, std::int32_t shard_count) {
  assign_leaders(wl.transactions, shard_count);
  return wl;
}

[[nodiscard]] inline std::vector<SweepRow> sweep_shards(const RunFile& base, const Workload& workload,
                                                        const std::vector<std::int32_t>& shard_counts,
                                                        const std::vector<Protocol>& protocols) {
  if (shard_counts.empty()) throw std::invalid_argument("shard_counts is empty");
  std::vector<SweepRow> rows;
  for (auto w : shard_counts) {
    auto wl = repartition(workload, w);
    for (auto p : protocols) {
      auto cfg = base.run;
      cfg.shards.shard_count = w;
      cfg.protocol = p;
      rows.push_back(make_row(w, run_checked(cfg, wl)));
    }
  }
  return rows;
}

/// One workload per k from the same seed: transfer pairs are shared across
/// k, only the condition lists grow.
[[nodiscard]] inline std::vector<SweepRow> sweep_constraints(const RunFile& base,
                                                             const std::vector<std::int32_t>& ks,
                                                             const std::vector<Protocol>& protocols,
                                                             std::int32_t shard_count = 4) {
  if (ks.empty()) throw std::invalid_argument("constraint counts are empty");
  std::vector<SweepRow> rows;
  for (auto k : ks) {
    auto params = base.workload;
    params.constraints = k;
    auto wl = generate_workload(params, shard_count, base.run.seed);
    for (auto p : protocols) {
      auto cfg = base.run;
      cfg.shards.shard_count = shard_count;
      cfg.protocol = p;
      rows.push_back(make_row(k, run_checked(cfg, wl)));
    }
  }
  return rows;
}

inline std::string fixed(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

/// Rows grouped by protocol (one series each), x ascending within a series.
inline std::vector<SweepRow> by_series(std::vector<SweepRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.protocol != b.protocol) return a.protocol < b.protocol;
    return a.x < b.x;
  });
  return rows;
}

inline void write_fig1_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "shard_count,protocol,throughput,avg_exec_time_ms,restarts,rollbacks,quiesced,verified\n";
  for (const auto& r : by_series(rows))
    os << r.x << ',' << to_string(r.protocol) << ',' << fixed(r.throughput) << ',' << fixed(r.avg_exec_time_ms)
       << ',' << r.restarts << ',' << r.rollbacks << ',' << (r.quiesced ? 1 : 0) << ',' << (r.verified ? 1 : 0)
       << '\n';
}

inline void write_fig2_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "constraints,protocol,avg_exec_time_ms,throughput,restarts,rollbacks,quiesced,verified\n";
  for (const auto& r : by_series(rows))
    os << r.x << ',' << to_string(r.protocol) << ',' << fixed(r.avg_exec_time_ms) << ',' << fixed(r.throughput)
       << ',' << r.restarts << ',' << r.rollbacks << ',' << (r.quiesced ? 1 : 0) << ',' << (r.verified ? 1 : 0)
       << '\n';
}

[[nodiscard]] inline bool all_ok(const std::vector<SweepRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.ok(); });
}

}  // namespace lockless
