// bench: run one protocol, sweep shard or constraint counts, verify a run
// directory, or generate a workload.

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace lockless::cli;
  init_logging();

  CLI::App app{"Sharded lockless transaction simulator and benchmarks"};
  app.require_subcommand(1);

  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "Run one protocol and write a run directory");
  add_run_options(*run, run_opts);

  SweepOptions shard_opts;
  auto* shards = app.add_subcommand("sweep-shards", "Throughput vs shard count (fig1 CSV)");
  add_sweep_options(*shards, shard_opts, "--shards", "Shard counts, e.g. 2,4,8,16");

  SweepOptions k_opts;
  auto* ks = app.add_subcommand("sweep-constraints", "Execution time vs constraints per transaction (fig2 CSV)");
  add_sweep_options(*ks, k_opts, "--constraints", "Constraint counts, e.g. 1,2,4,6,8");
  ks->add_option("--shard-count", k_opts.shards, "Shard count for the sweep")->capture_default_str();

  VerifyOptions verify_opts;
  auto* verify = app.add_subcommand("verify", "Check the chains of a run directory");
  add_verify_options(*verify, verify_opts);

  auto* workload = app.add_subcommand("workload", "Workload utilities");
  workload->require_subcommand(1);
  GenOptions gen_opts;
  auto* gen = workload->add_subcommand("gen", "Generate accounts and transactions");
  add_gen_options(*gen, gen_opts);

  CLI11_PARSE(app, argc, argv);

  return guarded([&] {
    if (*run) return run_single(run_opts);
    if (*shards) return run_sweep_shards(shard_opts);
    if (*ks) return run_sweep_constraints(k_opts);
    if (*verify) return run_verify(verify_opts);
    return run_gen(gen_opts);
  });
}
