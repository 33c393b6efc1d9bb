// workload gen: accounts and transactions in the line-delimited format.

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace lockless::cli;
  init_logging();
  CLI::App app{"Workload generator"};
  app.require_subcommand(1);
  GenOptions opts;
  auto* gen = app.add_subcommand("gen", "Generate accounts and transactions");
  add_gen_options(*gen, opts);
  CLI11_PARSE(app, argc, argv);
  return guarded([&] { return run_gen(opts); });
}
