// verify: causal validity, shard-coherence, serialization and replay of a
// run directory's chains.

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace lockless::cli;
  init_logging();
  CLI::App app{"Chain verifier"};
  VerifyOptions opts;
  add_verify_options(app, opts);
  CLI11_PARSE(app, argc, argv);
  return guarded([&] { return run_verify(opts); });
}
