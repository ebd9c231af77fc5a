#include <CLI11.hpp>

#include "isomono/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Isomonodromic flows, monodromy and Hamiltonians of meromorphic connections"};
  app.require_subcommand(1, 1);
  isomono::cli::RunSpec spec;
  for (const char* name : {"flow", "monodromy", "hamiltonian", "verify", "pairing"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--input", spec.input, "JSON problem description")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", spec.out, "output directory")->capture_default_str();
    sub->add_option("--tol", spec.tol, "integration and transport tolerance")->capture_default_str();
    sub->add_option("--seed", spec.seed, "seed for randomized checks")->capture_default_str();
    sub->add_option("--pin", spec.pins, "pole indices held fixed (at most three)");
    sub->callback([&spec, name] { spec.command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : isomono::cli::kParse;
  }
  return isomono::cli::run(spec);
}
