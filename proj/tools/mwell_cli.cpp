// mwell: command-line front end.
//
//   mwell <subcommand> --scenario FILE --out DIR [--seed N] [--backend B] [--threads N]
//
// Exit codes: 0 success, 1 numerical alarm, 2 configuration error. Failures
// print a JSON object on stderr and leave no output files.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mwell/io/commands.hpp"

namespace {

int fail(int code, const std::string& kind, const std::string& message) {
  mwell::io::Json j;
  j["error"]["kind"] = kind;
  j["error"]["message"] = message;
  std::cerr << j.dump() << '\n';
  return code;
}

struct Options {
  std::string scenario;
  std::string out;
  std::uint64_t seed = 0;
  std::string backend;
  unsigned threads = 1;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle in an infinite well with moving walls: evolution, observables and protocol simulation"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"evolve", "state snapshots on the time and space grids"},
      {"observables", "rho, j, v, Re/Im P^w and Q with light-cone tags"},
      {"deltaj", "Delta j sweep over eps with Richardson slope"},
      {"tail", "truncation tail reports"},
      {"bohm", "guidance trajectories and equivariance check"},
      {"protocol", "ensemble weak-measurement protocol report"},
      {"fig1", "|Re P^w| over the (x, t) lattice"},
      {"fig2", "Re P^w(x_f, t) for moving and static walls"},
  };

  Options opt;
  std::string chosen;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--scenario", opt.scenario, "scenario file")->required();
    sub->add_option("--out", opt.out, "output directory")->required();
    sub->add_option("--seed", opt.seed, "RNG seed (overrides the scenario)");
    sub->add_option("--backend", opt.backend, "analytic or spectral (overrides the scenario)")
        ->check(CLI::IsMember({"analytic", "spectral"}));
    sub->add_option("--threads", opt.threads, "worker threads for Monte Carlo runs")->check(CLI::Range(1u, 256u));
    sub->callback([&chosen, n = name] { chosen = n; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "config", e.what());
  }

  try {
    mwell::io::RunFlags flags;
    flags.threads = opt.threads;
    if (app.get_subcommand(chosen)->count("--seed")) flags.seed = opt.seed;
    if (!opt.backend.empty()) flags.backend = mwell::io::parse_backend(opt.backend);
    const auto sc = mwell::io::apply_flags(mwell::io::load_scenario(opt.scenario), flags);
    const auto bundle = mwell::io::run_command(chosen, sc, flags.threads);
    bundle.write(opt.out);
  } catch (const mwell::NumericalAlarm& e) {
    return fail(1, e.kind(), e.what());
  } catch (const mwell::PreconditionError& e) {
    return fail(2, "config", e.what());
  } catch (const std::exception& e) {
    return fail(1, "internal", e.what());
  }
  return 0;
}
