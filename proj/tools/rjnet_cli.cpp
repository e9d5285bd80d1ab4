#include <CLI11.hpp>

#include <iostream>

#include "rjnet/cli.hpp"

namespace {

constexpr int exit_validation = 1;
constexpr int exit_runtime = 2;

}  // namespace

int main(int argc, char** argv) {
  using namespace rjnet;
  CLI::App app{"rjnet: reversible-jump model selection over reaction networks"};
  app.set_version_flag("--version", std::string(RJNET_VERSION));
  app.require_subcommand(1);

  std::string network_path;
  bool as_json = false;
  std::size_t cap = default_enumeration_cap;
  auto* en = app.add_subcommand("enumerate", "List the effective-network clusters of a network spec");
  en->add_option("network", network_path, "Network spec (JSON)")->required();
  en->add_flag("--json", as_json, "Print the cluster report as JSON");
  en->add_option("--cap", cap, "Refuse to enumerate more than 2^cap models");

  std::string config_path;
  std::string out_path;
  ConfigOverrides ov;
  auto* sim = app.add_subcommand("simulate", "Write a synthetic dataset from the synthesis block of a config");
  sim->add_option("config", config_path, "Run config (JSON)")->required();
  sim->add_option("-o,--out", out_path, "Dataset CSV path (default <output_dir>/data.csv)");

  std::string variant;
  long n_steps = 0, burn_in = 0;
  std::uint64_t seed = 0;
  int replicates = 0, threads = 0;
  std::string output_dir;
  auto* run = app.add_subcommand("run", "Run sampler replicates and write traces and a manifest");
  run->add_option("config", config_path, "Run config (JSON)")->required();
  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--variant", variant, "Sampler variant (nua, na, sens_nua, sens_na)");
    sub->add_option("--n-steps", n_steps, "Steps per replicate");
    sub->add_option("--burn-in", burn_in, "Burn-in steps");
    sub->add_option("--seed", seed, "Base seed");
    sub->add_option("--replicates", replicates, "Replicate count");
    sub->add_option("--threads", threads, "Worker threads (0 = available parallelism)");
    sub->add_option("--output-dir", output_dir, "Output directory");
  };
  add_run_flags(run);

  std::size_t top = 20;
  auto* rep = app.add_subcommand("report", "Summarize the traces of a completed run");
  rep->add_option("config", config_path, "Run config (JSON)")->required();
  rep->add_option("--top", top, "Models listed in report.json");
  add_run_flags(rep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_validation;
  }

  auto collect = [&](CLI::App* sub) {
    if (sub->count("--variant")) ov.sampler["variant"] = variant;
    if (sub->count("--n-steps")) ov.sampler["n_steps"] = n_steps;
    if (sub->count("--burn-in")) ov.sampler["burn_in"] = burn_in;
    if (sub->count("--seed")) ov.sampler["seed"] = seed;
    if (sub->count("--replicates")) ov.replicates = replicates;
    if (sub->count("--threads")) ov.threads = threads;
    if (sub->count("--output-dir")) ov.output_dir = output_dir;
  };

  try {
    if (*en) {
      const auto rep_json = enumerate_report(load_network(network_path), cap);
      if (as_json)
        std::cout << rep_json.dump(2) << '\n';
      else
        print_enumerate(rep_json, std::cout);
    } else if (*sim) {
      const auto cfg = load_run_config(config_path);
      const auto path = out_path.empty() ? cmd_simulate(cfg) : cmd_simulate(cfg, fs::path(out_path));
      std::cout << "wrote " << path.string() << '\n';
    } else if (*run) {
      collect(run);
      const auto cfg = load_run_config(config_path, ov);
      const auto res = cmd_run(cfg, &std::cerr);
      std::cout << "wrote " << res.manifest.string() << '\n';
      if (!res.all_ok()) {
        std::cerr << "error: some replicates failed; see the manifest\n";
        return exit_runtime;
      }
    } else if (*rep) {
      collect(rep);
      const auto cfg = load_run_config(config_path, ov);
      ReportOptions opt;
      opt.top_models = top;
      const auto r = cmd_report(cfg, opt);
      std::cout << "wrote " << (cfg.output_path() / "report.json").string() << '\n';
      for (const auto& m : r["top_models"]) std::cout << m.dump() << '\n';
    }
  } catch (const ValidationError& e) {
    for (const auto& v : e.violations()) std::cerr << "error: " << v << '\n';
    return exit_validation;
  } catch (const EnumerationCapExceeded& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_validation;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_validation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_runtime;
  }
  return 0;
}
