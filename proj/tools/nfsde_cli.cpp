#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nfsde/commands.hpp"
#include "nfsde/errors.hpp"

namespace {

enum Exit { kOk = 0, kValidation = 2, kChecker = 3, kRuntime = 4 };

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<int> threads;
};

void add_config_args(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("config", args.path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--set", args.overrides, "Override a config value: key.path=value")->take_all();
  cmd->add_option("--out", args.out, "Output directory (overrides output.dir)");
  cmd->add_option("--threads", args.threads, "Worker threads, 0 = all cores (overrides threads)");
}

nfsde::ExperimentConfig load(const ConfigArgs& args) {
  std::vector<std::string> overrides = args.overrides;
  if (!args.out.empty()) overrides.push_back("output.dir=\"" + args.out + "\"");
  if (args.threads) overrides.push_back("threads=" + std::to_string(*args.threads));
  return nfsde::load_config(args.path, overrides);
}

void print_constants(const nlohmann::json& row) {
  std::cout << std::setprecision(12);
  for (const char* key : {"alpha", "beta", "c_lambda"}) {
    if (row.contains(key)) std::cout << std::left << std::setw(22) << key << row[key].get<double>() << "\n";
  }
  if (row.contains("thm31")) {
    const auto& t = row["thm31"];
    std::cout << std::setw(22) << "thm31_case" << t["case"].get<int>() << "\n"
              << std::setw(22) << "thm31_entropy_coeff" << t["entropy_coeff"].get<double>() << "\n"
              << std::setw(22) << "thm31_initial_coeff" << t["initial_coeff"].get<double>() << "\n";
  }
  if (row.contains("summability")) {
    const auto& s = row["summability"];
    std::cout << std::setw(22) << "summability" << (s["condition"].get<bool>() ? "holds" : "fails")
              << " (threshold " << s["threshold"].get<double>() << ")\n";
  }
  for (const auto& e : row["errors"]) std::cout << std::setw(22) << "error" << e.get<std::string>() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neutral functional SDE simulator and transportation-cost inequality checker"};
  app.require_subcommand(1);

  nfsde::ConstantsQuery query;
  std::vector<std::string> sweeps;
  std::string variant = "derivation";
  bool as_json = false;
  auto* constants = app.add_subcommand("constants", "Evaluate the closed-form constants");
  constants->add_option("--T", query.T, "Horizon");
  constants->add_option("--kappa", query.kappa, "Contraction constant of G");
  constants->add_option("--l1", query.l1, "Dissipativity constant lambda1");
  constants->add_option("--l2", query.l2, "Lipschitz constant lambda2 of sigma");
  constants->add_option("--l3", query.l3, "Bound lambda3 of sigma");
  constants->add_option("--lambda", query.lambda, "Exponential weight");
  constants->add_option("--k", query.k, "rho_2 Lipschitz constant of G");
  constants->add_option("--k1", query.k1, "Weighted dissipativity k1");
  constants->add_option("--k2", query.k2, "Weighted dissipativity k2");
  constants->add_option("--tau", query.tau, "Delay length");
  constants->add_option("--variant", variant, "Exponent of alpha: derivation (16 l2) or display (4 l2)")
      ->check(CLI::IsMember({"derivation", "display"}));
  constants->add_option("--sweep", sweeps, "name=start:stop:count; repeat for a grid, writes CSV")->take_all();
  constants->add_flag("--json", as_json, "Print JSON instead of a table");

  ConfigArgs sim_args, couple_args, verify_args, conv_args;
  auto* simulate = app.add_subcommand("simulate", "Simulate an ensemble and write path files");
  add_config_args(simulate, sim_args);
  auto* couple = app.add_subcommand("couple", "Coupled simulation, entropy and importance check");
  add_config_args(couple, couple_args);
  auto* verify = app.add_subcommand("verify", "Verify a transportation-cost inequality");
  add_config_args(verify, verify_args);
  auto* convergence = app.add_subcommand("convergence", "Strong and deterministic convergence orders");
  add_config_args(convergence, conv_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  nfsde::StageTracker stage;
  try {
    if (*constants) {
      query.variant = variant == "display" ? nfsde::AlphaVariant::display : nfsde::AlphaVariant::derivation;
      if (!sweeps.empty()) {
        std::vector<nfsde::SweepAxis> axes;
        for (const auto& s : sweeps) axes.push_back(nfsde::parse_sweep(s));
        nfsde::constants_sweep_csv(query, axes, std::cout);
        return kOk;
      }
      const auto row = nfsde::evaluate_constants(query);
      if (as_json) {
        std::cout << row.dump(2) << "\n";
      } else {
        print_constants(row);
      }
      return row["errors"].empty() ? kOk : kValidation;
    }
    const ConfigArgs& args = *simulate ? sim_args : *couple ? couple_args : *verify ? verify_args : conv_args;
    const nfsde::ExperimentConfig cfg = load(args);
    const nfsde::RunContext ctx{cfg.output.dir, &std::cout, &stage};
    if (*simulate) {
      nfsde::run_simulate(cfg, ctx);
    } else if (*couple) {
      nfsde::run_couple(cfg, ctx);
    } else if (*verify) {
      nfsde::run_verify(cfg, ctx);
    } else {
      nfsde::run_convergence(cfg, ctx);
    }
    return kOk;
  } catch (const nfsde::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const nfsde::CheckerFailure& e) {
    std::cerr << "checker failure in stage '" << stage.current << "': " << e.what() << "\n";
    return kChecker;
  } catch (const std::exception& e) {
    std::cerr << "runtime error in stage '" << stage.current << "': " << e.what() << "\n";
    return kRuntime;
  }
}
