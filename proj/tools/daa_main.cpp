// Command-line front end for the dynamical archetype analysis toolkit.
//
//   daa simulate --system ring --seed 1 --out runs/ring
//   daa perturb  --system ring --kind vf --scale 0.1 --seed 2 --out runs/pert
//   daa fit      --data runs/ring/ring.csv --archetype ring --out runs/fits
//   daa score    --fits runs/fits --out runs/score
//   daa report   --score runs/score/score.json --out runs/report
//
// A JSON config file (--config) mirrors the flag names; explicit flags win.
// DAA_SEED serves as the seed fallback when --seed is not given.

#include "daa/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace {

uint64_t env_seed_fallback() {
  if (const char* env = std::getenv("DAA_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      std::cerr << "warning: ignoring malformed DAA_SEED='" << env << "'\n";
    }
  }
  return 0;
}

// Applies config-file values to options the command line left untouched.
void merge_config(CLI::App* cmd, const std::string& config_path) {
  if (config_path.empty()) return;
  std::ifstream f(config_path);
  if (!f) throw CLI::ValidationError("--config", "cannot open '" + config_path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw CLI::ValidationError("--config", e.what());
  }
  for (auto& [key, value] : j.items()) {
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (!opt || opt->count() > 0) continue;
    const std::string text = value.is_string() ? value.get<std::string>() : value.dump();
    opt->add_result(text);
    opt->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamical archetype analysis"};
  app.require_subcommand(1);

  std::string config;

  daa::cli::SimulateOpts sim;
  bool sim_seed_given = false;
  auto* csim = app.add_subcommand("simulate", "integrate a named system and write trajectories");
  csim->add_option("--system", sim.system, "target registry name");
  csim->add_option("--dt", sim.dt, "recording interval");
  csim->add_option("--tmax", sim.t_max, "horizon");
  csim->add_option("--n-traj", sim.n_traj, "number of trajectories");
  csim->add_option("--sigma", sim.sigma, "diffusion coefficient override");
  csim->add_option("--substeps", sim.substeps, "integrator substeps per interval");
  csim->add_option("--seed", sim.seed, "root seed")->each([&](const std::string&) {
    sim_seed_given = true;
  });
  csim->add_option("--name", sim.name, "artifact stem");
  csim->add_option("--out", sim.out_dir, "output directory")->required();
  csim->add_option("--config", config, "JSON config file");

  daa::cli::PerturbOpts pert;
  bool pert_seed_given = false;
  auto* cpert = app.add_subcommand("perturb", "write trajectories of a deformed/perturbed system");
  cpert->add_option("--system", pert.system, "base system");
  cpert->add_option("--kind", pert.kind, "diffeo | vf");
  cpert->add_option("--scale", pert.scale, "interpolation scalar or field norm");
  cpert->add_option("--hidden", pert.hidden, "deformation MLP width");
  cpert->add_option("--grid-n", pert.grid_n, "lattice nodes per axis");
  cpert->add_option("--dt", pert.dt, "recording interval");
  cpert->add_option("--tmax", pert.t_max, "horizon");
  cpert->add_option("--n-traj", pert.n_traj, "number of trajectories");
  cpert->add_option("--substeps", pert.substeps, "integrator substeps");
  cpert->add_option("--seed", pert.seed, "root seed")->each([&](const std::string&) {
    pert_seed_given = true;
  });
  cpert->add_option("--name", pert.name, "artifact stem");
  cpert->add_option("--out", pert.out_dir, "output directory")->required();
  cpert->add_option("--config", config, "JSON config file");

  daa::cli::FitOpts fit;
  bool fit_seed_given = false;
  bool no_learn_beta = false;
  auto* cfit = app.add_subcommand("fit", "fit one archetype to one trajectory file");
  cfit->add_option("--data", fit.data, "trajectory CSV")->required();
  cfit->add_option("--archetype", fit.archetype, "archetype name or spec JSON")->required();
  cfit->add_option("--target-name", fit.target_name, "label for artifacts");
  cfit->add_option("--lr", fit.cfg.lr, "learning rate");
  cfit->add_option("--epochs", fit.cfg.epochs, "training epochs");
  cfit->add_option("--batch-size", fit.cfg.batch_size, "minibatch size (trajectories)");
  cfit->add_option("--hidden", fit.cfg.hidden, "MLP hidden width");
  cfit->add_option("--flow-steps", fit.cfg.flow_steps, "RK4 steps of the flow map");
  cfit->add_flag("--no-learn-beta", no_learn_beta, "freeze the archetype family parameters");
  cfit->add_option("--seed", fit.cfg.seed, "root seed")->each([&](const std::string&) {
    fit_seed_given = true;
  });
  cfit->add_option("--out", fit.out_dir, "output directory")->required();
  cfit->add_option("--config", config, "JSON config file");

  daa::cli::ScoreOpts score;
  auto* cscore = app.add_subcommand("score", "aggregate fit artifacts into score matrices");
  cscore->add_option("--fits", score.fits_dir, "directory of fit_*.json artifacts")->required();
  cscore->add_option("--out", score.out_dir, "output directory")->required();
  cscore->add_option("--config", config, "JSON config file");

  daa::cli::ReportOpts report;
  auto* creport = app.add_subcommand("report", "emit CSV tables and SVG figures");
  creport->add_option("--score", report.score_file, "score.json input");
  creport->add_option("--sweep", report.sweep_file, "sweep CSV (s,dissimilarity,complexity)");
  creport->add_option("--out", report.out_dir, "output directory")->required();
  creport->add_option("--config", config, "JSON config file");

  CLI11_PARSE(app, argc, argv);

  try {
    auto* sub = app.get_subcommands().front();
    merge_config(sub, config);

    if (sub == csim) {
      if (!sim_seed_given && csim->get_option("--seed")->count() == 0) sim.seed = env_seed_fallback();
      return daa::cli::cmd_simulate(sim);
    }
    if (sub == cpert) {
      if (!pert_seed_given && cpert->get_option("--seed")->count() == 0)
        pert.seed = env_seed_fallback();
      return daa::cli::cmd_perturb(pert);
    }
    if (sub == cfit) {
      if (!fit_seed_given && cfit->get_option("--seed")->count() == 0)
        fit.cfg.seed = env_seed_fallback();
      fit.cfg.learn_beta = !no_learn_beta;
      return daa::cli::cmd_fit(fit);
    }
    if (sub == cscore) return daa::cli::cmd_score(score);
    if (sub == creport) return daa::cli::cmd_report(report);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
