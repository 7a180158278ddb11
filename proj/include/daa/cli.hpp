#pragma once

// Pipeline commands behind the command-line tool: simulate, perturb, fit,
// score, report. Every command writes its artifacts under an output
// directory plus a manifest.json naming them; artifacts are byte-identical
// across reruns with the same inputs and seeds (the manifest's wall-time
// entry is the one field that varies).

#include "daa/common.hpp"
#include "daa/score.hpp"
#include "daa/sim.hpp"
#include "daa/targets.hpp"
#include "daa/train.hpp"

#include <optional>
#include <string>
#include <vector>

namespace daa::cli {

struct SimulateOpts {
  std::string system = "ring";        // registry name
  std::optional<double> dt, t_max, sigma;
  std::optional<int> n_traj;
  int substeps = 5;
  uint64_t seed = 0;
  std::string out_dir;
  std::string name;  // artifact stem; defaults to the system name
};

struct PerturbOpts {
  std::string system = "ring";
  std::string kind = "diffeo";  // diffeo | vf
  double scale = 0.0;
  uint64_t seed = 0;
  int hidden = 64;   // deformation field width (diffeo kind)
  int grid_n = 30;   // lattice nodes per axis (vf kind)
  std::optional<double> dt, t_max;
  std::optional<int> n_traj;
  int substeps = 5;
  std::string out_dir;
  std::string name;
};

struct FitOpts {
  std::string data;       // trajectory CSV produced by simulate/perturb
  std::string archetype;  // registry name or a spec JSON path
  std::string target_name;  // label used in artifact names; defaults to the data stem
  FitConfig cfg;
  std::string out_dir;
};

struct ScoreOpts {
  std::string fits_dir;  // directory holding fit_*.json artifacts
  std::string out_dir;
};

struct ReportOpts {
  std::string score_file;  // score.json (optional if sweep given)
  std::string sweep_file;  // CSV with header s,dissimilarity,complexity
  std::string out_dir;
};

int cmd_simulate(const SimulateOpts& opts);
int cmd_perturb(const PerturbOpts& opts);
int cmd_fit(const FitOpts& opts);
int cmd_score(const ScoreOpts& opts);
int cmd_report(const ReportOpts& opts);

/// Archetype rows used by score/report, in registry order.
const std::vector<std::string>& archetype_registry();
SystemSpec archetype_by_name(const std::string& name, int dim);

// shared helpers
TrajectoryBatch simulate_target(const TargetSpec& target, const SimDefaults& defaults,
                                uint64_t seed, int substeps);
std::string render_score_svg(const ScoreMatrix& m);
struct SweepRow {
  double s, dissimilarity, complexity;
};
std::string render_sweep_svg(const std::vector<SweepRow>& rows);

void write_text_file(const std::string& path, const std::string& content);
std::string fit_artifact_name(const std::string& archetype, const std::string& target);

}  // namespace daa::cli
