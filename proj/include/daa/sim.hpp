#pragma once

// Trajectory generation and handling: fixed-step RK4 for ODEs,
// Euler-Maruyama for SDEs, initial-condition sampling, standardization,
// train/test splitting, and the trajectory file format
// (CSV `traj,t,x0,...` plus a `<name>.meta.json` sidecar).

#include "daa/common.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace daa {

struct SimConfig {
  double dt = 0.1;       // recording interval
  double t_max = 1.0;
  int n_traj = 1;
  uint64_t seed = 0;
  int substeps = 5;      // internal integrator steps per recorded interval

  int n_intervals() const { return static_cast<int>(std::llround(t_max / dt)); }
  void validate() const;
};

struct InitSampler {
  enum class Kind { Annulus, Box };
  Kind kind = Kind::Box;
  // annulus (2-D), uniform in area
  double r_min = 0.5;
  double r_max = 1.5;
  Vec center;
  // box, uniform componentwise
  Vec lo, hi;
  uint64_t seed = 0;

  int dim() const;
  void validate() const;

  static InitSampler annulus(double r_min, double r_max, uint64_t seed, Vec center = Vec::Zero(2));
  static InitSampler box(Vec lo, Vec hi, uint64_t seed);
};

std::vector<Vec> sample_initial(const InitSampler& sampler, int count);

using FieldFn = std::function<Vec(const Vec&)>;

/// Classical RK4 with step dt/substeps; column i holds the state at time i*dt.
Mat integrate_ode(const FieldFn& field, const Vec& x0, const SimConfig& cfg);

/// Euler-Maruyama x_{k+1} = x_k + f(x_k) h + sigma sqrt(h) xi_k with the
/// noise drawn from the given stream seed. sigma = 0 is the exact Euler path.
Mat integrate_sde(const FieldFn& field, double sigma, const Vec& x0, const SimConfig& cfg,
                  uint64_t noise_stream);

struct TrajectoryBatch {
  // steps[i] is d x B: column b holds trajectory b at time i*dt
  std::vector<Mat> steps;
  double dt = 0.0;
  nlohmann::json meta = nlohmann::json::object();
  std::optional<std::pair<Vec, Vec>> normalization;  // (mu, sigma) already applied

  int dim() const { return steps.empty() ? 0 : static_cast<int>(steps[0].rows()); }
  int n_traj() const { return steps.empty() ? 0 : static_cast<int>(steps[0].cols()); }
  int n_intervals() const { return static_cast<int>(steps.size()) - 1; }
  Vec point(int traj, int step) const { return steps[step].col(traj); }
  TrajectoryBatch select(const std::vector<int>& traj_indices) const;
  bool all_finite() const;
};

/// Simulates n_traj trajectories; per-trajectory noise streams are derived
/// from cfg.seed so the batch prefix is stable when n_traj grows.
TrajectoryBatch simulate_batch(const FieldFn& field, double sigma, const InitSampler& sampler,
                               const SimConfig& cfg, nlohmann::json meta = {});

struct NormalizeResult {
  TrajectoryBatch batch;
  Vec mu;
  Vec sigma;
};

/// Per-dimension standardization over all B*(n+1) points.
/// Errors: DegenerateDimension when some coordinate has zero spread.
NormalizeResult normalize(const TrajectoryBatch& batch);

/// Partitions trajectories (not time points); deterministic in the seed.
std::pair<TrajectoryBatch, TrajectoryBatch> split(const TrajectoryBatch& batch, double ratio,
                                                  uint64_t seed);

void write_trajectories(const std::string& path, const TrajectoryBatch& batch);
TrajectoryBatch load_trajectories(const std::string& path);

/// Sidecar path for a trajectory file: foo.csv -> foo.meta.json.
std::string meta_path_for(const std::string& csv_path);

/// 17-significant-digit float formatting used by every text artifact.
std::string format_double(double v);

}  // namespace daa
