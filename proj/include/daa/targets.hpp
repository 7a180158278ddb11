#pragma once

// Benchmark target systems: named oscillators with fixed parameter sets,
// archetype-backed targets (deterministic or noisy), the two-bounded-line-
// attractors composite, and ingestion of externally produced trajectories.

#include "daa/archetypes.hpp"
#include "daa/common.hpp"
#include "daa/perturb.hpp"
#include "daa/sim.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace daa {

enum class TargetKind { Archetype, VanDerPol, Selkov, LienardSigmoid, External };

struct TargetSpec {
  std::string name;
  TargetKind kind = TargetKind::Archetype;
  SystemSpec base;            // Archetype kind only
  double mu = 0.3;            // Van der Pol
  double a = 0.05, b = 0.5;   // Selkov / Lienard coefficients
  double noise_sigma = 0.0;   // diffusion coefficient; 0 means deterministic
  std::optional<PerturbationSpec> perturbation;

  int dim() const;
  void validate() const;
};

/// Drift of the target system (noise is the integrator's business).
/// Errors: ExternalSystemHasNoField.
Vec eval_target_field(const TargetSpec& spec, const Vec& x);
Mat target_field_jacobian(const TargetSpec& spec, const Vec& x);

/// Registry: ring, ring_noisy, vdp, vdp_noisy, selkov, lienard, two_blas,
/// external.
TargetSpec target_by_name(const std::string& name);
const std::vector<std::string>& target_registry();

/// Per-system simulation defaults (recording step, horizon, trajectory
/// count, initial-condition region).
struct SimDefaults {
  double dt;
  double t_max;
  int n_traj;
  InitSampler sampler;  // sampler.seed is filled in by the caller
};
SimDefaults default_sim(const std::string& name, uint64_t seed);

// diffusion used when generating noisy archetype references for scoring
inline constexpr double kNoisyArchetypeSigma = 0.025;

nlohmann::json to_json(const TargetSpec& spec);
TargetSpec target_from_json(const nlohmann::json& j);

struct ExternalTrajectorySet {
  TrajectoryBatch batch;
  std::string source_label;
};

/// Reads a trajectory file (see sim module for the format).
ExternalTrajectorySet load_external(const std::string& path);

}  // namespace daa
