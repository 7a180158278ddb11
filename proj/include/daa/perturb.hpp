#pragma once

// Controlled deformations of a base system: interpolated random
// diffeomorphisms (the s-scaled flow of a random MLP field) and additive
// vector-field perturbations sampled from an RBF-kernel Gaussian process on
// a lattice, rescaled to a prescribed RMS norm. Also the Gronwall deviation
// bound used to sanity-check perturbed trajectories.

#include "daa/archetypes.hpp"
#include "daa/common.hpp"
#include "daa/diffeo.hpp"

#include <json.hpp>

#include <functional>
#include <optional>

namespace daa {

struct GpKernelParams {
  double variance = 1.0;                 // kernel sigma^2
  std::optional<double> lengthscale;     // drawn uniform in [0.1, 1] when unset
  int grid_n = 30;                       // lattice nodes per axis
};

struct PerturbationSpec {
  enum class Kind { DiffeoInterp, GpField };
  Kind kind = Kind::DiffeoInterp;
  double s = 0.0;  // interpolation scalar, or target RMS field norm
  uint64_t seed = 0;
  GpKernelParams gp;

  void validate() const;
};

nlohmann::json to_json(const PerturbationSpec& spec);
PerturbationSpec perturbation_from_json(const nlohmann::json& j);

/// Random diffeomorphism family: MLP weights drawn N(0.02, 0.5), field output
/// scaled by s. s = 0 is exactly the identity.
DiffeoModel random_diffeo_interp(const PerturbationSpec& spec, int dim, int hidden = 64,
                                 int flow_steps = 10);

struct Box2 {
  Vec lo, hi;  // componentwise lo < hi
  void validate() const;
};

/// Axis-aligned bounds of every sample in the batch, padded by the fraction.
Box2 bounding_box(const std::vector<Mat>& steps, double pad_fraction = 0.1);

// A 2-D vector field sampled on a regular lattice, bilinearly interpolated
// off-lattice and clamped to the lattice hull.
struct LatticeField {
  Box2 box;
  int nx = 0, ny = 0;
  Mat fx, fy;  // nx x ny node values

  Vec eval(const Vec& p) const;
  double rms() const;       // sqrt(mean ||f||^2 over nodes)
  double sup_norm() const;  // max ||f|| over nodes
  void scale(double s);
};

/// Zero-mean GP draw with kernel variance * exp(-||x-x'||^2 / (2 l^2)) for
/// each component, rescaled so the lattice RMS norm equals spec.s.
/// Errors: DegenerateLattice.
LatticeField gp_field_perturbation_delta(const PerturbationSpec& spec, const Box2& box);

/// Drift of the perturbed system f + delta as an integrable callable.
std::function<Vec(const Vec&)> perturbed_field(const SystemSpec& base, const LatticeField& delta);

struct GronwallInput {
  double lipschitz = 1.0;  // Lipschitz bound L of the base field on the domain
  double delta_sup = 0.0;  // sup of ||delta|| over sampled states
  double t = 1.0;          // horizon

  void validate() const;
};

/// Pointwise deviation bound (delta_sup / L) (e^{L t} - 1).
double gronwall_bound(const GronwallInput& in);

/// Companion integrated-form value (delta_sup / L^2) e^{L t}, recorded but
/// not asserted by the checkers.
double gronwall_integrated_bound(const GronwallInput& in);

/// Max spectral norm of the central-difference Jacobian of the field over
/// the lattice; serves as the Lipschitz estimate L.
double lipschitz_estimate(const std::function<Vec(const Vec&)>& field, const Box2& box, int grid_n);

}  // namespace daa
