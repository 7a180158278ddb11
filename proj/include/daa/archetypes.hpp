#pragma once

// The archetype library: canonical dynamical systems with known vector
// fields, closed-form flows where they exist, designed invariant manifolds,
// and Cartesian-product composition.
//
// Sign convention: alpha < 0 makes the designed manifold attracting for
// every family (fixed point, ring, limit cycle, box, sphere). Dimensions
// beyond a family's attractor carry the residual dynamics dx_i/dt = alpha*x_i.

#include "daa/common.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace daa {

enum class Kind {
  FixedPoint,
  Multistable,
  Bistable,
  LimitCycle,
  RingAttractor,
  SphereAttractor,
  BoundedContinuousAttractor,
  Composite,
  External,
};

std::string kind_name(Kind k);
Kind kind_from_name(const std::string& name);

struct SystemSpec;

struct ArchetypeParams {
  double alpha = -1.0;        // contraction rate (1/time); attracting for alpha < 0
  double v = -1.0;            // angular velocity (rad/time), limit cycle only
  std::vector<double> roots;  // multistable fixed points, kept sorted, no duplicates
  double B = 1.0;             // hypercube half-width (bounded continuous attractor)
  double R = 1.0;             // sphere radius
  double beta_res = -1.0;     // residual contraction rate (sphere attractor)
  int d_bca = 1;              // attractor dimension (bounded continuous / sphere block)
  std::vector<SystemSpec> sub_specs;  // composite only
};

struct SystemSpec {
  Kind kind = Kind::FixedPoint;
  ArchetypeParams params;
  int dim = 1;

  // Throws Err::InvalidSpec / Err::DimensionMismatch on violated invariants.
  void validate() const;
};

// Canonical constructors (validated).
SystemSpec make_fixed_point(int dim = 1, double alpha = -1.0);
SystemSpec make_bistable(int dim = 1, double alpha = -1.0);
SystemSpec make_multistable(std::vector<double> roots, int dim = 1, double alpha = -1.0);
SystemSpec make_limit_cycle(int dim = 2, double alpha = -1.0, double v = -1.0);
SystemSpec make_ring_attractor(int dim = 2, double alpha = -1.0);
SystemSpec make_bca(int d_bca, int dim, double B = 1.0, double alpha = -1.0);
// Bounded line attractor: 1-D box plus contracting residual dimensions.
SystemSpec make_bla(int dim = 2, double B = 1.0, double alpha = -1.0);
SystemSpec make_sphere(int dim, double R = 1.0, double alpha = -1.0, double beta_res = -1.0);
SystemSpec make_external(int dim);
SystemSpec compose(const std::vector<SystemSpec>& specs);

/// Vector field f(x). Errors: ExternalSystemHasNoField, DimensionMismatch.
Vec eval_field(const SystemSpec& spec, const Vec& x);

/// Analytic Jacobian of the vector field (subgradient 0 on the measure-zero
/// kink sets of the piecewise families).
Mat field_jacobian(const SystemSpec& spec, const Vec& x);

bool has_analytic_flow(const SystemSpec& spec);

/// Exact time-t solution for FixedPoint, RingAttractor and LimitCycle.
/// Errors: NoClosedForm for other kinds.
Vec analytic_flow(const SystemSpec& spec, const Vec& x0, double t);

/// d(analytic_flow)/d(x0), used by the trainer's reverse sweep.
Mat analytic_flow_jacobian(const SystemSpec& spec, const Vec& x0, double t);

/// d(analytic_flow)/dv for the limit cycle (zero vector otherwise).
Vec analytic_flow_dv(const SystemSpec& spec, const Vec& x0, double t);

// Exact solution of dr/dt = alpha * r * (r - 1); r = 1 attracting for alpha < 0.
struct RadialFlow {
  double r;
  double dr_dr0;
};
RadialFlow radial_flow(double r0, double alpha, double t);

struct ManifoldSample {
  enum class Descriptor { Point, Circle, Segment, BoxInterior, Sphere, Product };
  std::vector<Vec> points;
  Descriptor descriptor = Descriptor::Point;
};

/// n_points samples on the designed invariant manifold.
ManifoldSample invariant_manifold(const SystemSpec& spec, int n_points);

nlohmann::json to_json(const SystemSpec& spec);
SystemSpec spec_from_json(const nlohmann::json& j);

}  // namespace daa
