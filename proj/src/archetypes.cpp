#include "daa/archetypes.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace daa {

namespace {

constexpr double kRadiusEps = 1e-12;

void check_dim(const SystemSpec& spec, const Vec& x) {
  if (x.size() != spec.dim) {
    std::ostringstream os;
    os << "state has dimension " << x.size() << ", spec expects " << spec.dim;
    fail(Err::DimensionMismatch, os.str());
  }
}

// Planar block of the ring / limit cycle field:
//   xdot = alpha (r - 1) x - v y,  ydot = alpha (r - 1) y + v x.
// The polar singularity at r = 0 is filled with the zero vector.
void polar_block_field(double alpha, double v, double x, double y, double& fx, double& fy) {
  const double r = std::hypot(x, y);
  if (r < kRadiusEps) {
    fx = 0.0;
    fy = 0.0;
    return;
  }
  const double a = alpha * (r - 1.0);
  fx = a * x - v * y;
  fy = a * y + v * x;
}

void polar_block_jacobian(double alpha, double v, double x, double y, Eigen::Ref<Mat> block) {
  const double r = std::hypot(x, y);
  if (r < kRadiusEps) {
    block(0, 0) = -alpha;
    block(0, 1) = -v;
    block(1, 0) = v;
    block(1, 1) = -alpha;
    return;
  }
  const double a = alpha * (r - 1.0);
  block(0, 0) = a + alpha * x * x / r;
  block(0, 1) = alpha * x * y / r - v;
  block(1, 0) = alpha * x * y / r + v;
  block(1, 1) = a + alpha * y * y / r;
}

int sphere_block(const SystemSpec& spec) { return spec.params.d_bca + 1; }

}  // namespace

std::string kind_name(Kind k) {
  switch (k) {
    case Kind::FixedPoint: return "FixedPoint";
    case Kind::Multistable: return "Multistable";
    case Kind::Bistable: return "Bistable";
    case Kind::LimitCycle: return "LimitCycle";
    case Kind::RingAttractor: return "RingAttractor";
    case Kind::SphereAttractor: return "SphereAttractor";
    case Kind::BoundedContinuousAttractor: return "BoundedContinuousAttractor";
    case Kind::Composite: return "Composite";
    case Kind::External: return "External";
  }
  fail(Err::InvalidSpec, "unknown kind");
}

Kind kind_from_name(const std::string& name) {
  static const std::pair<const char*, Kind> table[] = {
      {"FixedPoint", Kind::FixedPoint},
      {"Multistable", Kind::Multistable},
      {"Bistable", Kind::Bistable},
      {"LimitCycle", Kind::LimitCycle},
      {"RingAttractor", Kind::RingAttractor},
      {"SphereAttractor", Kind::SphereAttractor},
      {"BoundedContinuousAttractor", Kind::BoundedContinuousAttractor},
      {"Composite", Kind::Composite},
      {"External", Kind::External},
  };
  for (const auto& [n, k] : table) {
    if (name == n) return k;
  }
  fail(Err::ParseError, "unknown system kind '" + name + "'");
}

void SystemSpec::validate() const {
  if (dim < 1) fail(Err::InvalidSpec, "dim must be >= 1");
  switch (kind) {
    case Kind::LimitCycle:
    case Kind::RingAttractor:
      if (dim < 2) fail(Err::InvalidSpec, kind_name(kind) + " needs dim >= 2");
      break;
    case Kind::Multistable: {
      if (params.roots.empty()) fail(Err::InvalidSpec, "Multistable needs at least one root");
      for (size_t i = 0; i < params.roots.size(); ++i) {
        if (!std::isfinite(params.roots[i])) fail(Err::InvalidSpec, "non-finite root");
        if (i > 0 && params.roots[i] <= params.roots[i - 1])
          fail(Err::InvalidSpec, "roots must be strictly increasing (duplicates rejected)");
      }
      break;
    }
    case Kind::BoundedContinuousAttractor:
      if (params.B <= 0.0) fail(Err::InvalidSpec, "B must be positive");
      if (params.d_bca < 1 || params.d_bca > dim)
        fail(Err::InvalidSpec, "d_bca must lie in [1, dim]");
      break;
    case Kind::SphereAttractor:
      if (params.R <= 0.0) fail(Err::InvalidSpec, "R must be positive");
      if (params.d_bca < 1 || params.d_bca + 1 > dim)
        fail(Err::InvalidSpec, "sphere block d_bca+1 must fit in dim");
      break;
    case Kind::Composite: {
      if (params.sub_specs.size() < 2) fail(Err::EmptyComposite, "composite needs >= 2 subsystems");
      int total = 0;
      for (const auto& sub : params.sub_specs) {
        if (sub.kind == Kind::External) fail(Err::InvalidSpec, "composite of External is not allowed");
        sub.validate();
        total += sub.dim;
      }
      if (total != dim) fail(Err::DimensionMismatch, "composite dim must equal the sum of sub-dims");
      break;
    }
    default:
      break;
  }
}

SystemSpec make_fixed_point(int dim, double alpha) {
  SystemSpec s;
  s.kind = Kind::FixedPoint;
  s.dim = dim;
  s.params.alpha = alpha;
  s.validate();
  return s;
}

SystemSpec make_bistable(int dim, double alpha) {
  SystemSpec s;
  s.kind = Kind::Bistable;
  s.dim = dim;
  s.params.alpha = alpha;
  s.validate();
  return s;
}

SystemSpec make_multistable(std::vector<double> roots, int dim, double alpha) {
  SystemSpec s;
  s.kind = Kind::Multistable;
  s.dim = dim;
  std::sort(roots.begin(), roots.end());
  s.params.roots = std::move(roots);
  s.params.alpha = alpha;
  s.validate();
  return s;
}

SystemSpec make_limit_cycle(int dim, double alpha, double v) {
  SystemSpec s;
  s.kind = Kind::LimitCycle;
  s.dim = dim;
  s.params.alpha = alpha;
  s.params.v = v;
  s.validate();
  return s;
}

SystemSpec make_ring_attractor(int dim, double alpha) {
  SystemSpec s;
  s.kind = Kind::RingAttractor;
  s.dim = dim;
  s.params.alpha = alpha;
  s.params.v = 0.0;
  s.validate();
  return s;
}

SystemSpec make_bca(int d_bca, int dim, double B, double alpha) {
  SystemSpec s;
  s.kind = Kind::BoundedContinuousAttractor;
  s.dim = dim;
  s.params.d_bca = d_bca;
  s.params.B = B;
  s.params.alpha = alpha;
  s.validate();
  return s;
}

SystemSpec make_bla(int dim, double B, double alpha) { return make_bca(1, dim, B, alpha); }

SystemSpec make_sphere(int dim, double R, double alpha, double beta_res) {
  SystemSpec s;
  s.kind = Kind::SphereAttractor;
  s.dim = dim;
  s.params.R = R;
  s.params.alpha = alpha;
  s.params.beta_res = beta_res;
  s.params.d_bca = dim - 1;  // sphere block spans the state unless narrowed
  s.validate();
  return s;
}

SystemSpec make_external(int dim) {
  SystemSpec s;
  s.kind = Kind::External;
  s.dim = dim;
  s.validate();
  return s;
}

SystemSpec compose(const std::vector<SystemSpec>& specs) {
  if (specs.size() < 2) fail(Err::EmptyComposite, "compose needs at least two subsystems");
  SystemSpec s;
  s.kind = Kind::Composite;
  s.params.sub_specs = specs;
  s.dim = 0;
  for (const auto& sub : specs) s.dim += sub.dim;
  s.validate();
  return s;
}

Vec eval_field(const SystemSpec& spec, const Vec& x) {
  if (spec.kind == Kind::External)
    fail(Err::ExternalSystemHasNoField, "External systems carry trajectories only");
  check_dim(spec, x);
  if (!all_finite(x)) fail(Err::NonFiniteState, "eval_field: non-finite state");

  const auto& p = spec.params;
  Vec f = Vec::Zero(spec.dim);
  switch (spec.kind) {
    case Kind::FixedPoint:
      f = p.alpha * x;
      break;
    case Kind::Multistable: {
      double prod = p.alpha;
      for (double r : p.roots) prod *= (x[0] - r);
      f[0] = prod;
      for (int i = 1; i < spec.dim; ++i) f[i] = p.alpha * x[i];
      break;
    }
    case Kind::Bistable:
      f[0] = -(x[0] * x[0] * x[0] - x[0]);
      for (int i = 1; i < spec.dim; ++i) f[i] = p.alpha * x[i];
      break;
    case Kind::LimitCycle:
    case Kind::RingAttractor: {
      const double v = (spec.kind == Kind::RingAttractor) ? 0.0 : p.v;
      polar_block_field(p.alpha, v, x[0], x[1], f[0], f[1]);
      for (int i = 2; i < spec.dim; ++i) f[i] = p.alpha * x[i];
      break;
    }
    case Kind::SphereAttractor: {
      const int m = sphere_block(spec);
      const double norm = x.head(m).norm();
      if (norm >= kRadiusEps) f.head(m) = p.alpha * (norm - p.R) / norm * x.head(m);
      for (int i = m; i < spec.dim; ++i) f[i] = p.beta_res * x[i];
      break;
    }
    case Kind::BoundedContinuousAttractor: {
      // componentwise clip-projection; zero flow inside the box
      for (int i = 0; i < p.d_bca; ++i) {
        const double c = std::clamp(x[i], -p.B, p.B);
        f[i] = p.alpha * (x[i] - c);
      }
      for (int i = p.d_bca; i < spec.dim; ++i) f[i] = p.alpha * x[i];
      break;
    }
    case Kind::Composite: {
      int off = 0;
      for (const auto& sub : p.sub_specs) {
        f.segment(off, sub.dim) = eval_field(sub, x.segment(off, sub.dim));
        off += sub.dim;
      }
      break;
    }
    case Kind::External:
      break;  // unreachable
  }
  return f;
}

Mat field_jacobian(const SystemSpec& spec, const Vec& x) {
  if (spec.kind == Kind::External)
    fail(Err::ExternalSystemHasNoField, "External systems carry trajectories only");
  check_dim(spec, x);

  const auto& p = spec.params;
  Mat J = Mat::Zero(spec.dim, spec.dim);
  switch (spec.kind) {
    case Kind::FixedPoint:
      J.diagonal().setConstant(p.alpha);
      break;
    case Kind::Multistable: {
      double sum = 0.0;
      for (size_t j = 0; j < p.roots.size(); ++j) {
        double prod = p.alpha;
        for (size_t i = 0; i < p.roots.size(); ++i)
          if (i != j) prod *= (x[0] - p.roots[i]);
        sum += prod;
      }
      J(0, 0) = sum;
      for (int i = 1; i < spec.dim; ++i) J(i, i) = p.alpha;
      break;
    }
    case Kind::Bistable:
      J(0, 0) = -(3.0 * x[0] * x[0] - 1.0);
      for (int i = 1; i < spec.dim; ++i) J(i, i) = p.alpha;
      break;
    case Kind::LimitCycle:
    case Kind::RingAttractor: {
      const double v = (spec.kind == Kind::RingAttractor) ? 0.0 : p.v;
      polar_block_jacobian(p.alpha, v, x[0], x[1], J.topLeftCorner(2, 2));
      for (int i = 2; i < spec.dim; ++i) J(i, i) = p.alpha;
      break;
    }
    case Kind::SphereAttractor: {
      const int m = sphere_block(spec);
      const double norm = x.head(m).norm();
      if (norm >= kRadiusEps) {
        const Vec u = x.head(m) / norm;
        J.topLeftCorner(m, m) =
            p.alpha * Mat::Identity(m, m) -
            (p.alpha * p.R / norm) * (Mat::Identity(m, m) - u * u.transpose());
      }
      for (int i = m; i < spec.dim; ++i) J(i, i) = p.beta_res;
      break;
    }
    case Kind::BoundedContinuousAttractor: {
      for (int i = 0; i < p.d_bca; ++i) J(i, i) = (std::abs(x[i]) > p.B) ? p.alpha : 0.0;
      for (int i = p.d_bca; i < spec.dim; ++i) J(i, i) = p.alpha;
      break;
    }
    case Kind::Composite: {
      int off = 0;
      for (const auto& sub : p.sub_specs) {
        J.block(off, off, sub.dim, sub.dim) = field_jacobian(sub, x.segment(off, sub.dim));
        off += sub.dim;
      }
      break;
    }
    case Kind::External:
      break;
  }
  return J;
}

bool has_analytic_flow(const SystemSpec& spec) {
  return spec.kind == Kind::FixedPoint || spec.kind == Kind::LimitCycle ||
         spec.kind == Kind::RingAttractor;
}

RadialFlow radial_flow(double r0, double alpha, double t) {
  if (r0 < 0.0) fail(Err::InvalidSpec, "radial_flow needs r0 >= 0");
  const double E = std::exp(alpha * t);
  const double den = r0 + (1.0 - r0) * E;
  if (!(den > 0.0) || !std::isfinite(den))
    fail(Err::NonFiniteState, "radial flow leaves the admissible range");
  return {r0 / den, E / (den * den)};
}

Vec analytic_flow(const SystemSpec& spec, const Vec& x0, double t) {
  if (!has_analytic_flow(spec)) fail(Err::NoClosedForm, kind_name(spec.kind) + " has no closed-form flow");
  check_dim(spec, x0);
  const auto& p = spec.params;
  const double E = std::exp(p.alpha * t);

  if (spec.kind == Kind::FixedPoint) return (E * x0).eval();

  const double v = (spec.kind == Kind::RingAttractor) ? 0.0 : p.v;
  Vec out(spec.dim);
  const double r0 = std::hypot(x0[0], x0[1]);
  if (r0 < kRadiusEps) {
    out[0] = 0.0;
    out[1] = 0.0;
  } else {
    const double theta = std::atan2(x0[1], x0[0]) + v * t;
    const double r = radial_flow(r0, p.alpha, t).r;
    out[0] = r * std::cos(theta);
    out[1] = r * std::sin(theta);
  }
  for (int i = 2; i < spec.dim; ++i) out[i] = E * x0[i];
  return out;
}

Mat analytic_flow_jacobian(const SystemSpec& spec, const Vec& x0, double t) {
  if (!has_analytic_flow(spec)) fail(Err::NoClosedForm, kind_name(spec.kind) + " has no closed-form flow");
  check_dim(spec, x0);
  const auto& p = spec.params;
  const double E = std::exp(p.alpha * t);

  Mat J = Mat::Zero(spec.dim, spec.dim);
  if (spec.kind == Kind::FixedPoint) {
    J.diagonal().setConstant(E);
    return J;
  }

  const double v = (spec.kind == Kind::RingAttractor) ? 0.0 : p.v;
  const double r0 = std::hypot(x0[0], x0[1]);
  if (r0 < kRadiusEps) {
    // radial limit of dR/dr0 at the origin, rotated by the angular advance
    const double c = std::cos(v * t), s = std::sin(v * t);
    const double rp = 1.0 / E;
    J(0, 0) = rp * c;
    J(0, 1) = -rp * s;
    J(1, 0) = rp * s;
    J(1, 1) = rp * c;
  } else {
    const auto rf = radial_flow(r0, p.alpha, t);
    const double theta = std::atan2(x0[1], x0[0]) + v * t;
    const double c = std::cos(theta), s = std::sin(theta);
    const double ux = x0[0] / r0, uy = x0[1] / r0;
    const double rr = rf.r / r0;
    J(0, 0) = rf.dr_dr0 * c * ux + rr * s * uy;
    J(0, 1) = rf.dr_dr0 * c * uy - rr * s * ux;
    J(1, 0) = rf.dr_dr0 * s * ux - rr * c * uy;
    J(1, 1) = rf.dr_dr0 * s * uy + rr * c * ux;
  }
  for (int i = 2; i < spec.dim; ++i) J(i, i) = E;
  return J;
}

Vec analytic_flow_dv(const SystemSpec& spec, const Vec& x0, double t) {
  Vec d = Vec::Zero(spec.dim);
  if (spec.kind != Kind::LimitCycle) return d;
  check_dim(spec, x0);
  const double r0 = std::hypot(x0[0], x0[1]);
  if (r0 < kRadiusEps) return d;
  const auto rf = radial_flow(r0, spec.params.alpha, t);
  const double theta = std::atan2(x0[1], x0[0]) + spec.params.v * t;
  d[0] = -t * rf.r * std::sin(theta);
  d[1] = t * rf.r * std::cos(theta);
  return d;
}

namespace {

std::vector<Vec> box_grid(double B, int d_box, int dim, int n_points) {
  std::vector<Vec> pts;
  pts.reserve(n_points);
  if (d_box == 1) {
    for (int k = 0; k < n_points; ++k) {
      Vec p = Vec::Zero(dim);
      p[0] = (n_points == 1) ? 0.0 : -B + 2.0 * B * k / (n_points - 1);
      pts.push_back(p);
    }
    return pts;
  }
  const int m = std::max(2, static_cast<int>(std::ceil(std::pow(double(n_points), 1.0 / d_box))));
  std::vector<int> idx(d_box, 0);
  while (static_cast<int>(pts.size()) < n_points) {
    Vec p = Vec::Zero(dim);
    for (int a = 0; a < d_box; ++a) p[a] = -B + 2.0 * B * idx[a] / (m - 1);
    pts.push_back(p);
    int a = d_box - 1;
    while (a >= 0 && ++idx[a] == m) idx[a--] = 0;
    if (a < 0) break;
  }
  return pts;
}

}  // namespace

ManifoldSample invariant_manifold(const SystemSpec& spec, int n_points) {
  if (spec.kind == Kind::External)
    fail(Err::ExternalSystemHasNoField, "External systems have no designed manifold");
  if (n_points < 1) fail(Err::InvalidSpec, "n_points must be positive");
  spec.validate();

  const auto& p = spec.params;
  ManifoldSample out;
  switch (spec.kind) {
    case Kind::FixedPoint:
      out.descriptor = ManifoldSample::Descriptor::Point;
      out.points.assign(n_points, Vec::Zero(spec.dim));
      break;
    case Kind::Multistable: {
      out.descriptor = ManifoldSample::Descriptor::Point;
      for (int k = 0; k < n_points; ++k) {
        Vec pt = Vec::Zero(spec.dim);
        pt[0] = p.roots[k % p.roots.size()];
        out.points.push_back(pt);
      }
      break;
    }
    case Kind::Bistable: {
      // the two stable wells of xdot = -(x^3 - x)
      out.descriptor = ManifoldSample::Descriptor::Point;
      const double wells[2] = {-1.0, 1.0};
      for (int k = 0; k < n_points; ++k) {
        Vec pt = Vec::Zero(spec.dim);
        pt[0] = wells[k % 2];
        out.points.push_back(pt);
      }
      break;
    }
    case Kind::LimitCycle:
    case Kind::RingAttractor: {
      out.descriptor = ManifoldSample::Descriptor::Circle;
      for (int k = 0; k < n_points; ++k) {
        const double a = 2.0 * M_PI * k / n_points;
        Vec pt = Vec::Zero(spec.dim);
        pt[0] = std::cos(a);
        pt[1] = std::sin(a);
        out.points.push_back(pt);
      }
      break;
    }
    case Kind::SphereAttractor: {
      out.descriptor = ManifoldSample::Descriptor::Sphere;
      const int m = sphere_block(spec);
      Rng rng(0xDAA0F1E1DULL);
      for (int k = 0; k < n_points; ++k) {
        Vec pt = Vec::Zero(spec.dim);
        if (m == 1) {
          pt[0] = (k % 2 == 0) ? p.R : -p.R;
        } else if (m == 2) {
          const double a = 2.0 * M_PI * k / n_points;
          pt[0] = p.R * std::cos(a);
          pt[1] = p.R * std::sin(a);
        } else {
          Vec u(m);
          do {
            for (int i = 0; i < m; ++i) u[i] = rng.normal();
          } while (u.norm() < kRadiusEps);
          pt.head(m) = p.R * u / u.norm();
        }
        out.points.push_back(pt);
      }
      break;
    }
    case Kind::BoundedContinuousAttractor:
      out.descriptor = (p.d_bca == 1) ? ManifoldSample::Descriptor::Segment
                                      : ManifoldSample::Descriptor::BoxInterior;
      out.points = box_grid(p.B, p.d_bca, spec.dim, n_points);
      break;
    case Kind::Composite: {
      out.descriptor = ManifoldSample::Descriptor::Product;
      const int nsub = static_cast<int>(p.sub_specs.size());
      const int m = std::max(
          1, static_cast<int>(std::ceil(std::pow(double(n_points), 1.0 / nsub))));
      std::vector<ManifoldSample> subs;
      for (const auto& sub : p.sub_specs) subs.push_back(invariant_manifold(sub, m));
      std::vector<int> idx(nsub, 0);
      while (static_cast<int>(out.points.size()) < n_points) {
        Vec pt(spec.dim);
        int off = 0;
        for (int a = 0; a < nsub; ++a) {
          const auto& sp = subs[a].points[idx[a] % subs[a].points.size()];
          pt.segment(off, sp.size()) = sp;
          off += static_cast<int>(sp.size());
        }
        out.points.push_back(pt);
        int a = nsub - 1;
        while (a >= 0 && ++idx[a] == m) idx[a--] = 0;
        if (a < 0 && static_cast<int>(out.points.size()) < n_points) idx.assign(nsub, 0);
      }
      break;
    }
    case Kind::External:
      break;
  }
  return out;
}

nlohmann::json to_json(const SystemSpec& spec) {
  nlohmann::json j;
  j["kind"] = kind_name(spec.kind);
  j["dim"] = spec.dim;
  nlohmann::json params = nlohmann::json::object();
  const auto& p = spec.params;
  switch (spec.kind) {
    case Kind::FixedPoint:
    case Kind::Bistable:
      params["alpha"] = p.alpha;
      break;
    case Kind::Multistable:
      params["alpha"] = p.alpha;
      params["roots"] = p.roots;
      break;
    case Kind::LimitCycle:
      params["alpha"] = p.alpha;
      params["v"] = p.v;
      break;
    case Kind::RingAttractor:
      params["alpha"] = p.alpha;
      break;
    case Kind::SphereAttractor:
      params["alpha"] = p.alpha;
      params["R"] = p.R;
      params["beta_res"] = p.beta_res;
      params["d_bca"] = p.d_bca;
      break;
    case Kind::BoundedContinuousAttractor:
      params["alpha"] = p.alpha;
      params["B"] = p.B;
      params["d_bca"] = p.d_bca;
      break;
    case Kind::Composite: {
      auto subs = nlohmann::json::array();
      for (const auto& sub : p.sub_specs) subs.push_back(to_json(sub));
      params["sub_specs"] = subs;
      break;
    }
    case Kind::External:
      break;
  }
  j["params"] = params;
  return j;
}

SystemSpec spec_from_json(const nlohmann::json& j) {
  SystemSpec s;
  try {
    s.kind = kind_from_name(j.at("kind").get<std::string>());
    s.dim = j.at("dim").get<int>();
    const auto& params = j.at("params");
    auto& p = s.params;
    if (params.contains("alpha")) p.alpha = params["alpha"].get<double>();
    if (params.contains("v")) p.v = params["v"].get<double>();
    if (params.contains("roots")) p.roots = params["roots"].get<std::vector<double>>();
    if (params.contains("B")) p.B = params["B"].get<double>();
    if (params.contains("R")) p.R = params["R"].get<double>();
    if (params.contains("beta_res")) p.beta_res = params["beta_res"].get<double>();
    if (params.contains("d_bca")) p.d_bca = params["d_bca"].get<int>();
    if (params.contains("sub_specs"))
      for (const auto& sub : params["sub_specs"]) p.sub_specs.push_back(spec_from_json(sub));
    if (s.kind == Kind::RingAttractor) p.v = 0.0;
    if (s.kind == Kind::SphereAttractor && !params.contains("d_bca")) p.d_bca = s.dim - 1;
  } catch (const nlohmann::json::exception& e) {
    fail(Err::ParseError, std::string("system spec: ") + e.what());
  }
  s.validate();
  return s;
}

}  // namespace daa
