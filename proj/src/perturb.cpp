#include "daa/perturb.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace daa {

void PerturbationSpec::validate() const {
  if (kind == Kind::DiffeoInterp) {
    if (s < 0.0 || s > 1.0) fail(Err::InvalidSpec, "DiffeoInterp needs s in [0,1]");
  } else {
    if (s < 0.0) fail(Err::InvalidSpec, "GpField needs s >= 0");
  }
  if (gp.variance <= 0.0) fail(Err::InvalidSpec, "kernel variance must be positive");
  if (gp.lengthscale && *gp.lengthscale <= 0.0) fail(Err::InvalidSpec, "lengthscale must be positive");
}

nlohmann::json to_json(const PerturbationSpec& spec) {
  nlohmann::json j;
  j["kind"] = spec.kind == PerturbationSpec::Kind::DiffeoInterp ? "DiffeoInterp" : "GpField";
  j["s"] = spec.s;
  j["seed"] = spec.seed;
  j["gp"] = {{"variance", spec.gp.variance}, {"grid_n", spec.gp.grid_n}};
  if (spec.gp.lengthscale) j["gp"]["lengthscale"] = *spec.gp.lengthscale;
  return j;
}

PerturbationSpec perturbation_from_json(const nlohmann::json& j) {
  PerturbationSpec spec;
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "DiffeoInterp")
      spec.kind = PerturbationSpec::Kind::DiffeoInterp;
    else if (kind == "GpField")
      spec.kind = PerturbationSpec::Kind::GpField;
    else
      fail(Err::ParseError, "unknown perturbation kind '" + kind + "'");
    spec.s = j.at("s").get<double>();
    spec.seed = j.at("seed").get<uint64_t>();
    if (j.contains("gp")) {
      const auto& gp = j["gp"];
      if (gp.contains("variance")) spec.gp.variance = gp["variance"].get<double>();
      if (gp.contains("grid_n")) spec.gp.grid_n = gp["grid_n"].get<int>();
      if (gp.contains("lengthscale")) spec.gp.lengthscale = gp["lengthscale"].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Err::ParseError, std::string("perturbation spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

DiffeoModel random_diffeo_interp(const PerturbationSpec& spec, int dim, int hidden,
                                 int flow_steps) {
  if (spec.kind != PerturbationSpec::Kind::DiffeoInterp)
    fail(Err::InvalidSpec, "random_diffeo_interp needs a DiffeoInterp spec");
  spec.validate();
  DiffeoModel m;
  m.flow_steps = flow_steps;
  m.field = MlpField::init_gaussian(dim, hidden, 0.02, 0.5, spec.seed);
  m.field.scale_output(spec.s);
  return m;
}

void Box2::validate() const {
  if (lo.size() != 2 || hi.size() != 2) fail(Err::DegenerateLattice, "lattice box must be 2-D");
  for (int i = 0; i < 2; ++i)
    if (!(lo[i] < hi[i])) fail(Err::DegenerateLattice, "lattice box needs lo < hi");
}

Box2 bounding_box(const std::vector<Mat>& steps, double pad_fraction) {
  if (steps.empty() || steps[0].rows() != 2)
    fail(Err::DegenerateLattice, "bounding box needs 2-D samples");
  Vec lo = Vec::Constant(2, std::numeric_limits<double>::infinity());
  Vec hi = -lo;
  for (const Mat& m : steps) {
    lo = lo.cwiseMin(m.rowwise().minCoeff());
    hi = hi.cwiseMax(m.rowwise().maxCoeff());
  }
  const Vec pad = pad_fraction * (hi - lo).cwiseMax(1e-6);
  Box2 box{lo - pad, hi + pad};
  box.validate();
  return box;
}

Vec LatticeField::eval(const Vec& p) const {
  const double gx = (nx - 1) * (p[0] - box.lo[0]) / (box.hi[0] - box.lo[0]);
  const double gy = (ny - 1) * (p[1] - box.lo[1]) / (box.hi[1] - box.lo[1]);
  const double cx = std::clamp(gx, 0.0, double(nx - 1));
  const double cy = std::clamp(gy, 0.0, double(ny - 1));
  const int i0 = std::min(static_cast<int>(cx), nx - 2);
  const int j0 = std::min(static_cast<int>(cy), ny - 2);
  const double u = cx - i0, v = cy - j0;
  Vec out(2);
  out[0] = (1 - u) * (1 - v) * fx(i0, j0) + u * (1 - v) * fx(i0 + 1, j0) +
           (1 - u) * v * fx(i0, j0 + 1) + u * v * fx(i0 + 1, j0 + 1);
  out[1] = (1 - u) * (1 - v) * fy(i0, j0) + u * (1 - v) * fy(i0 + 1, j0) +
           (1 - u) * v * fy(i0, j0 + 1) + u * v * fy(i0 + 1, j0 + 1);
  return out;
}

double LatticeField::rms() const {
  const double ss = fx.array().square().sum() + fy.array().square().sum();
  return std::sqrt(ss / double(nx * ny));
}

double LatticeField::sup_norm() const {
  return (fx.array().square() + fy.array().square()).sqrt().maxCoeff();
}

void LatticeField::scale(double s) {
  fx *= s;
  fy *= s;
}

LatticeField gp_field_perturbation_delta(const PerturbationSpec& spec, const Box2& box) {
  if (spec.kind != PerturbationSpec::Kind::GpField)
    fail(Err::InvalidSpec, "gp_field_perturbation needs a GpField spec");
  spec.validate();
  box.validate();
  const int n = spec.gp.grid_n;
  if (n < 2) fail(Err::DegenerateLattice, "lattice needs at least 2 nodes per axis");

  LatticeField field;
  field.box = box;
  field.nx = n;
  field.ny = n;
  field.fx = Mat::Zero(n, n);
  field.fy = Mat::Zero(n, n);
  if (spec.s == 0.0) return field;  // exact zero perturbation

  // draw order is fixed: lengthscale first, then the two component vectors
  Rng rng(stream_seed(spec.seed, 0x6F));
  const double ell = spec.gp.lengthscale ? *spec.gp.lengthscale : rng.uniform(0.1, 1.0);

  const int m = n * n;
  Mat nodes(2, m);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      nodes(0, j * n + i) = box.lo[0] + (box.hi[0] - box.lo[0]) * i / (n - 1);
      nodes(1, j * n + i) = box.lo[1] + (box.hi[1] - box.lo[1]) * j / (n - 1);
    }

  Mat K(m, m);
  const double inv2l2 = 1.0 / (2.0 * ell * ell);
  for (int a = 0; a < m; ++a) {
    K(a, a) = spec.gp.variance + 1e-10 * spec.gp.variance;
    for (int b = a + 1; b < m; ++b) {
      const double d2 = (nodes.col(a) - nodes.col(b)).squaredNorm();
      K(a, b) = K(b, a) = spec.gp.variance * std::exp(-d2 * inv2l2);
    }
  }
  Eigen::LLT<Mat> llt(K);
  if (llt.info() != Eigen::Success) fail(Err::DegenerateLattice, "kernel matrix not positive definite");
  const Mat L = llt.matrixL();

  for (int comp = 0; comp < 2; ++comp) {
    Vec z(m);
    for (int a = 0; a < m; ++a) z[a] = rng.normal();
    const Vec sample = L * z;
    Mat& dst = (comp == 0) ? field.fx : field.fy;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) dst(i, j) = sample[j * n + i];
  }

  const double r = field.rms();
  if (!(r > 0.0)) fail(Err::DegenerateLattice, "GP draw has zero norm");
  field.scale(spec.s / r);
  return field;
}

std::function<Vec(const Vec&)> perturbed_field(const SystemSpec& base, const LatticeField& delta) {
  if (base.dim != 2) fail(Err::InvalidSpec, "field perturbations are defined for 2-D systems");
  return [base, delta](const Vec& x) -> Vec { return eval_field(base, x) + delta.eval(x); };
}

void GronwallInput::validate() const {
  if (!(lipschitz > 0.0)) fail(Err::InvalidSpec, "Lipschitz bound must be positive");
  if (delta_sup < 0.0) fail(Err::InvalidSpec, "delta_sup must be nonnegative");
  if (t < 0.0) fail(Err::InvalidSpec, "horizon must be nonnegative");
}

double gronwall_bound(const GronwallInput& in) {
  in.validate();
  return (in.delta_sup / in.lipschitz) * (std::exp(in.lipschitz * in.t) - 1.0);
}

double gronwall_integrated_bound(const GronwallInput& in) {
  in.validate();
  return in.delta_sup / (in.lipschitz * in.lipschitz) * std::exp(in.lipschitz * in.t);
}

double lipschitz_estimate(const std::function<Vec(const Vec&)>& field, const Box2& box,
                          int grid_n) {
  box.validate();
  if (grid_n < 2) fail(Err::DegenerateLattice, "lattice needs at least 2 nodes per axis");
  const double eps = 1e-6;
  double worst = 0.0;
  for (int j = 0; j < grid_n; ++j)
    for (int i = 0; i < grid_n; ++i) {
      Vec p(2);
      p[0] = box.lo[0] + (box.hi[0] - box.lo[0]) * i / (grid_n - 1);
      p[1] = box.lo[1] + (box.hi[1] - box.lo[1]) * j / (grid_n - 1);
      Mat J(2, 2);
      for (int c = 0; c < 2; ++c) {
        Vec hi = p, lo = p;
        hi[c] += eps;
        lo[c] -= eps;
        J.col(c) = (field(hi) - field(lo)) / (2.0 * eps);
      }
      worst = std::max(worst, J.operatorNorm());
    }
  return worst;
}

}  // namespace daa
