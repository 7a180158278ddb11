#include "daa/targets.hpp"

#include <cmath>

namespace daa {

namespace {

SystemSpec two_blas_spec() {
  // bistable x-axis crossed with a 1-D bounded line attractor: two parallel
  // line attractors. The cubic is the bistable system shifted by 1.5
  // (roots 0.5/1.5/2.5 give -((x-1.5)^3 - (x-1.5))) so the benchmark
  // initial-condition box (0,3)^2 straddles the separatrix and both
  // attractors show up in the data. The segment half-width 0.3 keeps the
  // binary well structure and the line structure at comparable scale in
  // that window.
  return compose({make_multistable({0.5, 1.5, 2.5}, 1), make_bca(1, 1, 0.3)});
}

void check_dim(const TargetSpec& spec, const Vec& x) {
  if (x.size() != spec.dim())
    fail(Err::DimensionMismatch, "state dimension does not match target '" + spec.name + "'");
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

int TargetSpec::dim() const { return kind == TargetKind::Archetype ? base.dim : 2; }

void TargetSpec::validate() const {
  if (noise_sigma < 0.0) fail(Err::InvalidSpec, "noise_sigma must be nonnegative");
  if (kind == TargetKind::VanDerPol && !(mu > 0.0)) fail(Err::InvalidSpec, "Van der Pol needs mu > 0");
  if (kind == TargetKind::Archetype) base.validate();
  if (perturbation) perturbation->validate();
}

Vec eval_target_field(const TargetSpec& spec, const Vec& x) {
  spec.validate();
  check_dim(spec, x);
  switch (spec.kind) {
    case TargetKind::Archetype:
      return eval_field(spec.base, x);
    case TargetKind::VanDerPol: {
      Vec f(2);
      f[0] = x[1];
      f[1] = spec.mu * (1.0 - x[0] * x[0]) * x[1] - x[0];
      return f;
    }
    case TargetKind::Selkov: {
      Vec f(2);
      f[0] = -x[0] + spec.a * x[1] + x[0] * x[0] * x[1];
      f[1] = spec.b - spec.a * x[1] - x[0] * x[0] * x[1];
      return f;
    }
    case TargetKind::LienardSigmoid: {
      // sign-switching damping b(x^2-1)y: with b < 0 energy is pumped inside
      // |x| < 1 and dissipated outside, giving a sustained cycle
      Vec f(2);
      f[0] = x[1];
      f[1] = -sigmoid(spec.a * x[0]) + 0.5 + spec.b * (x[0] * x[0] - 1.0) * x[1];
      return f;
    }
    case TargetKind::External:
      fail(Err::ExternalSystemHasNoField, "external targets carry trajectories only");
  }
  fail(Err::InvalidSpec, "unknown target kind");
}

Mat target_field_jacobian(const TargetSpec& spec, const Vec& x) {
  spec.validate();
  check_dim(spec, x);
  switch (spec.kind) {
    case TargetKind::Archetype:
      return field_jacobian(spec.base, x);
    case TargetKind::VanDerPol: {
      Mat J(2, 2);
      J << 0.0, 1.0, -2.0 * spec.mu * x[0] * x[1] - 1.0, spec.mu * (1.0 - x[0] * x[0]);
      return J;
    }
    case TargetKind::Selkov: {
      Mat J(2, 2);
      J << -1.0 + 2.0 * x[0] * x[1], spec.a + x[0] * x[0],  //
          -2.0 * x[0] * x[1], -spec.a - x[0] * x[0];
      return J;
    }
    case TargetKind::LienardSigmoid: {
      const double s = sigmoid(spec.a * x[0]);
      Mat J(2, 2);
      J << 0.0, 1.0,  //
          -spec.a * s * (1.0 - s) + 2.0 * spec.b * x[0] * x[1],
          spec.b * (x[0] * x[0] - 1.0);
      return J;
    }
    case TargetKind::External:
      fail(Err::ExternalSystemHasNoField, "external targets carry trajectories only");
  }
  fail(Err::InvalidSpec, "unknown target kind");
}

const std::vector<std::string>& target_registry() {
  static const std::vector<std::string> names = {
      "ring", "ring_noisy", "vdp", "vdp_noisy", "selkov", "lienard", "two_blas", "external"};
  return names;
}

TargetSpec target_by_name(const std::string& name) {
  TargetSpec t;
  t.name = name;
  if (name == "ring" || name == "ring_noisy") {
    t.kind = TargetKind::Archetype;
    t.base = make_ring_attractor(2);
    t.noise_sigma = (name == "ring_noisy") ? 0.1 : 0.0;
  } else if (name == "vdp" || name == "vdp_noisy") {
    t.kind = TargetKind::VanDerPol;
    t.mu = 0.3;
    t.noise_sigma = (name == "vdp_noisy") ? 0.25 : 0.0;
  } else if (name == "selkov") {
    t.kind = TargetKind::Selkov;
    t.a = 0.05;
    t.b = 0.5;
  } else if (name == "lienard") {
    t.kind = TargetKind::LienardSigmoid;
    t.a = 1.5;
    t.b = -0.5;
  } else if (name == "two_blas") {
    t.kind = TargetKind::Archetype;
    t.base = two_blas_spec();
  } else if (name == "external") {
    t.kind = TargetKind::External;
  } else {
    fail(Err::InvalidSpec, "unknown target '" + name + "'");
  }
  t.validate();
  return t;
}

SimDefaults default_sim(const std::string& name, uint64_t seed) {
  auto box2 = [&](double lo, double hi) {
    return InitSampler::box(Vec::Constant(2, lo), Vec::Constant(2, hi), seed);
  };
  if (name == "ring" || name == "ring_noisy")
    return {0.2, 2.0, 50, InitSampler::annulus(0.5, 1.5, seed)};
  if (name == "vdp" || name == "vdp_noisy") return {0.1, 5.0, 50, box2(-2.0, 2.0)};
  if (name == "lienard") return {0.1, 15.0, 50, box2(-1.5, 1.5)};
  if (name == "selkov") return {0.1, 5.0, 50, box2(0.0, 3.0)};
  if (name == "two_blas") return {0.1, 5.0, 50, box2(0.0, 3.0)};
  fail(Err::InvalidSpec, "no simulation defaults for target '" + name + "'");
}

nlohmann::json to_json(const TargetSpec& spec) {
  nlohmann::json j;
  j["name"] = spec.name;
  j["noise_sigma"] = spec.noise_sigma;
  switch (spec.kind) {
    case TargetKind::Archetype:
      j["kind"] = "Archetype";
      j["base"] = to_json(spec.base);
      break;
    case TargetKind::VanDerPol:
      j["kind"] = "VanDerPol";
      j["mu"] = spec.mu;
      break;
    case TargetKind::Selkov:
      j["kind"] = "Selkov";
      j["a"] = spec.a;
      j["b"] = spec.b;
      break;
    case TargetKind::LienardSigmoid:
      j["kind"] = "LienardSigmoid";
      j["a"] = spec.a;
      j["b"] = spec.b;
      break;
    case TargetKind::External:
      j["kind"] = "External";
      break;
  }
  if (spec.perturbation) j["perturbation"] = to_json(*spec.perturbation);
  return j;
}

TargetSpec target_from_json(const nlohmann::json& j) {
  TargetSpec t;
  try {
    t.name = j.at("name").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "Archetype") {
      t.kind = TargetKind::Archetype;
      t.base = spec_from_json(j.at("base"));
    } else if (kind == "VanDerPol") {
      t.kind = TargetKind::VanDerPol;
      t.mu = j.value("mu", 0.3);
    } else if (kind == "Selkov") {
      t.kind = TargetKind::Selkov;
      t.a = j.value("a", 0.05);
      t.b = j.value("b", 0.5);
    } else if (kind == "LienardSigmoid") {
      t.kind = TargetKind::LienardSigmoid;
      t.a = j.value("a", 1.5);
      t.b = j.value("b", -0.5);
    } else if (kind == "External") {
      t.kind = TargetKind::External;
    } else {
      fail(Err::ParseError, "unknown target kind '" + kind + "'");
    }
    t.noise_sigma = j.value("noise_sigma", 0.0);
    if (j.contains("perturbation") && !j["perturbation"].is_null())
      t.perturbation = perturbation_from_json(j["perturbation"]);
  } catch (const nlohmann::json::exception& e) {
    fail(Err::ParseError, std::string("target spec: ") + e.what());
  }
  t.validate();
  return t;
}

ExternalTrajectorySet load_external(const std::string& path) {
  ExternalTrajectorySet out;
  out.batch = load_trajectories(path);
  out.source_label =
      out.batch.meta.is_object() ? out.batch.meta.value("source", path) : path;
  return out;
}

}  // namespace daa
