#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "daa/targets.hpp"

#include <cstdio>
#include <fstream>

using namespace daa;

namespace {

Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

TrajectoryBatch simulate_named(const std::string& name, uint64_t seed) {
  const auto target = target_by_name(name);
  auto d = default_sim(name, 0);
  SimConfig cfg{d.dt, d.t_max, d.n_traj, seed, 5};
  InitSampler sampler = d.sampler;
  sampler.seed = stream_seed(seed, 0x1C5);
  return simulate_batch([&](const Vec& x) { return eval_target_field(target, x); },
                        target.noise_sigma, sampler, cfg);
}

}  // namespace

TEST_CASE("benchmark fields at pinned points") {
  const auto vdp = target_by_name("vdp");
  const Vec f = eval_target_field(vdp, v2(0.0, 1.0));
  CHECK(f[0] == doctest::Approx(1.0));
  CHECK(f[1] == doctest::Approx(0.3));

  const auto selkov = target_by_name("selkov");
  const Vec g = eval_target_field(selkov, v2(0.0, 0.0));
  CHECK(g[0] == doctest::Approx(0.0));
  CHECK(g[1] == doctest::Approx(0.5));

  const auto lienard = target_by_name("lienard");
  const Vec h = eval_target_field(lienard, v2(0.0, 0.0));
  CHECK(h[0] == doctest::Approx(0.0));
  CHECK(h[1] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("van der Pol has a unique unstable equilibrium at the origin") {
  const auto vdp = target_by_name("vdp");
  CHECK(eval_target_field(vdp, v2(0, 0)).norm() == 0.0);
  // trace of the finite-difference Jacobian is positive
  const double eps = 1e-6;
  Mat J(2, 2);
  for (int c = 0; c < 2; ++c) {
    Vec hi = v2(0, 0), lo = v2(0, 0);
    hi[c] += eps;
    lo[c] -= eps;
    J.col(c) = (eval_target_field(vdp, hi) - eval_target_field(vdp, lo)) / (2 * eps);
  }
  CHECK(J.trace() > 0.0);
}

TEST_CASE("target jacobians match finite differences") {
  Rng rng(13);
  for (const char* name : {"vdp", "selkov", "lienard", "two_blas"}) {
    const auto t = target_by_name(name);
    for (int trial = 0; trial < 5; ++trial) {
      Vec x(2);
      x << 2.0 * rng.normal(), 2.0 * rng.normal();
      if (name == std::string("two_blas"))
        for (int i = 0; i < 2; ++i)
          if (std::abs(std::abs(x[i]) - 1.0) < 0.05) x[i] += 0.1;
      const Mat J = target_field_jacobian(t, x);
      Mat Jfd(2, 2);
      const double eps = 1e-6;
      for (int c = 0; c < 2; ++c) {
        Vec hi = x, lo = x;
        hi[c] += eps;
        lo[c] -= eps;
        Jfd.col(c) = (eval_target_field(t, hi) - eval_target_field(t, lo)) / (2 * eps);
      }
      CHECK((J - Jfd).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("registry holds the benchmark roster") {
  for (const auto& name : target_registry()) {
    const auto t = target_by_name(name);
    CHECK(t.name == name);
  }
  CHECK(target_by_name("ring_noisy").noise_sigma == doctest::Approx(0.1));
  CHECK(target_by_name("vdp_noisy").noise_sigma == doctest::Approx(0.25));
  CHECK(target_by_name("two_blas").dim() == 2);
  CHECK_THROWS_AS((void)target_by_name("nope"), Error);
  try {
    (void)eval_target_field(target_by_name("external"), v2(0, 0));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Err::ExternalSystemHasNoField);
  }
}

TEST_CASE("deterministic targets reproduce bit-identically under a seed") {
  const auto a = simulate_named("selkov", 5);
  const auto b = simulate_named("selkov", 5);
  REQUIRE(a.steps.size() == b.steps.size());
  for (size_t i = 0; i < a.steps.size(); ++i) CHECK((a.steps[i] - b.steps[i]).norm() == 0.0);
}

TEST_CASE("lienard trajectories stay bounded and keep rotating") {
  const auto batch = simulate_named("lienard", 9);
  double max_norm = 0.0;
  for (const auto& m : batch.steps) max_norm = std::max(max_norm, m.colwise().norm().maxCoeff());
  CHECK(max_norm < 10.0);
  // sustained oscillation: late-time states are far from any single point
  const Mat& last = batch.steps.back();
  Vec centroid = last.rowwise().mean();
  double spread = 0.0;
  for (int c = 0; c < last.cols(); ++c) spread += (last.col(c) - centroid).norm();
  CHECK(spread / last.cols() > 0.5);
}

TEST_CASE("external trajectory ingestion") {
  const std::string path = "test_targets_external.csv";

  SUBCASE("well-formed file") {
    const auto batch = simulate_named("ring", 3);
    write_trajectories(path, batch);
    const auto ext = load_external(path);
    CHECK(ext.batch.n_traj() == 50);
    CHECK(ext.batch.n_intervals() == 10);
    CHECK(ext.batch.dim() == 2);
    std::remove(path.c_str());
    std::remove(meta_path_for(path).c_str());
  }

  SUBCASE("NaN cell is rejected with its location") {
    std::ofstream f(path);
    f << "traj,t,x0,x1\n0,0,1.0,2.0\n0,0.1,nan,2.0\n";
    f.close();
    try {
      (void)load_external(path);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == Err::ParseError);
      CHECK(std::string(e.what()).find("row 3") != std::string::npos);
      CHECK(std::string(e.what()).find("column 3") != std::string::npos);
    }
    std::remove(path.c_str());
  }

  SUBCASE("ragged trajectories are rejected") {
    std::ofstream f(path);
    f << "traj,t,x0,x1\n0,0,1,2\n0,0.1,1,2\n1,0,3,4\n";
    f.close();
    CHECK_THROWS_AS((void)load_external(path), Error);
    std::remove(path.c_str());
  }
}

TEST_CASE("target JSON round trip") {
  for (const auto& name : target_registry()) {
    auto t = target_by_name(name);
    const auto j = to_json(t);
    const auto back = target_from_json(j);
    CHECK(to_json(back).dump() == j.dump());
  }
}
