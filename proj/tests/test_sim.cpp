#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "daa/archetypes.hpp"
#include "daa/sim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

using namespace daa;

namespace {

Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

FieldFn spec_field(const SystemSpec& spec) {
  return [spec](const Vec& x) { return eval_field(spec, x); };
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("rk4 hits the exponential decay solution") {
  const auto fp = make_fixed_point(1);
  Vec x0(1);
  x0 << 2.0;
  SimConfig cfg{0.1, 1.0, 1, 0, 10};
  const Mat traj = integrate_ode(spec_field(fp), x0, cfg);
  REQUIRE(traj.cols() == 11);
  CHECK(traj(0, 10) == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-8));
}

TEST_CASE("zero horizon keeps only the initial sample") {
  SimConfig cfg{0.1, 0.0, 1, 0, 5};
  const Mat traj = integrate_ode(spec_field(make_fixed_point(2)), v2(1, 2), cfg);
  REQUIRE(traj.cols() == 1);
  CHECK(traj(0, 0) == 1.0);
  CHECK(traj(1, 0) == 2.0);
}

TEST_CASE("ring radial contraction matches the closed form") {
  const auto ring = make_ring_attractor(2);
  SimConfig cfg{0.1, 1.0, 1, 0, 10};
  const Mat traj = integrate_ode(spec_field(ring), v2(0.5, 0.0), cfg);
  CHECK(traj.col(10).norm() == doctest::Approx(radial_flow(0.5, -1.0, 1.0).r).epsilon(1e-6));
}

TEST_CASE("rk4 shows fourth-order convergence under step halving") {
  const auto ring = make_ring_attractor(2);
  const double exact = radial_flow(0.4, -1.0, 2.0).r;
  auto terminal_error = [&](int substeps) {
    SimConfig cfg{2.0, 2.0, 1, 0, substeps};
    const Mat traj = integrate_ode(spec_field(ring), v2(0.4, 0.0), cfg);
    return std::abs(traj.col(1).norm() - exact);
  };
  const double ratio = terminal_error(4) / terminal_error(8);
  CHECK(ratio >= 12.0);
  CHECK(ratio <= 20.0);
}

TEST_CASE("euler-maruyama with zero noise is the euler path") {
  const auto ring = make_ring_attractor(2);
  SimConfig cfg{0.1, 0.5, 1, 0, 4};
  const Mat traj = integrate_sde(spec_field(ring), 0.0, v2(0.7, 0.2), cfg, 123);

  Vec x = v2(0.7, 0.2);
  const double h = cfg.dt / cfg.substeps;
  for (int i = 1; i <= cfg.n_intervals(); ++i) {
    for (int s = 0; s < cfg.substeps; ++s) x += h * eval_field(ring, x);
    CHECK((traj.col(i) - x).norm() == 0.0);
  }
}

TEST_CASE("noise paths are reproducible under a fixed stream") {
  const auto ring = make_ring_attractor(2);
  SimConfig cfg{0.1, 1.0, 1, 0, 5};
  const Mat a = integrate_sde(spec_field(ring), 0.1, v2(1, 0), cfg, 77);
  const Mat b = integrate_sde(spec_field(ring), 0.1, v2(1, 0), cfg, 77);
  CHECK((a - b).norm() == 0.0);
  const Mat c = integrate_sde(spec_field(ring), 0.1, v2(1, 0), cfg, 78);
  CHECK((a - c).norm() > 0.0);
}

TEST_CASE("wiener increments have variance sigma^2 h") {
  // drift-free walk: increment variance over many steps approximates h
  const FieldFn zero = [](const Vec& x) { return Vec::Zero(x.size()); };
  const double h = 0.01;
  SimConfig cfg{h, 1000.0, 1, 0, 1};
  Vec x0(1);
  x0 << 0.0;
  const Mat traj = integrate_sde(zero, 1.0, x0, cfg, 42);
  const int n = cfg.n_intervals();
  double mean = 0.0;
  for (int i = 1; i <= n; ++i) mean += traj(0, i) - traj(0, i - 1);
  mean /= n;
  double var = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double d = traj(0, i) - traj(0, i - 1) - mean;
    var += d * d;
  }
  var /= n;
  CHECK(var == doctest::Approx(h).epsilon(0.05));
}

TEST_CASE("annulus sampling is uniform in area") {
  const auto sampler = InitSampler::annulus(0.5, 1.5, 99);
  const auto pts = sample_initial(sampler, 100000);
  int inner = 0;
  for (const auto& p : pts) {
    const double r2 = p.squaredNorm();
    CHECK(r2 >= 0.25 - 1e-12);
    CHECK(r2 <= 2.25 + 1e-12);
    if (p.norm() <= 1.0) ++inner;
  }
  // area fraction of r in [0.5, 1.0] is 0.375; 3 sigma binomial margin
  const double frac = double(inner) / pts.size();
  const double margin = 3.0 * std::sqrt(0.375 * 0.625 / pts.size());
  CHECK(std::abs(frac - 0.375) <= margin);
}

TEST_CASE("box sampling respects tight bounds") {
  Vec lo = v2(0.5, -0.25), hi = v2(0.5 + 1e-9, -0.25 + 1e-9);
  const auto sampler = InitSampler::box(lo, hi, 4);
  for (const auto& p : sample_initial(sampler, 100)) {
    CHECK(p[0] >= lo[0]);
    CHECK(p[0] <= hi[0]);
    CHECK(p[1] >= lo[1]);
    CHECK(p[1] <= hi[1]);
  }
}

TEST_CASE("initial conditions are stable when the batch grows") {
  const auto sampler = InitSampler::annulus(0.5, 1.5, 7);
  const auto small = sample_initial(sampler, 10);
  const auto large = sample_initial(sampler, 20);
  for (int i = 0; i < 10; ++i) CHECK((small[i] - large[i]).norm() == 0.0);
}

namespace {

TrajectoryBatch ring_batch(int n_traj = 10, uint64_t seed = 21) {
  const auto ring = make_ring_attractor(2);
  SimConfig cfg{0.2, 2.0, n_traj, seed, 5};
  return simulate_batch(spec_field(ring), 0.0, InitSampler::annulus(0.5, 1.5, seed), cfg);
}

}  // namespace

TEST_CASE("standardization") {
  const auto batch = ring_batch();
  const auto norm = normalize(batch);
  const int d = batch.dim();
  const double count = double(batch.n_traj()) * batch.steps.size();

  Vec mean = Vec::Zero(d), var = Vec::Zero(d);
  for (const auto& m : norm.batch.steps) mean += m.rowwise().sum();
  mean /= count;
  for (const auto& m : norm.batch.steps)
    var += (m.colwise() - mean).array().square().matrix().rowwise().sum();
  var /= count;
  for (int i = 0; i < d; ++i) {
    CHECK(std::abs(mean[i]) <= 1e-9);
    CHECK(std::abs(std::sqrt(var[i]) - 1.0) <= 1e-9);
  }

  SUBCASE("idempotence") {
    const auto again = normalize(norm.batch);
    CHECK(again.mu.cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((again.sigma.array() - 1.0).abs().maxCoeff() <= 1e-9);
  }

  SUBCASE("constant batch is degenerate") {
    TrajectoryBatch flat;
    flat.dt = 0.1;
    flat.steps.assign(3, Mat::Ones(2, 4));
    try {
      (void)normalize(flat);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == Err::DegenerateDimension);
    }
  }
}

TEST_CASE("split partitions trajectories") {
  const auto batch = ring_batch(50);
  const auto [train, test] = split(batch, 0.8, 17);
  CHECK(train.n_traj() == 40);
  CHECK(test.n_traj() == 10);

  // disjoint with union equal to the full set: match columns against the batch
  std::set<int> seen;
  auto column_of = [&](const Vec& p0) {
    for (int b = 0; b < batch.n_traj(); ++b)
      if ((batch.steps[0].col(b) - p0).norm() == 0.0) return b;
    return -1;
  };
  for (int b = 0; b < train.n_traj(); ++b) seen.insert(column_of(train.steps[0].col(b)));
  for (int b = 0; b < test.n_traj(); ++b) seen.insert(column_of(test.steps[0].col(b)));
  CHECK(seen.size() == 50);
  CHECK(*seen.begin() == 0);

  const auto [train2, test2] = split(batch, 0.8, 17);
  CHECK((train.steps[0] - train2.steps[0]).norm() == 0.0);
  const auto [train3, test3] = split(batch, 0.8, 18);
  CHECK((train.steps[0] - train3.steps[0]).norm() > 0.0);
}

TEST_CASE("simulation is deterministic") {
  const auto a = ring_batch(8, 5);
  const auto b = ring_batch(8, 5);
  for (size_t i = 0; i < a.steps.size(); ++i) CHECK((a.steps[i] - b.steps[i]).norm() == 0.0);
}

TEST_CASE("trajectory files round-trip bit-exactly") {
  const std::string path = "test_sim_io.csv";
  auto batch = ring_batch(6, 9);
  batch.meta["source"] = "ring";
  write_trajectories(path, batch);
  const std::string first = slurp(path);

  const auto loaded = load_trajectories(path);
  CHECK(loaded.dt == batch.dt);
  CHECK(loaded.n_traj() == batch.n_traj());
  for (size_t i = 0; i < batch.steps.size(); ++i)
    CHECK((loaded.steps[i] - batch.steps[i]).norm() == 0.0);

  write_trajectories(path, loaded);
  CHECK(slurp(path) == first);
  std::remove(path.c_str());
  std::remove(meta_path_for(path).c_str());
}

TEST_CASE("normalization constants survive the sidecar") {
  const std::string path = "test_sim_norm.csv";
  const auto norm = normalize(ring_batch(5, 2));
  write_trajectories(path, norm.batch);
  const auto loaded = load_trajectories(path);
  REQUIRE(loaded.normalization.has_value());
  CHECK((loaded.normalization->first - norm.mu).norm() == 0.0);
  CHECK((loaded.normalization->second - norm.sigma).norm() == 0.0);
  std::remove(path.c_str());
  std::remove(meta_path_for(path).c_str());
}

TEST_CASE("parser reports malformed cells") {
  const std::string path = "test_sim_bad.csv";
  std::ofstream f(path);
  f << "traj,t,x0\n0,0,1.0\n0,0.1,oops\n";
  f.close();
  try {
    (void)load_trajectories(path);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Err::ParseError);
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("divergent states raise NonFiniteState") {
  const FieldFn blowup = [](const Vec& x) { return (x.array().square() * 1e3).matrix().eval(); };
  Vec x0(1);
  x0 << 10.0;
  SimConfig cfg{0.1, 5.0, 1, 0, 1};
  try {
    (void)integrate_ode(blowup, x0, cfg);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Err::NonFiniteState);
  }
}
