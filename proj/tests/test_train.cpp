#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "daa/archetypes.hpp"
#include "daa/sim.hpp"
#include "daa/train.hpp"

#include <algorithm>
#include <cmath>

using namespace daa;

namespace {

FieldFn spec_field(const SystemSpec& spec) {
  return [spec](const Vec& x) { return eval_field(spec, x); };
}

TrajectoryBatch make_batch(const SystemSpec& spec, double dt, double t_max, int n_traj,
                           uint64_t seed, int substeps = 10) {
  SimConfig cfg{dt, t_max, n_traj, seed, substeps};
  return simulate_batch(spec_field(spec), 0.0, InitSampler::annulus(0.5, 1.5, seed), cfg);
}

DiffeoModel identity_model(int dim, int hidden = 8, int flow_steps = 10) {
  DiffeoModel m;
  m.field = MlpField::zero(dim, hidden);
  m.flow_steps = flow_steps;
  return m;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b));
}

}  // namespace

TEST_CASE("identity map on self-generated data sits at the loss floor") {
  const auto ring = make_ring_attractor(2);
  const auto norm = normalize(make_batch(ring, 0.2, 2.0, 10, 42)).batch;
  CHECK(trajectory_loss(identity_model(2), ring, norm) <= 1e-10);
}

TEST_CASE("mismatched angular velocity raises the loss") {
  const auto lc = make_limit_cycle(2);
  const auto norm = normalize(make_batch(lc, 0.2, 2.0, 8, 7)).batch;
  CHECK(trajectory_loss(identity_model(2), lc, norm) <= 1e-10);
  auto wrong = lc;
  wrong.params.v = -0.5;
  CHECK(trajectory_loss(identity_model(2), wrong, norm) > 1e-4);
}

TEST_CASE("a known deformation used as the model recovers the baseline loss") {
  const auto ring = make_ring_attractor(2);
  const auto base = make_batch(ring, 0.2, 2.0, 10, 21, 4);
  const auto base_norm = normalize(base).batch;
  const double baseline = trajectory_loss(identity_model(2, 8, 10), ring, base_norm);

  // small random deformation of the raw trajectories
  DiffeoModel psi;
  psi.flow_steps = 10;
  psi.field = MlpField::init_gaussian(2, 8, 0.02, 0.5, 77);
  psi.field.scale_output(0.01);
  auto deformed = base;
  for (auto& m : deformed.steps) m = psi.forward_batch(m);
  const auto deformed_norm_full = normalize(deformed);
  const Vec& mu = deformed_norm_full.mu;
  const Vec& sigma = deformed_norm_full.sigma;

  // the exact counterpart of the deformation in standardized coordinates is
  // the flow of the affinely conjugated field, still a rectifier MLP
  DiffeoModel conj;
  conj.flow_steps = psi.flow_steps;
  conj.field = MlpField::zero(2, 8);
  conj.field.w1 = psi.field.w1 * sigma.asDiagonal();
  conj.field.b1 = psi.field.b1 + psi.field.w1 * mu;
  conj.field.w2 = sigma.cwiseInverse().asDiagonal() * psi.field.w2;
  conj.field.b2 = psi.field.b2.cwiseQuotient(sigma);

  const double deformed_loss = trajectory_loss(conj, ring, deformed_norm_full.batch);
  CHECK(rel_err(deformed_loss, baseline) < 0.05);  // |a-b|/(a+b) form of the 10% check
}

TEST_CASE("loss gradient matches central finite differences") {
  const auto lc = make_limit_cycle(2);
  const auto norm = normalize(make_batch(lc, 0.2, 1.0, 4, 3, 5)).batch;

  DiffeoModel model;
  model.flow_steps = 4;
  model.field = MlpField::init_gaussian(2, 8, 0.0, 0.25, 5);
  const auto g = grad_loss(model, lc, norm, true);

  Rng rng(17);
  const Vec theta = model.field.flat_params();
  for (int k = 0; k < 10; ++k) {
    const int i = static_cast<int>(rng.next() % theta.size());
    Vec tp = theta, tm = theta;
    tp[i] += 1e-5;
    tm[i] -= 1e-5;
    DiffeoModel mp = model, mm = model;
    mp.field.set_flat_params(tp);
    mm.field.set_flat_params(tm);
    const double fd = (trajectory_loss(mp, lc, norm) - trajectory_loss(mm, lc, norm)) / 2e-5;
    CHECK(rel_err(fd, g.dtheta[i]) <= 1e-4);
  }

  REQUIRE(g.dv.has_value());
  auto lp = lc, lm = lc;
  lp.params.v += 1e-5;
  lm.params.v -= 1e-5;
  const double fd_v =
      (trajectory_loss(model, lp, norm) - trajectory_loss(model, lm, norm)) / 2e-5;
  CHECK(rel_err(fd_v, *g.dv) <= 1e-4);
}

TEST_CASE("gradient through an archetype without a closed-form flow") {
  const auto ms = make_multistable({-1.2, 0.3, 1.1}, 2);
  const auto norm = normalize(make_batch(ms, 0.2, 1.0, 4, 9, 5)).batch;
  DiffeoModel model;
  model.flow_steps = 4;
  model.field = MlpField::init_gaussian(2, 6, 0.0, 0.2, 15);
  const auto g = grad_loss(model, ms, norm, false);

  Rng rng(23);
  const Vec theta = model.field.flat_params();
  for (int k = 0; k < 6; ++k) {
    const int i = static_cast<int>(rng.next() % theta.size());
    Vec tp = theta, tm = theta;
    tp[i] += 1e-5;
    tm[i] -= 1e-5;
    DiffeoModel mp = model, mm = model;
    mp.field.set_flat_params(tp);
    mm.field.set_flat_params(tm);
    const double fd = (trajectory_loss(mp, ms, norm) - trajectory_loss(mm, ms, norm)) / 2e-5;
    CHECK(rel_err(fd, g.dtheta[i]) <= 1e-4);
  }
}

TEST_CASE("gradient vanishes at the self-fit optimum") {
  const auto ring = make_ring_attractor(2);
  const auto norm = normalize(make_batch(ring, 0.2, 2.0, 6, 11)).batch;
  const auto g = grad_loss(identity_model(2), ring, norm, false);
  CHECK(g.dtheta.cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("velocity gradient points toward the generating value") {
  const auto lc = make_limit_cycle(2);  // data at v = -1
  const auto norm = normalize(make_batch(lc, 0.2, 2.0, 6, 13)).batch;
  for (double v0 : {-0.7, -1.3}) {
    auto probe = lc;
    probe.params.v = v0;
    const auto g = grad_loss(identity_model(2), probe, norm, true);
    REQUIRE(g.dv.has_value());
    CHECK(std::abs(*g.dv) > 1e-6);
    // descending the gradient moves v toward -1
    CHECK((v0 > -1.0 ? *g.dv > 0.0 : *g.dv < 0.0));
  }
}

TEST_CASE("rotation rate estimator recovers the angular velocity") {
  for (double v : {-1.0, 0.7}) {
    const auto lc = make_limit_cycle(2, -1.0, v);
    const auto batch = make_batch(lc, 0.1, 3.0, 10, 19);
    CHECK(estimate_rotation_rate(batch) == doctest::Approx(v).epsilon(0.05));
  }
  const auto ring_batch = make_batch(make_ring_attractor(2), 0.2, 2.0, 10, 19);
  CHECK(std::abs(estimate_rotation_rate(ring_batch)) < 0.05);
}

TEST_CASE("self-fit converges and stays simple") {
  const auto ring = make_ring_attractor(2);
  const auto batch = make_batch(ring, 0.2, 2.0, 20, 33, 5);
  FitConfig cfg;
  cfg.epochs = 60;
  cfg.hidden = 32;
  cfg.batch_size = 16;
  cfg.seed = 3;
  const auto res = fit(ring, batch, cfg);
  CHECK(res.test_mse <= 1e-2);
  CHECK(res.complexity <= 0.3);
  CHECK(res.loss_curve.size() == 60);

  // median of the last ten epochs does not exceed the first ten
  auto median10 = [&](int from) {
    std::vector<double> w(res.loss_curve.begin() + from, res.loss_curve.begin() + from + 10);
    std::sort(w.begin(), w.end());
    return 0.5 * (w[4] + w[5]);
  };
  CHECK(median10(50) <= median10(0));
}

TEST_CASE("zero epochs reports the initial model") {
  const auto ring = make_ring_attractor(2);
  const auto batch = make_batch(ring, 0.2, 2.0, 10, 5);
  FitConfig cfg;
  cfg.epochs = 0;
  cfg.batch_size = 8;
  cfg.seed = 1;
  const auto res = fit(ring, batch, cfg);
  CHECK(res.loss_curve.empty());

  // metrics equal a fresh evaluation of the untouched initial model
  const auto norm = normalize(batch);
  auto [train, test] = split(norm.batch, 0.8, stream_seed(1, 0x51));
  DiffeoModel init;
  init.flow_steps = cfg.flow_steps;
  init.field = MlpField::init(2, cfg.hidden, stream_seed(1, 0x11));
  CHECK(res.test_mse == trajectory_loss(init, ring, test));
}

TEST_CASE("fits are bit-reproducible") {
  const auto lc = make_limit_cycle(2);
  const auto batch = make_batch(lc, 0.2, 1.0, 8, 77);
  FitConfig cfg;
  cfg.epochs = 8;
  cfg.hidden = 16;
  cfg.batch_size = 4;
  cfg.seed = 9;
  const auto a = fit(lc, batch, cfg);
  const auto b = fit(lc, batch, cfg);
  CHECK(a.test_mse == b.test_mse);
  CHECK(a.train_mse == b.train_mse);
  CHECK(a.complexity == b.complexity);
  CHECK((a.model.field.flat_params() - b.model.field.flat_params()).norm() == 0.0);
  CHECK(a.archetype.params.v == b.archetype.params.v);
}

TEST_CASE("divergence is surfaced as NonFiniteLoss with the epoch") {
  const auto ring = make_ring_attractor(2);
  auto batch = make_batch(ring, 0.2, 1.0, 4, 2);
  DiffeoModel wild;
  wild.flow_steps = 10;
  wild.field = MlpField::init_gaussian(2, 8, 0.0, 1e9, 1);
  try {
    (void)trajectory_loss(wild, ring, normalize(batch).batch);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Err::NonFiniteLoss);
  }
}

TEST_CASE("configuration guards") {
  const auto ring = make_ring_attractor(2);
  const auto batch = make_batch(ring, 0.2, 1.0, 4, 2);
  FitConfig cfg;
  cfg.batch_size = 64;  // exceeds the training trajectories
  CHECK_THROWS_AS((void)fit(ring, batch, cfg), Error);

  FitConfig bad;
  bad.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}
