#include "daa/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace daa {

void FitConfig::validate() const {
  if (!(lr > 0.0)) fail(Err::InvalidSpec, "lr must be positive");
  if (epochs < 0) fail(Err::InvalidSpec, "epochs must be nonnegative");
  if (batch_size < 1) fail(Err::InvalidSpec, "batch_size must be positive");
  if (hidden < 1 || flow_steps < 1 || source_substeps < 1)
    fail(Err::InvalidSpec, "hidden, flow_steps and source_substeps must be positive");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) fail(Err::InvalidSpec, "split_ratio in (0,1)");
}

SourceStepper::SourceStepper(SystemSpec spec, double dt, int substeps, Vec mu, Vec sigma)
    : spec_(std::move(spec)),
      dt_(dt),
      substeps_(substeps),
      mu_(std::move(mu)),
      sigma_(std::move(sigma)) {
  spec_.validate();
  if (mu_.size() == 0) mu_ = Vec::Zero(spec_.dim);
  if (sigma_.size() == 0) sigma_ = Vec::Ones(spec_.dim);
  if (mu_.size() != spec_.dim || sigma_.size() != spec_.dim)
    fail(Err::DimensionMismatch, "normalization constants do not match the archetype dimension");
  inv_sigma_ = sigma_.cwiseInverse();
}

namespace {

Vec rk4_field_step(const SystemSpec& spec, const Vec& x, double h) {
  const Vec k1 = eval_field(spec, x);
  const Vec k2 = eval_field(spec, x + 0.5 * h * k1);
  const Vec k3 = eval_field(spec, x + 0.5 * h * k2);
  const Vec k4 = eval_field(spec, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// reverse sweep through one RK4 step, recomputing the stages from x
Vec rk4_field_step_vjp(const SystemSpec& spec, const Vec& x, double h, const Vec& obar) {
  const Vec k1 = eval_field(spec, x);
  const Vec x2 = x + 0.5 * h * k1;
  const Vec k2 = eval_field(spec, x2);
  const Vec x3 = x + 0.5 * h * k2;
  const Vec k3 = eval_field(spec, x3);
  const Vec x4 = x + h * k3;

  Vec xbar = obar;
  Vec k1bar = (h / 6.0) * obar;
  Vec k2bar = (h / 3.0) * obar;
  Vec k3bar = (h / 3.0) * obar;
  const Vec k4bar = (h / 6.0) * obar;

  const Vec x4bar = field_jacobian(spec, x4).transpose() * k4bar;
  xbar += x4bar;
  k3bar += h * x4bar;
  const Vec x3bar = field_jacobian(spec, x3).transpose() * k3bar;
  xbar += x3bar;
  k2bar += 0.5 * h * x3bar;
  const Vec x2bar = field_jacobian(spec, x2).transpose() * k2bar;
  xbar += x2bar;
  k1bar += 0.5 * h * x2bar;
  xbar += field_jacobian(spec, x).transpose() * k1bar;
  return xbar;
}

// Exact interval steps for the families whose flow integrates in closed
// form. The cubic and clipped fields are stiff far from their attractors,
// where fixed-step RK4 can blow up on states produced by a half-trained
// inverse map; the exact solutions are stable for any forward step.

// xdot = -(x^3 - x): x^2 follows a rate-2 logistic toward 1
void bistable_exact(double x0, double t, double& x, double& dxdx0) {
  const double e2 = std::exp(-2.0 * t);
  const double u0 = x0 * x0;
  const double den = u0 + (1.0 - u0) * e2;
  x = (x0 >= 0.0 ? 1.0 : -1.0) * std::sqrt(u0 / den);
  dxdx0 = e2 / (den * std::sqrt(den));
}

bool has_exact_step(const SystemSpec& spec) {
  switch (spec.kind) {
    case Kind::Bistable:
    case Kind::BoundedContinuousAttractor:
    case Kind::SphereAttractor:
      return true;
    case Kind::Composite:
      for (const auto& sub : spec.params.sub_specs)
        if (!has_analytic_flow(sub) && !has_exact_step(sub)) return false;
      return true;
    default:
      return has_analytic_flow(spec);
  }
}

// flow of one recorded interval in the archetype's own coordinates; fills
// the Jacobian diagonal/block when jac is given
Vec flow_interval(const SystemSpec& spec, const Vec& x, double t, int substeps, Mat* jac,
                  Vec* dv);

Vec flow_interval_exact(const SystemSpec& spec, const Vec& x, double t, int substeps, Mat* jac,
                        Vec* dv) {
  const auto& p = spec.params;
  Vec out(spec.dim);
  if (jac) *jac = Mat::Zero(spec.dim, spec.dim);
  switch (spec.kind) {
    case Kind::Bistable: {
      double y, dy;
      bistable_exact(x[0], t, y, dy);
      out[0] = y;
      if (jac) (*jac)(0, 0) = dy;
      const double er = std::exp(p.alpha * t);
      for (int i = 1; i < spec.dim; ++i) {
        out[i] = er * x[i];
        if (jac) (*jac)(i, i) = er;
      }
      return out;
    }
    case Kind::BoundedContinuousAttractor: {
      const double e = std::exp(p.alpha * t);
      for (int i = 0; i < p.d_bca; ++i) {
        const double c = std::clamp(x[i], -p.B, p.B);
        out[i] = c + (x[i] - c) * e;
        if (jac) (*jac)(i, i) = (std::abs(x[i]) > p.B) ? e : 1.0;
      }
      for (int i = p.d_bca; i < spec.dim; ++i) {
        out[i] = e * x[i];
        if (jac) (*jac)(i, i) = e;
      }
      return out;
    }
    case Kind::SphereAttractor: {
      const int m = p.d_bca + 1;
      const double e = std::exp(p.alpha * t);
      const double r0 = x.head(m).norm();
      if (r0 < 1e-12) {
        out.head(m).setZero();
        if (jac) jac->topLeftCorner(m, m) = e * Mat::Identity(m, m);
      } else {
        const double r = p.R + (r0 - p.R) * e;
        const Vec u = x.head(m) / r0;
        out.head(m) = r * u;
        if (jac)
          jac->topLeftCorner(m, m) =
              (r / r0) * (Mat::Identity(m, m) - u * u.transpose()) + e * u * u.transpose();
      }
      const double eb = std::exp(p.beta_res * t);
      for (int i = m; i < spec.dim; ++i) {
        out[i] = eb * x[i];
        if (jac) (*jac)(i, i) = eb;
      }
      return out;
    }
    case Kind::Composite: {
      int off = 0;
      for (const auto& sub : p.sub_specs) {
        Mat sub_jac;
        Vec sub_dv;
        out.segment(off, sub.dim) =
            flow_interval(sub, x.segment(off, sub.dim), t, substeps, jac ? &sub_jac : nullptr,
                          dv ? &sub_dv : nullptr);
        if (jac) jac->block(off, off, sub.dim, sub.dim) = sub_jac;
        if (dv) dv->segment(off, sub.dim) = sub_dv;
        off += sub.dim;
      }
      return out;
    }
    default:
      fail(Err::NoClosedForm, "no exact interval step for " + kind_name(spec.kind));
  }
}

Vec flow_interval(const SystemSpec& spec, const Vec& x, double t, int substeps, Mat* jac,
                  Vec* dv) {
  if (dv) *dv = Vec::Zero(spec.dim);
  if (has_analytic_flow(spec)) {
    if (jac) *jac = analytic_flow_jacobian(spec, x, t);
    if (dv && spec.kind == Kind::LimitCycle) *dv = analytic_flow_dv(spec, x, t);
    return analytic_flow(spec, x, t);
  }
  if (has_exact_step(spec)) return flow_interval_exact(spec, x, t, substeps, jac, dv);

  // general fallback: fixed-step RK4 over the interval
  const double h = t / substeps;
  if (!jac) {
    Vec y = x;
    for (int s = 0; s < substeps; ++s) y = rk4_field_step(spec, y, h);
    return y;
  }
  // VJP callers need the full interval Jacobian; build it by the reverse
  // sweep applied to unit cotangents
  std::vector<Vec> states(substeps);
  Vec y = x;
  for (int s = 0; s < substeps; ++s) {
    states[s] = y;
    y = rk4_field_step(spec, y, h);
  }
  jac->resize(spec.dim, spec.dim);
  for (int k = 0; k < spec.dim; ++k) {
    Vec bar = Vec::Zero(spec.dim);
    bar[k] = 1.0;
    for (int s = substeps - 1; s >= 0; --s) bar = rk4_field_step_vjp(spec, states[s], h, bar);
    jac->row(k) = bar.transpose();  // row k is the gradient of output k
  }
  return y;
}

}  // namespace

Mat SourceStepper::step(const Mat& z) const {
  Mat out(z.rows(), z.cols());
  for (int c = 0; c < z.cols(); ++c) {
    const Vec x = sigma_.cwiseProduct(z.col(c)) + mu_;
    const Vec y = flow_interval(spec_, x, dt_, substeps_, nullptr, nullptr);
    out.col(c) = inv_sigma_.cwiseProduct(y - mu_);
  }
  if (!out.allFinite()) fail(Err::NonFiniteState, "source flow diverged");
  return out;
}

Mat SourceStepper::step_vjp(const Mat& z_in, const Mat& zbar_out, double* dv) const {
  Mat zbar(z_in.rows(), z_in.cols());
  const bool want_dv = dv && spec_.kind == Kind::LimitCycle;
  for (int c = 0; c < z_in.cols(); ++c) {
    const Vec x0 = sigma_.cwiseProduct(z_in.col(c)) + mu_;
    const Vec ybar = inv_sigma_.cwiseProduct(zbar_out.col(c));
    Mat jac;
    Vec dflow_dv;
    flow_interval(spec_, x0, dt_, substeps_, &jac, want_dv ? &dflow_dv : nullptr);
    if (want_dv) *dv += dflow_dv.dot(ybar);
    zbar.col(c) = sigma_.cwiseProduct((jac.transpose() * ybar).eval());
  }
  return zbar;
}

namespace {

struct EvalOut {
  double loss = 0.0;
  MlpGrad grad;
  double dv = 0.0;

  explicit EvalOut(const MlpField& f) : grad(f) {}
};

EvalOut eval_loss(const DiffeoModel& model, const SourceStepper& stepper,
                  const TrajectoryBatch& batch, bool want_grad, bool want_dv) {
  const int n = batch.n_intervals();
  const int B = batch.n_traj();
  if (n < 1) fail(Err::InvalidSpec, "trajectory loss needs at least one interval");
  EvalOut out(model.field);

  try {
    FlowTape inv_tape;
    std::vector<Mat> z(n + 1);
    z[0] = flow_field(model.field, batch.steps[0], -1.0, model.flow_steps,
                      want_grad ? &inv_tape : nullptr);

    std::vector<FlowTape> fwd_tapes(want_grad ? n : 0);
    std::vector<Mat> y(n + 1);
    double sse = 0.0;
    for (int i = 1; i <= n; ++i) {
      z[i] = stepper.step(z[i - 1]);
      y[i] = flow_field(model.field, z[i], 1.0, model.flow_steps,
                        want_grad ? &fwd_tapes[i - 1] : nullptr);
      sse += (y[i] - batch.steps[i]).squaredNorm();
    }
    out.loss = sse / (double(n) * double(B));
    if (!std::isfinite(out.loss)) fail(Err::NonFiniteLoss, "trajectory loss is not finite");

    if (want_grad) {
      const double w = 2.0 / (double(n) * double(B));
      Mat c = Mat::Zero(batch.dim(), B);
      for (int i = n; i >= 1; --i) {
        const Mat ybar = w * (y[i] - batch.steps[i]);
        c += flow_vjp(model.field, fwd_tapes[i - 1], 1.0, model.flow_steps, ybar, out.grad);
        c = stepper.step_vjp(z[i - 1], c, want_dv ? &out.dv : nullptr);
      }
      // x_0 is data; its cotangent is discarded
      flow_vjp(model.field, inv_tape, -1.0, model.flow_steps, c, out.grad);
    }
  } catch (const Error& e) {
    if (e.code() == Err::NonFiniteState)
      fail(Err::NonFiniteLoss, std::string("trajectory loss diverged: ") + e.what());
    throw;
  }
  return out;
}

SourceStepper make_stepper(const SystemSpec& archetype, const TrajectoryBatch& batch,
                           int source_substeps) {
  if (archetype.dim != batch.dim())
    fail(Err::DimensionMismatch, "archetype dimension does not match the data");
  Vec mu, sigma;
  if (batch.normalization) {
    mu = batch.normalization->first;
    sigma = batch.normalization->second;
  }
  return SourceStepper(archetype, batch.dt, source_substeps, mu, sigma);
}

}  // namespace

double trajectory_loss(const DiffeoModel& model, const SystemSpec& archetype,
                       const TrajectoryBatch& batch, int source_substeps) {
  const auto stepper = make_stepper(archetype, batch, source_substeps);
  return eval_loss(model, stepper, batch, false, false).loss;
}

LossGrad grad_loss(const DiffeoModel& model, const SystemSpec& archetype,
                   const TrajectoryBatch& batch, bool learn_beta, int source_substeps) {
  const auto stepper = make_stepper(archetype, batch, source_substeps);
  const bool want_dv = learn_beta && archetype.kind == Kind::LimitCycle;
  auto out = eval_loss(model, stepper, batch, true, want_dv);
  LossGrad g;
  g.loss = out.loss;
  g.dtheta = out.grad.flat();
  if (want_dv) g.dv = out.dv;
  return g;
}

void Adam::step(Vec& params, const Vec& grad, double lr) {
  ++t;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1, double(t));
  const double bc2 = 1.0 - std::pow(beta2, double(t));
  params -= (lr / bc1) * m.cwiseQuotient(((v / bc2).cwiseSqrt().array() + eps).matrix());
}

nlohmann::json FitResult::metrics_json() const {
  nlohmann::json j;
  j["archetype"] = to_json(archetype);
  j["train_mse"] = train_mse;
  j["test_mse"] = test_mse;
  j["complexity"] = complexity;
  j["epochs"] = loss_curve.size();
  j["normalization"] = {{"mu", std::vector<double>(mu.begin(), mu.end())},
                        {"sigma", std::vector<double>(sigma.begin(), sigma.end())}};
  return j;
}

double estimate_rotation_rate(const TrajectoryBatch& batch) {
  if (batch.dim() != 2 || batch.n_intervals() < 1 || !(batch.dt > 0.0)) return 0.0;
  Vec mu = Vec::Zero(2);
  for (const Mat& m : batch.steps) mu += m.rowwise().mean();
  mu /= double(batch.steps.size());

  double sum = 0.0;
  long count = 0;
  for (int tr = 0; tr < batch.n_traj(); ++tr) {
    for (size_t i = 0; i + 1 < batch.steps.size(); ++i) {
      const Vec a = batch.steps[i].col(tr) - mu;
      const Vec b = batch.steps[i + 1].col(tr) - mu;
      if (a.norm() < 1e-9 || b.norm() < 1e-9) continue;
      sum += std::atan2(a[0] * b[1] - a[1] * b[0], a.dot(b));
      ++count;
    }
  }
  return count > 0 ? sum / (double(count) * batch.dt) : 0.0;
}

FitResult fit(const SystemSpec& archetype, const TrajectoryBatch& target_raw,
              const FitConfig& cfg) {
  cfg.validate();
  archetype.validate();
  if (target_raw.n_traj() < 2) fail(Err::InvalidSpec, "fit needs at least two trajectories");
  if (archetype.dim != target_raw.dim())
    fail(Err::DimensionMismatch, "archetype dimension does not match the data");

  const auto t0 = std::chrono::steady_clock::now();

  auto norm = normalize(target_raw);
  auto [train_set, test_set] = split(norm.batch, cfg.split_ratio, stream_seed(cfg.seed, 0x51));
  const int n_train = train_set.n_traj();
  if (cfg.batch_size > n_train)
    fail(Err::InvalidSpec, "batch_size exceeds the number of training trajectories");

  FitResult res;
  res.archetype = archetype;
  res.mu = norm.mu;
  res.sigma = norm.sigma;
  res.model.flow_steps = cfg.flow_steps;
  res.model.field = MlpField::init(target_raw.dim(), cfg.hidden, stream_seed(cfg.seed, 0x11));

  // The angular velocity trains only when the data actually rotates; fitting
  // a frequency to non-rotating data drives v to zero and collapses the
  // limit cycle onto the ring family, which voids the comparison.
  bool train_v = cfg.learn_beta && archetype.kind == Kind::LimitCycle;
  if (train_v && cfg.init_v_from_data) {
    const double vhat = estimate_rotation_rate(norm.batch);
    if (std::abs(vhat) >= cfg.rotation_init_threshold)
      res.archetype.params.v = vhat;
    else
      train_v = false;
  }
  const int n_theta = res.model.field.n_params();
  Vec params(n_theta + (train_v ? 1 : 0));
  params.head(n_theta) = res.model.field.flat_params();
  if (train_v) params[n_theta] = res.archetype.params.v;

  Adam adam(static_cast<int>(params.size()));
  std::vector<int> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  res.loss_curve.reserve(cfg.epochs);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(stream_seed(cfg.seed, 0xE000 + static_cast<uint64_t>(epoch)));
    for (int i = n_train - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.next() % static_cast<uint64_t>(i + 1));
      std::swap(order[i], order[j]);
    }

    double epoch_sse_weight = 0.0;
    try {
      for (int start = 0; start < n_train; start += cfg.batch_size) {
        const int count = std::min(cfg.batch_size, n_train - start);
        const std::vector<int> idx(order.begin() + start, order.begin() + start + count);
        const TrajectoryBatch mini = train_set.select(idx);

        const auto g = grad_loss(res.model, res.archetype, mini, cfg.learn_beta,
                                 cfg.source_substeps);
        Vec grad(params.size());
        grad.head(n_theta) = g.dtheta;
        if (train_v) grad[n_theta] = g.dv.value_or(0.0);
        adam.step(params, grad, cfg.lr);
        res.model.field.set_flat_params(params.head(n_theta));
        if (train_v) res.archetype.params.v = params[n_theta];

        epoch_sse_weight += g.loss * count;
      }
    } catch (const Error& e) {
      if (e.code() == Err::NonFiniteLoss) {
        std::ostringstream os;
        os << e.what() << " (epoch " << epoch << ")";
        fail(Err::NonFiniteLoss, os.str());
      }
      throw;
    }
    res.loss_curve.push_back(epoch_sse_weight / n_train);
  }

  res.train_mse = trajectory_loss(res.model, res.archetype, train_set, cfg.source_substeps);
  res.test_mse = trajectory_loss(res.model, res.archetype, test_set, cfg.source_substeps);

  // Jacobian complexity over every trajectory point of the evaluation set
  const int n_pts = norm.batch.n_traj() * static_cast<int>(norm.batch.steps.size());
  Mat pts(norm.batch.dim(), n_pts);
  int k = 0;
  for (const Mat& m : norm.batch.steps) {
    pts.middleCols(k, m.cols()) = m;
    k += static_cast<int>(m.cols());
  }
  res.complexity = complexity(res.model, pts).mean;

  res.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace daa
