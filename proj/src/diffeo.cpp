#include "daa/diffeo.hpp"

#include <cmath>

namespace daa {

MlpField MlpField::init(int dim, int hidden, uint64_t seed) {
  // Zero output layer: the flow starts exactly at the identity and training
  // grows the field only where the data demands it.
  MlpField f = zero(dim, hidden);
  Rng rng(seed);
  const double s1 = 1.0 / std::sqrt(double(dim));
  for (int i = 0; i < hidden; ++i)
    for (int j = 0; j < dim; ++j) f.w1(i, j) = s1 * rng.normal();
  return f;
}

MlpField MlpField::init_gaussian(int dim, int hidden, double mean, double stddev, uint64_t seed) {
  MlpField f = zero(dim, hidden);
  Rng rng(seed);
  for (int i = 0; i < hidden; ++i)
    for (int j = 0; j < dim; ++j) f.w1(i, j) = mean + stddev * rng.normal();
  for (int i = 0; i < hidden; ++i) f.b1[i] = mean + stddev * rng.normal();
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < hidden; ++j) f.w2(i, j) = mean + stddev * rng.normal();
  for (int i = 0; i < dim; ++i) f.b2[i] = mean + stddev * rng.normal();
  return f;
}

MlpField MlpField::zero(int dim, int hidden) {
  MlpField f;
  f.w1 = Mat::Zero(hidden, dim);
  f.b1 = Vec::Zero(hidden);
  f.w2 = Mat::Zero(dim, hidden);
  f.b2 = Vec::Zero(dim);
  return f;
}

Vec MlpField::eval(const Vec& x) const {
  return w2 * (w1 * x + b1).cwiseMax(0.0) + b2;
}

Mat MlpField::eval_batch(const Mat& x) const {
  return (w2 * ((w1 * x).colwise() + b1).cwiseMax(0.0)).colwise() + b2;
}

Mat MlpField::jacobian(const Vec& x) const {
  const Vec pre = w1 * x + b1;
  Mat j = Mat::Zero(dim(), dim());
  for (int i = 0; i < hidden(); ++i)
    if (pre[i] > 0.0) j += w2.col(i) * w1.row(i);
  return j;
}

void MlpField::scale_output(double s) {
  w2 *= s;
  b2 *= s;
}

Vec MlpField::flat_params() const {
  Vec p(n_params());
  int k = 0;
  for (int i = 0; i < w1.rows(); ++i)
    for (int j = 0; j < w1.cols(); ++j) p[k++] = w1(i, j);
  for (int i = 0; i < b1.size(); ++i) p[k++] = b1[i];
  for (int i = 0; i < w2.rows(); ++i)
    for (int j = 0; j < w2.cols(); ++j) p[k++] = w2(i, j);
  for (int i = 0; i < b2.size(); ++i) p[k++] = b2[i];
  return p;
}

void MlpField::set_flat_params(const Vec& p) {
  if (p.size() != n_params()) fail(Err::DimensionMismatch, "parameter vector size mismatch");
  int k = 0;
  for (int i = 0; i < w1.rows(); ++i)
    for (int j = 0; j < w1.cols(); ++j) w1(i, j) = p[k++];
  for (int i = 0; i < b1.size(); ++i) b1[i] = p[k++];
  for (int i = 0; i < w2.rows(); ++i)
    for (int j = 0; j < w2.cols(); ++j) w2(i, j) = p[k++];
  for (int i = 0; i < b2.size(); ++i) b2[i] = p[k++];
}

Vec MlpGrad::flat() const {
  Vec p(2 * w1.rows() * w1.cols() + b1.size() + b2.size());
  int k = 0;
  for (int i = 0; i < w1.rows(); ++i)
    for (int j = 0; j < w1.cols(); ++j) p[k++] = w1(i, j);
  for (int i = 0; i < b1.size(); ++i) p[k++] = b1[i];
  for (int i = 0; i < w2.rows(); ++i)
    for (int j = 0; j < w2.cols(); ++j) p[k++] = w2(i, j);
  for (int i = 0; i < b2.size(); ++i) p[k++] = b2[i];
  return p;
}

namespace {

// vbar is the cotangent of field(x); accumulates into g, returns xbar.
Mat mlp_vjp(const MlpField& f, const Mat& x, const Mat& vbar, MlpGrad& g) {
  const Mat pre = (f.w1 * x).colwise() + f.b1;
  const Mat act = pre.cwiseMax(0.0);
  const Mat abar = f.w2.transpose() * vbar;
  const Mat pbar = (pre.array() > 0.0).cast<double>() * abar.array();
  g.w2.noalias() += vbar * act.transpose();
  g.b2 += vbar.rowwise().sum();
  g.w1.noalias() += pbar * x.transpose();
  g.b1 += pbar.rowwise().sum();
  return f.w1.transpose() * pbar;
}

}  // namespace

Mat flow_field(const MlpField& field, Mat x, double sign, int steps, FlowTape* tape) {
  if (steps < 1) fail(Err::InvalidSpec, "flow needs at least one step");
  const double h = sign / steps;
  if (tape) {
    tape->pre_step.clear();
    tape->pre_step.reserve(steps);
  }
  for (int s = 0; s < steps; ++s) {
    if (tape) tape->pre_step.push_back(x);
    const Mat k1 = field.eval_batch(x);
    const Mat k2 = field.eval_batch(x + (h / 2.0) * k1);
    const Mat k3 = field.eval_batch(x + (h / 2.0) * k2);
    const Mat k4 = field.eval_batch(x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (!x.allFinite()) fail(Err::NonFiniteState, "flow diverged to a non-finite state");
  return x;
}

Mat flow_vjp(const MlpField& field, const FlowTape& tape, double sign, int steps, Mat ybar,
             MlpGrad& g) {
  const double h = sign / steps;
  for (int s = steps - 1; s >= 0; --s) {
    const Mat& x = tape.pre_step[s];
    // recompute the stage inputs; cheaper than taping all four stages
    const Mat k1 = field.eval_batch(x);
    const Mat x2 = x + (h / 2.0) * k1;
    const Mat k2 = field.eval_batch(x2);
    const Mat x3 = x + (h / 2.0) * k2;
    const Mat k3 = field.eval_batch(x3);
    const Mat x4 = x + h * k3;

    Mat k1bar = (h / 6.0) * ybar;
    Mat k2bar = (h / 3.0) * ybar;
    Mat k3bar = (h / 3.0) * ybar;
    const Mat k4bar = (h / 6.0) * ybar;

    const Mat x4bar = mlp_vjp(field, x4, k4bar, g);
    ybar += x4bar;
    k3bar += h * x4bar;
    const Mat x3bar = mlp_vjp(field, x3, k3bar, g);
    ybar += x3bar;
    k2bar += (h / 2.0) * x3bar;
    const Mat x2bar = mlp_vjp(field, x2, k2bar, g);
    ybar += x2bar;
    k1bar += (h / 2.0) * x2bar;
    ybar += mlp_vjp(field, x, k1bar, g);
  }
  return ybar;
}

Vec DiffeoModel::forward(const Vec& x) const { return flow_field(field, x, 1.0, flow_steps); }
Vec DiffeoModel::inverse(const Vec& y) const { return flow_field(field, y, -1.0, flow_steps); }
Mat DiffeoModel::forward_batch(const Mat& x) const { return flow_field(field, x, 1.0, flow_steps); }
Mat DiffeoModel::inverse_batch(const Mat& y) const { return flow_field(field, y, -1.0, flow_steps); }

Mat DiffeoModel::jacobian(const Vec& x0) const {
  const int d = dim();
  const double h = 1.0 / flow_steps;
  Vec x = x0;
  Mat J = Mat::Identity(d, d);
  for (int s = 0; s < flow_steps; ++s) {
    const Vec k1 = field.eval(x);
    const Mat a1 = field.jacobian(x) * J;
    const Vec x2 = x + (h / 2.0) * k1;
    const Vec k2 = field.eval(x2);
    const Mat a2 = field.jacobian(x2) * (J + (h / 2.0) * a1);
    const Vec x3 = x + (h / 2.0) * k2;
    const Vec k3 = field.eval(x3);
    const Mat a3 = field.jacobian(x3) * (J + (h / 2.0) * a2);
    const Vec x4 = x + h * k3;
    const Vec k4 = field.eval(x4);
    const Mat a4 = field.jacobian(x4) * (J + h * a3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    J += (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  }
  return J;
}

nlohmann::json DiffeoModel::to_json() const {
  nlohmann::json j;
  j["dim"] = dim();
  j["hidden"] = field.hidden();
  j["flow_steps"] = flow_steps;
  const Vec p = field.flat_params();
  j["weights"] = std::vector<double>(p.begin(), p.end());
  return j;
}

DiffeoModel DiffeoModel::from_json(const nlohmann::json& j) {
  DiffeoModel m;
  try {
    const int dim = j.at("dim").get<int>();
    const int hidden = j.at("hidden").get<int>();
    m.flow_steps = j.at("flow_steps").get<int>();
    m.field = MlpField::zero(dim, hidden);
    const auto w = j.at("weights").get<std::vector<double>>();
    m.field.set_flat_params(Eigen::Map<const Vec>(w.data(), w.size()));
  } catch (const nlohmann::json::exception& e) {
    fail(Err::ParseError, std::string("model checkpoint: ") + e.what());
  }
  return m;
}

ComplexityReport complexity(const DiffeoModel& model, const Mat& points) {
  if (points.cols() == 0) fail(Err::EmptyPointSet, "complexity needs at least one point");
  const Mat eye = Mat::Identity(model.dim(), model.dim());
  ComplexityReport rep;
  rep.per_point.reserve(points.cols());
  double sum = 0.0;
  for (int c = 0; c < points.cols(); ++c) {
    const double dev = (model.jacobian(points.col(c)) - eye).norm();
    rep.per_point.push_back(dev);
    sum += dev;
  }
  rep.mean = sum / double(points.cols());
  return rep;
}

}  // namespace daa
