#pragma once

// The learnable diffeomorphism: the time-1 flow of a one-hidden-layer
// ReLU MLP vector field, integrated with K fixed RK4 steps. The inverse
// integrates the negated field over the same step partition, so forward and
// inverse are discrete inverses up to integration error. Jacobians propagate
// tangents through the unrolled steps; the trainer reuses the taped
// reverse-mode sweep exposed here.

#include "daa/common.hpp"

#include <json.hpp>

#include <vector>

namespace daa {

struct MlpGrad;

struct MlpField {
  Mat w1;  // hidden x dim
  Vec b1;  // hidden
  Mat w2;  // dim x hidden
  Vec b2;  // dim

  int dim() const { return static_cast<int>(w2.rows()); }
  int hidden() const { return static_cast<int>(w1.rows()); }
  int n_params() const { return 2 * dim() * hidden() + hidden() + dim(); }

  /// Layer weights drawn N(0, (1/sqrt(fan_in))^2), biases zero.
  static MlpField init(int dim, int hidden, uint64_t seed);
  /// All weights and biases drawn N(mean, stddev^2).
  static MlpField init_gaussian(int dim, int hidden, double mean, double stddev, uint64_t seed);
  static MlpField zero(int dim, int hidden);

  Vec eval(const Vec& x) const;
  Mat eval_batch(const Mat& x) const;  // columnwise
  Mat jacobian(const Vec& x) const;    // W2 diag(relu') W1; subgradient 0 at kinks

  /// Scales the field output (w2, b2) by s; the time-1 flow interpolates
  /// from the identity (s=0) toward the unscaled flow.
  void scale_output(double s);

  // Flat layout (row-major): W1, b1, W2, b2. Documented for reload.
  Vec flat_params() const;
  void set_flat_params(const Vec& p);
};

struct MlpGrad {
  Mat w1, w2;
  Vec b1, b2;

  explicit MlpGrad(const MlpField& f)
      : w1(Mat::Zero(f.w1.rows(), f.w1.cols())),
        w2(Mat::Zero(f.w2.rows(), f.w2.cols())),
        b1(Vec::Zero(f.b1.size())),
        b2(Vec::Zero(f.b2.size())) {}
  Vec flat() const;
};

// States recorded on the way forward; one entry per RK4 step.
struct FlowTape {
  std::vector<Mat> pre_step;
};

/// K RK4 steps of dx/dt = sign * field(x) over t in [0,1]; columns are
/// independent points. Records entry states when a tape is given.
Mat flow_field(const MlpField& field, Mat x, double sign, int steps, FlowTape* tape = nullptr);

/// Reverse-mode sweep matching flow_field: consumes the output cotangent,
/// accumulates parameter gradients into g, returns the input cotangent.
Mat flow_vjp(const MlpField& field, const FlowTape& tape, double sign, int steps, Mat ybar,
             MlpGrad& g);

struct DiffeoModel {
  MlpField field;
  int flow_steps = 10;

  int dim() const { return field.dim(); }
  Vec forward(const Vec& x) const;
  Vec inverse(const Vec& y) const;
  Mat forward_batch(const Mat& x) const;
  Mat inverse_batch(const Mat& y) const;

  /// d(forward)/dx by tangent propagation through the unrolled steps.
  Mat jacobian(const Vec& x) const;

  nlohmann::json to_json() const;
  static DiffeoModel from_json(const nlohmann::json& j);
};

struct ComplexityReport {
  std::vector<double> per_point;  // ||J(x) - I||_F
  double mean = 0.0;
};

/// Mean Frobenius deviation of the Jacobian from the identity over the
/// evaluation points (columns). Errors: EmptyPointSet.
ComplexityReport complexity(const DiffeoModel& model, const Mat& points);

}  // namespace daa
