#pragma once

// The empirical dissimilarity estimator. For trajectories x_0..x_n sampled
// at dt, the loss is the mean over trajectories and time indices of
//   || x_{i dt} - Phi( phi_g^{i dt}( Phi^{-1}(x_0) ) ) ||^2,
// with the inverse applied once per trajectory to x_0. The source flow
// phi_g runs in the coordinates of the batch: when the batch is
// standardized the archetype flow is conjugated by the same affine map, so
// an identity diffeomorphism is exact on self-generated data and the
// complexity measures deformation beyond the data's own rescaling.
// Gradients are exact reverse-mode derivatives of the discrete objective
// (backprop through the unrolled RK4 flows; closed-form flow Jacobians
// where the archetype has one).

#include "daa/archetypes.hpp"
#include "daa/common.hpp"
#include "daa/diffeo.hpp"
#include "daa/sim.hpp"

#include <optional>
#include <vector>

namespace daa {

struct FitConfig {
  double lr = 0.01;
  int epochs = 200;
  int batch_size = 32;
  uint64_t seed = 0;
  bool learn_beta = true;  // train the free family parameters (limit-cycle angular velocity)
  int hidden = 64;
  int flow_steps = 10;
  double split_ratio = 0.8;
  int source_substeps = 5;  // RK4 substeps per recorded interval when no closed form exists
  // Start the trainable angular velocity at the data's mean rotation rate.
  // The phase-matching objective is multimodal in v with basins ~2*pi/T
  // apart; a frequency estimate lands the optimizer in the right one.
  // Estimates below the threshold mean the data does not rotate, and the
  // canonical velocity is kept.
  bool init_v_from_data = true;
  double rotation_init_threshold = 0.15;  // rad per unit time

  void validate() const;
};

struct FitResult {
  DiffeoModel model;
  SystemSpec archetype;  // fitted family parameters live in archetype.params
  double train_mse = 0.0;
  double test_mse = 0.0;  // the reported dissimilarity
  double complexity = 0.0;
  std::vector<double> loss_curve;  // per-epoch train loss
  double wall_time_s = 0.0;
  Vec mu, sigma;  // standardization constants of the target batch

  nlohmann::json metrics_json() const;  // deterministic: excludes wall time
};

// One recorded-interval flow of the archetype, conjugated by the batch's
// standardization. Analytic solutions are used where they exist; otherwise
// fixed-step RK4 with the given substeps.
class SourceStepper {
 public:
  SourceStepper(SystemSpec spec, double dt, int substeps, Vec mu, Vec sigma);

  Mat step(const Mat& z) const;

  /// Reverse-mode step: zbar_out is the cotangent at step(z_in); returns the
  /// cotangent at z_in and adds d(loss)/dv into *dv when requested.
  Mat step_vjp(const Mat& z_in, const Mat& zbar_out, double* dv) const;

  const SystemSpec& spec() const { return spec_; }

 private:
  SystemSpec spec_;
  double dt_;
  int substeps_;
  Vec mu_, sigma_, inv_sigma_;
};

/// Eq. loss above; the batch provides the coordinates (standardized batches
/// carry their constants). Errors: NonFiniteLoss on divergence.
double trajectory_loss(const DiffeoModel& model, const SystemSpec& archetype,
                       const TrajectoryBatch& batch, int source_substeps = 5);

struct LossGrad {
  double loss = 0.0;
  Vec dtheta;              // layout matches MlpField::flat_params
  std::optional<double> dv;  // set when the angular velocity is trainable
};

LossGrad grad_loss(const DiffeoModel& model, const SystemSpec& archetype,
                   const TrajectoryBatch& batch, bool learn_beta, int source_substeps = 5);

/// Standardize, split 80/20, run minibatch Adam, report test MSE as the
/// dissimilarity and the Jacobian complexity over all trajectory points.
/// Errors: NonFiniteLoss (with the epoch index), DimensionMismatch.
FitResult fit(const SystemSpec& archetype, const TrajectoryBatch& target_raw,
              const FitConfig& cfg);

/// Mean signed angular velocity of planar data around its centroid (rad per
/// unit time); 0 for non-planar batches.
double estimate_rotation_rate(const TrajectoryBatch& batch);

// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  Vec m, v;
  long t = 0;

  explicit Adam(int n) : m(Vec::Zero(n)), v(Vec::Zero(n)) {}
  void step(Vec& params, const Vec& grad, double lr);
};

}  // namespace daa
