#pragma once

#include "fmsolve/data.hpp"
#include "fmsolve/nn.hpp"
#include "fmsolve/ode.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace fmsolve::cfm {

struct TrainConfig {
  int epochs = 300;
  int batch_size = 256;
  double lr = 1e-3;
  data::DatasetSpec dataset;
  nn::MlpConfig mlp;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-axis affine map to zero mean and unit variance.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const PointBatch& points);
  static Standardizer identity(Eigen::Index dim);
  [[nodiscard]] PointBatch apply(const PointBatch& points) const;
  [[nodiscard]] PointBatch invert(const PointBatch& points) const;
};

/// A trained velocity network together with the data normalization it was
/// trained under.
struct FlowModel {
  nn::MlpParams params;
  Standardizer norm;
};

/// x_t = (1 - t) x0 + t x1 and u_t = x1 - x0, row by row.
struct CfmBatch {
  PointBatch x0;
  PointBatch x1;
  nn::Vector t;
  PointBatch x_t;
  PointBatch u_t;
};

/// Pairs the given data rows with fresh N(0, I) noise and U[0, 1] times.
CfmBatch make_batch(const PointBatch& x1, Rng& rng);
/// Draws batch_size rows of `dataset` uniformly with replacement, then as above.
CfmBatch make_batch(const PointBatch& dataset, Rng& rng, int batch_size);

struct TrainResult {
  FlowModel model;
  std::vector<double> loss_curve;  ///< mean batch loss per epoch
};

using EpochCallback = std::function<void(int epoch, double loss)>;

/// Generates config.dataset once, standardizes it, and runs epochs passes of
/// shuffled minibatches with Adam. Random streams are forks of Rng(config.seed):
/// 0 for the dataset, 1 for initialization, 2 for shuffling and batch noise.
TrainResult train(const TrainConfig& config, const EpochCallback& on_epoch = {});

/// A fixed-step method with a step count, or dopri5 with tolerances.
struct SolverSpec {
  ode::Method method = ode::Method::rk4;
  int n_steps = 20;
  ode::StepControlConfig control;

  static SolverSpec fixed(ode::Method method, int n_steps);
  static SolverSpec adaptive(double atol, double rtol);

  [[nodiscard]] bool is_adaptive() const { return method == ode::Method::dopri5; }
  /// "rk4-20", "dopri5" and so on.
  [[nodiscard]] std::string label() const;
  void validate() const;
};

/// Integrates y0 from t0 to t1 with the given solver.
ode::SolveTrace solve(ode::VectorFieldHandle& field, const StateVector& y0, const SolverSpec& spec,
                      double t0 = 0.0, double t1 = 1.0);

/// The network as a batched field over `rows` points: the flat state is the
/// row-major rows x data_dim batch and each evaluation is one network call.
/// `params` is captured by reference and must outlive the handle.
ode::VectorFieldHandle velocity_field(const nn::MlpParams& params, Eigen::Index rows);

struct SampleResult {
  PointBatch points;  ///< in data coordinates
  ode::SolveTrace trace;
};

/// Draws n standard-normal starts and integrates them from t = 0 to t = 1 as
/// one batch.
SampleResult sample(const FlowModel& model, const SolverSpec& solver, int n, Rng& rng);

}  // namespace fmsolve::cfm
