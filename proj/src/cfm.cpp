#include "fmsolve/cfm.hpp"

#include <cmath>
#include <numeric>
#include <utility>

#include <fmt/format.h>

namespace fmsolve::cfm {

void TrainConfig::validate() const {
  if (epochs < 1) {
    throw ConfigError(fmt::format("epochs must be >= 1 (got {})", epochs));
  }
  if (batch_size < 1) {
    throw ConfigError(fmt::format("batch_size must be >= 1 (got {})", batch_size));
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw ConfigError(fmt::format("learning rate must be positive (got {})", lr));
  }
  dataset.validate();
  mlp.validate();
  if (mlp.data_dim != dataset.data_dim()) {
    throw ConfigError(fmt::format("network data_dim {} does not match dataset dimension {}",
                                  mlp.data_dim, dataset.data_dim()));
  }
}

Standardizer Standardizer::fit(const PointBatch& points) {
  if (points.rows() < 1) {
    throw ConfigError("cannot standardize an empty dataset");
  }
  Standardizer s;
  s.mean = points.colwise().mean();
  const PointBatch centered = points.rowwise() - s.mean;
  s.scale = (centered.array().square().colwise().sum() / static_cast<double>(points.rows()))
                .sqrt()
                .matrix();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
    if (!(s.scale(j) > 0.0)) {
      s.scale(j) = 1.0;
    }
  }
  return s;
}

Standardizer Standardizer::identity(Eigen::Index dim) {
  return Standardizer{Eigen::RowVectorXd::Zero(dim), Eigen::RowVectorXd::Ones(dim)};
}

PointBatch Standardizer::apply(const PointBatch& points) const {
  return ((points.rowwise() - mean).array().rowwise() / scale.array()).matrix();
}

PointBatch Standardizer::invert(const PointBatch& points) const {
  PointBatch out = (points.array().rowwise() * scale.array()).matrix();
  out.rowwise() += mean;
  return out;
}

CfmBatch make_batch(const PointBatch& x1, Rng& rng) {
  if (x1.rows() < 1) {
    throw ConfigError("make_batch needs at least one data row");
  }
  CfmBatch b;
  b.x1 = x1;
  b.x0 = gaussian_sample(rng, x1.rows(), x1.cols());
  b.t.resize(x1.rows());
  for (Eigen::Index i = 0; i < x1.rows(); ++i) {
    b.t(i) = rng.uniform();
  }
  b.x_t.resize(x1.rows(), x1.cols());
  for (Eigen::Index i = 0; i < x1.rows(); ++i) {
    b.x_t.row(i) = (1.0 - b.t(i)) * b.x0.row(i) + b.t(i) * b.x1.row(i);
  }
  b.u_t = b.x1 - b.x0;
  return b;
}

CfmBatch make_batch(const PointBatch& dataset, Rng& rng, int batch_size) {
  if (batch_size < 1) {
    throw ConfigError(fmt::format("batch_size must be >= 1 (got {})", batch_size));
  }
  PointBatch x1(batch_size, dataset.cols());
  for (int i = 0; i < batch_size; ++i) {
    x1.row(i) = dataset.row(static_cast<Eigen::Index>(rng.below(
        static_cast<std::uint64_t>(dataset.rows()))));
  }
  return make_batch(x1, rng);
}

TrainResult train(const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const Rng root(config.seed);
  Rng data_rng = root.fork(0);
  Rng init_rng = root.fork(1);
  Rng batch_rng = root.fork(2);

  const data::Dataset raw = data::generate(config.dataset, data_rng);
  TrainResult result;
  result.model.norm = Standardizer::fit(raw.points);
  const PointBatch pool = result.model.norm.apply(raw.points);
  result.model.params = nn::init_params(config.mlp, init_rng);
  nn::AdamState adam = nn::AdamState::zeros_like(result.model.params);

  const auto n = static_cast<int>(pool.rows());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  result.loss_curve.reserve(static_cast<std::size_t>(config.epochs));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i) {
      const auto j = static_cast<int>(batch_rng.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    double loss_sum = 0.0;
    int step = 0;
    for (int start = 0; start < n; start += config.batch_size, ++step) {
      const int rows = std::min(config.batch_size, n - start);
      PointBatch x1(rows, pool.cols());
      for (int r = 0; r < rows; ++r) {
        x1.row(r) = pool.row(order[static_cast<std::size_t>(start + r)]);
      }
      const CfmBatch batch = make_batch(x1, batch_rng);
      nn::LossAndGrad lg =
          nn::loss_and_grad(result.model.params, batch.x_t, batch.t, batch.u_t);
      if (!std::isfinite(lg.loss)) {
        throw NumericError(
            fmt::format("training loss became non-finite at epoch {} step {}", epoch, step));
      }
      nn::adam_update(result.model.params, lg.grads, adam, config.lr);
      loss_sum += lg.loss * rows;
    }
    const double epoch_loss = loss_sum / n;
    result.loss_curve.push_back(epoch_loss);
    if (on_epoch) {
      on_epoch(epoch, epoch_loss);
    }
  }
  return result;
}

SolverSpec SolverSpec::fixed(ode::Method method, int n_steps) {
  SolverSpec s;
  s.method = method;
  s.n_steps = n_steps;
  s.validate();
  return s;
}

SolverSpec SolverSpec::adaptive(double atol, double rtol) {
  SolverSpec s;
  s.method = ode::Method::dopri5;
  s.n_steps = 0;
  s.control.atol = atol;
  s.control.rtol = rtol;
  s.validate();
  return s;
}

std::string SolverSpec::label() const {
  if (is_adaptive()) {
    return std::string(ode::to_string(method));
  }
  return fmt::format("{}-{}", ode::to_string(method), n_steps);
}

void SolverSpec::validate() const {
  if (is_adaptive()) {
    control.validate();
  } else if (n_steps < 1) {
    throw ConfigError(fmt::format("{} needs steps >= 1 (got {})", ode::to_string(method), n_steps));
  }
}

ode::SolveTrace solve(ode::VectorFieldHandle& field, const StateVector& y0, const SolverSpec& spec,
                      double t0, double t1) {
  spec.validate();
  if (spec.is_adaptive()) {
    return ode::integrate_dopri5(field, y0, t0, t1, spec.control);
  }
  return ode::integrate_fixed(field, y0, t0, t1, spec.n_steps, spec.method);
}

ode::VectorFieldHandle velocity_field(const nn::MlpParams& params, Eigen::Index rows) {
  const Eigen::Index dim = params.config.data_dim;
  return ode::VectorFieldHandle([&params, rows, dim](double t, const StateVector& y) {
    if (y.size() != rows * dim) {
      throw ConfigError(fmt::format("state has {} entries, expected {} x {}", y.size(), rows, dim));
    }
    const PointBatch x = Eigen::Map<const PointBatch>(y.data(), rows, dim);
    const PointBatch v = nn::forward(params, x, nn::Vector::Constant(rows, t));
    return StateVector(Eigen::Map<const StateVector>(v.data(), v.size()));
  });
}

SampleResult sample(const FlowModel& model, const SolverSpec& solver, int n, Rng& rng) {
  if (n < 1) {
    throw ConfigError(fmt::format("sample count must be >= 1 (got {})", n));
  }
  const Eigen::Index dim = model.params.config.data_dim;
  const PointBatch start = gaussian_sample(rng, n, dim);
  const StateVector y0 = Eigen::Map<const StateVector>(start.data(), start.size());
  ode::VectorFieldHandle field = velocity_field(model.params, n);
  SampleResult out;
  try {
    out.trace = solve(field, y0, solver);
  } catch (const ode::IntegrationError& e) {
    throw ode::IntegrationError(
        fmt::format("sampling {} points with {}: {}", n, solver.label(), e.what()), e.t(), e.h(),
        e.y(), e.step_index());
  }
  const PointBatch latent = Eigen::Map<const PointBatch>(out.trace.y_final.data(), n, dim);
  out.points = model.norm.invert(latent);
  return out;
}

}  // namespace fmsolve::cfm
