#include "fmsolve/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

namespace fmsolve::analysis {

double swd(const PointBatch& a, const PointBatch& b, int n_projections, Rng& rng) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() == 0) {
    throw ConfigError(fmt::format("swd: batches must have equal non-zero shape ({}x{} vs {}x{})",
                                  a.rows(), a.cols(), b.rows(), b.cols()));
  }
  if (n_projections < 1) {
    throw ConfigError("swd: need at least one projection");
  }
  const Eigen::Index d = a.cols();
  std::vector<double> pa(static_cast<std::size_t>(a.rows()));
  std::vector<double> pb(static_cast<std::size_t>(b.rows()));
  double acc = 0.0;
  for (int p = 0; p < n_projections; ++p) {
    Eigen::VectorXd dir(d);
    double norm = 0.0;
    do {
      for (Eigen::Index j = 0; j < d; ++j) {
        dir(j) = rng.gaussian();
      }
      norm = dir.norm();
    } while (norm == 0.0);
    dir /= norm;
    Eigen::Map<Eigen::VectorXd>(pa.data(), a.rows()) = a * dir;
    Eigen::Map<Eigen::VectorXd>(pb.data(), b.rows()) = b * dir;
    const double w = wasserstein2_1d(pa, pb);
    acc += w * w;
  }
  return std::sqrt(acc / n_projections);
}

std::vector<double> default_step_sizes() {
  std::vector<double> h;
  for (int k = 3; k <= 10; ++k) {
    h.push_back(std::ldexp(1.0, -k));
  }
  return h;
}

std::vector<double> default_dopri_tolerances() {
  return {1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10};
}

double fit_loglog_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) {
    throw ConfigError("slope fit needs at least two points");
  }
  double sx = 0.0;
  double sy = 0.0;
  for (const auto& [h, e] : points) {
    if (!(h > 0.0) || !(e > 0.0)) {
      throw ConfigError(fmt::format("slope fit needs positive values (got h={}, error={})", h, e));
    }
    sx += std::log(h);
    sy += std::log(e);
  }
  const auto n = static_cast<double>(points.size());
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& [h, e] : points) {
    const double dx = std::log(h) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(e) - my);
  }
  if (sxx == 0.0) {
    throw ConfigError("slope fit needs at least two distinct step sizes");
  }
  return sxy / sxx;
}

namespace {

double max_abs_error(const StateVector& y, const StateVector& exact) {
  return (y - exact).cwiseAbs().maxCoeff();
}

ode::VectorFieldHandle decay_field(double lambda) {
  return ode::VectorFieldHandle([lambda](double, const StateVector& y) -> StateVector {
    return lambda * y;
  });
}

}  // namespace

ConvergenceResult convergence_study(const DecayProblem& problem,
                                    std::span<const ode::Method> methods,
                                    std::span<const double> h_list,
                                    std::span<const double> dopri_tolerances) {
  if (!(problem.t1 > 0.0) || problem.y0.size() < 1) {
    throw ConfigError("convergence study needs t1 > 0 and a non-empty y0");
  }
  const std::set<double> distinct(h_list.begin(), h_list.end());
  if (distinct.size() < 4 || *distinct.begin() <= 0.0 ||
      *distinct.rbegin() / *distinct.begin() < 100.0) {
    throw ConfigError("convergence study needs >= 4 distinct positive step sizes spanning 2 decades");
  }
  const StateVector exact = problem.y0 * std::exp(problem.lambda * problem.t1);
  const std::vector<double> tolerances =
      dopri_tolerances.empty() ? default_dopri_tolerances()
                               : std::vector<double>(dopri_tolerances.begin(),
                                                     dopri_tolerances.end());

  ConvergenceResult result;
  for (ode::Method m : methods) {
    std::vector<std::pair<double, double>> fit_points;
    if (m == ode::Method::dopri5) {
      for (double tol : tolerances) {
        ode::StepControlConfig cfg;
        cfg.atol = tol;
        cfg.rtol = tol;
        ode::VectorFieldHandle f = decay_field(problem.lambda);
        const ode::SolveTrace tr = ode::integrate_dopri5(f, problem.y0, 0.0, problem.t1, cfg);
        const double h = problem.t1 / static_cast<double>(tr.accepted_count());
        const double err = max_abs_error(tr.y_final, exact);
        result.rows.push_back({m, h, err, tr.nfe_total});
        if (err > kErrorFloor) {
          fit_points.emplace_back(h, err);
        }
      }
    } else {
      for (double h : h_list) {
        const double steps = problem.t1 / h;
        const auto n = static_cast<int>(std::lround(steps));
        if (n < 1 || std::abs(steps - n) > 1e-9 * steps) {
          throw ConfigError(fmt::format("step size {} does not divide [0, {}]", h, problem.t1));
        }
        ode::VectorFieldHandle f = decay_field(problem.lambda);
        const ode::SolveTrace tr = ode::integrate_fixed(f, problem.y0, 0.0, problem.t1, n, m);
        const double err = max_abs_error(tr.y_final, exact);
        result.rows.push_back({m, h, err, tr.nfe_total});
        if (err > kErrorFloor) {
          fit_points.emplace_back(h, err);
        }
      }
    }
    result.slopes[m] = fit_points.size() >= 2 ? fit_loglog_slope(fit_points)
                                              : std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

std::vector<cfm::SolverSpec> default_pareto_grid() {
  using ode::Method;
  std::vector<cfm::SolverSpec> grid;
  for (int n : {10, 20, 50, 100, 200}) {
    grid.push_back(cfm::SolverSpec::fixed(Method::euler, n));
  }
  for (int n : {10, 20, 50, 100}) {
    grid.push_back(cfm::SolverSpec::fixed(Method::midpoint, n));
  }
  for (int n : {5, 10, 20, 50}) {
    grid.push_back(cfm::SolverSpec::fixed(Method::rk4, n));
  }
  grid.push_back(cfm::SolverSpec::adaptive(1e-5, 1e-5));
  return grid;
}

std::vector<ParetoRow> pareto_benchmark(const cfm::FlowModel& model,
                                        const data::DatasetSpec& dataset,
                                        std::span<const cfm::SolverSpec> grid, int n_samples,
                                        int n_projections, const Rng& rng) {
  if (n_samples < 1 || n_projections < 1) {
    throw ConfigError("pareto benchmark needs n_samples >= 1 and n_projections >= 1");
  }
  data::DatasetSpec ref_spec = dataset;
  ref_spec.n = n_samples;
  Rng ref_rng = rng.fork(0);
  const PointBatch reference = data::generate(ref_spec, ref_rng).points;

  std::vector<ParetoRow> rows;
  for (const cfm::SolverSpec& spec : grid) {
    ParetoRow row;
    row.method = std::string(ode::to_string(spec.method));
    row.steps = spec.is_adaptive() ? 0 : spec.n_steps;
    try {
      Rng start_rng = rng.fork(1);
      const cfm::SampleResult s = cfm::sample(model, spec, n_samples, start_rng);
      row.nfe = s.trace.nfe_total;
      Rng proj_rng = rng.fork(2);
      row.swd = swd(s.points, reference, n_projections, proj_rng);
    } catch (const NumericError& e) {
      row.swd = std::numeric_limits<double>::quiet_NaN();
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ParetoRow& a, const ParetoRow& b) { return a.nfe < b.nfe; });
  return rows;
}

namespace {

double fd_step(double x) { return 1e-4 * (1.0 + std::abs(x)); }

}  // namespace

Matrix2 jacobian_fd(ode::VectorFieldHandle& field, const Eigen::Vector2d& x, double t) {
  const std::vector<Matrix2> j = jacobian_fd_batch(field, PointBatch(x.transpose()), t);
  return j.front();
}

std::vector<Matrix2> jacobian_fd_batch(ode::VectorFieldHandle& field, const PointBatch& x,
                                       double t) {
  if (x.cols() != 2) {
    throw ConfigError(fmt::format("Jacobian spectra need a 2D field (got dimension {})", x.cols()));
  }
  const Eigen::Index n = x.rows();
  // columns[j] holds d v / d x_j for every row.
  std::array<PointBatch, 2> columns;
  for (int j = 0; j < 2; ++j) {
    PointBatch plus = x;
    PointBatch minus = x;
    Eigen::VectorXd eps(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      eps(i) = fd_step(x(i, j));
      plus(i, j) += eps(i);
      minus(i, j) -= eps(i);
    }
    const StateVector vp =
        field.eval(t, Eigen::Map<const StateVector>(plus.data(), plus.size()));
    const StateVector vm =
        field.eval(t, Eigen::Map<const StateVector>(minus.data(), minus.size()));
    if (!vp.allFinite() || !vm.allFinite()) {
      throw NumericError(fmt::format("non-finite field value while differencing at t={}", t));
    }
    columns[static_cast<std::size_t>(j)] = PointBatch(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      // The actual perturbation may differ from eps by rounding of x +- eps.
      const double span = plus(i, j) - minus(i, j);
      for (int k = 0; k < 2; ++k) {
        columns[static_cast<std::size_t>(j)](i, k) = (vp(2 * i + k) - vm(2 * i + k)) / span;
      }
    }
  }
  std::vector<Matrix2> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = Matrix2{columns[0](i, 0), columns[1](i, 0),
                                               columns[0](i, 1), columns[1](i, 1)};
  }
  return out;
}

std::vector<double> default_time_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) {
    g.push_back(i / 10.0);
  }
  return g;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) {
    mean += x;
  }
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) {
    var += (x - mean) * (x - mean);
  }
  return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

}  // namespace

std::vector<SpectrumRow> spectrum_along_trajectory(const nn::MlpParams& params, int n_samples,
                                                   std::span<const double> time_grid,
                                                   const cfm::SolverSpec& solver, Rng& rng) {
  if (params.config.data_dim != 2) {
    throw ConfigError(fmt::format("Jacobian spectra need a 2D model (got data_dim {})",
                                  params.config.data_dim));
  }
  if (n_samples < 1 || time_grid.empty()) {
    throw ConfigError("spectrum needs n_samples >= 1 and a non-empty time grid");
  }
  if (!std::is_sorted(time_grid.begin(), time_grid.end()) || time_grid.front() < 0.0) {
    throw ConfigError("spectrum time grid must be ascending and start at t >= 0");
  }
  solver.validate();

  const PointBatch start = gaussian_sample(rng, n_samples, 2);
  StateVector y = Eigen::Map<const StateVector>(start.data(), start.size());
  ode::VectorFieldHandle field = cfm::velocity_field(params, n_samples);

  const std::size_t segments = time_grid.size() > 1 ? time_grid.size() - 1 : 1;
  cfm::SolverSpec segment_solver = solver;
  if (!solver.is_adaptive()) {
    segment_solver.n_steps =
        static_cast<int>((static_cast<std::size_t>(solver.n_steps) + segments - 1) / segments);
  }

  std::vector<SpectrumRow> rows;
  double t = 0.0;
  for (double target : time_grid) {
    if (target > t) {
      y = cfm::solve(field, y, segment_solver, t, target).y_final;
      t = target;
    }
    const PointBatch x = Eigen::Map<const PointBatch>(y.data(), n_samples, 2);
    const std::vector<Matrix2> jacobians = jacobian_fd_batch(field, x, t);

    std::vector<double> e1r, e2r, e1i, e2i, cond;
    for (const Matrix2& jm : jacobians) {
      const auto ev = eig2x2(jm);
      e1r.push_back(ev[0].real());
      e2r.push_back(ev[1].real());
      e1i.push_back(ev[0].imag());
      e2i.push_back(ev[1].imag());
      cond.push_back(cond2x2(jm));
    }
    SpectrumRow row;
    row.t = t;
    std::tie(row.eig1_re_mean, row.eig1_re_std) = mean_std(e1r);
    std::tie(row.eig2_re_mean, row.eig2_re_std) = mean_std(e2r);
    std::tie(row.eig1_im_mean, row.eig1_im_std) = mean_std(e1i);
    std::tie(row.eig2_im_mean, row.eig2_im_std) = mean_std(e2i);
    row.cond_median = median(cond);
    rows.push_back(row);
  }
  return rows;
}

StepSummary dopri_step_summary(const ode::SolveTrace& trace, int bins, double t0, double t1) {
  if (bins < 1 || !(t1 > t0)) {
    throw ConfigError("step summary needs bins >= 1 and t1 > t0");
  }
  StepSummary s;
  for (const ode::StepRecord& r : trace.steps) {
    if (r.accepted) {
      s.accepted_t.push_back(r.t);
      s.accepted_h.push_back(r.h);
    }
  }
  if (s.accepted_t.empty()) {
    throw ConfigError("step summary of a trace without accepted steps");
  }
  const double width = (t1 - t0) / bins;
  for (int b = 0; b <= bins; ++b) {
    s.bin_edges.push_back(b == bins ? t1 : t0 + b * width);
  }
  s.counts.assign(static_cast<std::size_t>(bins), 0);
  std::vector<double> sums(static_cast<std::size_t>(bins), 0.0);
  for (std::size_t i = 0; i < s.accepted_t.size(); ++i) {
    const auto b = static_cast<std::size_t>(
        std::clamp(static_cast<int>(std::floor((s.accepted_t[i] - t0) / width)), 0, bins - 1));
    ++s.counts[b];
    sums[b] += s.accepted_h[i];
  }
  for (std::size_t b = 0; b < sums.size(); ++b) {
    s.mean_h.push_back(s.counts[b] > 0 ? sums[b] / s.counts[b]
                                       : std::numeric_limits<double>::quiet_NaN());
  }
  return s;
}

double mean_accepted_step(const ode::SolveTrace& trace, double lo, double hi) {
  double sum = 0.0;
  int count = 0;
  for (const ode::StepRecord& r : trace.steps) {
    if (r.accepted && r.t >= lo && r.t < hi) {
      sum += r.h;
      ++count;
    }
  }
  return count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

std::vector<StabilityDemoTrace> stability_demo(double lambda, std::span<const double> h_values,
                                               double t1, int max_steps) {
  if (!(lambda < 0.0)) {
    throw ConfigError(fmt::format("stability demo needs lambda < 0 (got {})", lambda));
  }
  if (!(t1 > 0.0) || max_steps < 1) {
    throw ConfigError("stability demo needs t1 > 0 and max_steps >= 1");
  }
  std::vector<StabilityDemoTrace> out;
  for (double h : h_values) {
    if (!(h > 0.0)) {
      throw ConfigError(fmt::format("stability demo step must be positive (got {})", h));
    }
    StabilityDemoTrace tr;
    tr.h = h;
    const auto steps =
        std::min<long>(max_steps, static_cast<long>(std::ceil(t1 / h - 1e-9)));
    ode::VectorFieldHandle f = decay_field(lambda);
    StateVector y = StateVector::Ones(1);
    tr.y.push_back(y(0));
    for (long n = 0; n < steps; ++n) {
      y = ode::step_euler(f, n * h, y, h);
      tr.y.push_back(y(0));
      if (std::abs(y(0)) > kDivergenceFactor * std::abs(tr.y.front())) {
        tr.diverged = true;
      }
    }
    out.push_back(std::move(tr));
  }
  return out;
}

}  // namespace fmsolve::analysis
