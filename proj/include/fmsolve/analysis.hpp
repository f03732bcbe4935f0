#pragma once

#include "fmsolve/cfm.hpp"
#include "fmsolve/data.hpp"
#include "fmsolve/numeric.hpp"
#include "fmsolve/ode.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fmsolve::analysis {

/// Sliced W2: sqrt of the mean, over random unit directions, of the squared 1D
/// W2 distance between the projected samples. Directions are normalized
/// Gaussian vectors drawn from `rng`.
double swd(const PointBatch& a, const PointBatch& b, int n_projections, Rng& rng);

// -- convergence -------------------------------------------------------------

/// y' = lambda y on [0, t1]; y0 may have any dimension (decoupled copies).
struct DecayProblem {
  double lambda = -1.0;
  StateVector y0 = StateVector::Ones(1);
  double t1 = 1.0;
};

struct ConvergenceRow {
  ode::Method method = ode::Method::euler;
  double h = 0.0;  ///< step size; for dopri5, t1 / accepted steps
  double error = 0.0;  ///< max_j |y_N,j - y0_j exp(lambda t1)|
  std::uint64_t nfe = 0;
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  std::map<ode::Method, double> slopes;
};

/// Errors above this are used for slope fits; below it round-off dominates.
inline constexpr double kErrorFloor = 1e-12;

/// {2^-3, ..., 2^-10}.
std::vector<double> default_step_sizes();
/// Tolerances swept (atol = rtol) when dopri5 is part of a convergence study.
std::vector<double> default_dopri_tolerances();

/// Runs every fixed-step method over h_list and dopri5 (if requested) over
/// dopri_tolerances, and fits log-log slopes over the rows with error above
/// kErrorFloor. h_list needs at least 4 distinct values spanning 2 decades and
/// every t1 / h must be an integer.
ConvergenceResult convergence_study(const DecayProblem& problem,
                                    std::span<const ode::Method> methods,
                                    std::span<const double> h_list,
                                    std::span<const double> dopri_tolerances = {});

/// Least-squares slope of log(error) against log(h).
double fit_loglog_slope(std::span<const std::pair<double, double>> points);

// -- NFE vs quality ----------------------------------------------------------

struct ParetoRow {
  std::string method;
  int steps = 0;  ///< 0 for adaptive runs
  std::uint64_t nfe = 0;
  double swd = 0.0;
  std::string error;  ///< non-empty when the solver failed for this row

  [[nodiscard]] bool adaptive() const { return steps == 0; }
};

/// Euler 10..200, Midpoint 10..100, RK4 5..50 and dopri5 at atol = rtol = 1e-5.
std::vector<cfm::SolverSpec> default_pareto_grid();

/// One row per solver, sorted by NFE (stable). All rows share the same start
/// noise, the same reference draw of `dataset` and the same projection
/// directions, derived from forks 1, 0 and 2 of `rng`. A failing solver gives
/// a row with `error` set instead of aborting the grid.
std::vector<ParetoRow> pareto_benchmark(const cfm::FlowModel& model,
                                        const data::DatasetSpec& dataset,
                                        std::span<const cfm::SolverSpec> grid, int n_samples,
                                        int n_projections, const Rng& rng);

// -- Jacobian spectrum -------------------------------------------------------

/// Central differences of a 2D field, column j perturbed by 1e-4 (1 + |x_j|).
Matrix2 jacobian_fd(ode::VectorFieldHandle& field, const Eigen::Vector2d& x, double t);

/// Same rule applied to every row of an n x 2 batch at once; `field` must act
/// on the flat row-major batch with rows that do not interact. Four evaluations.
std::vector<Matrix2> jacobian_fd_batch(ode::VectorFieldHandle& field, const PointBatch& x,
                                       double t);

struct SpectrumRow {
  double t = 0.0;
  double eig1_re_mean = 0.0;
  double eig1_re_std = 0.0;
  double eig2_re_mean = 0.0;
  double eig2_re_std = 0.0;
  double eig1_im_mean = 0.0;
  double eig1_im_std = 0.0;
  double eig2_im_mean = 0.0;
  double eig2_im_std = 0.0;
  double cond_median = 0.0;  ///< +inf when most Jacobians are singular
};

/// 11 points 0.0, 0.1, ..., 1.0.
std::vector<double> default_time_grid();

/// Integrates n_samples trajectories from N(0, I) at t = 0 through the
/// ascending time grid and, at each grid time, computes the finite-difference
/// Jacobian of the field at every trajectory point, its eigenvalues and its
/// condition number. A fixed-step solver spends ceil(n_steps / segments)
/// steps on each segment between consecutive grid times. Works in the
/// model's own (standardized) coordinates.
std::vector<SpectrumRow> spectrum_along_trajectory(const nn::MlpParams& params, int n_samples,
                                                   std::span<const double> time_grid,
                                                   const cfm::SolverSpec& solver, Rng& rng);

// -- adaptive step allocation ------------------------------------------------

struct StepSummary {
  std::vector<double> bin_edges;  ///< bins + 1 edges over [t0, t1]
  std::vector<int> counts;        ///< accepted steps by start time
  std::vector<double> mean_h;     ///< NaN for empty bins
  std::vector<double> accepted_t;
  std::vector<double> accepted_h;
};

/// Buckets accepted steps by start time into uniform bins. Throws ConfigError
/// when the trace has no accepted step.
StepSummary dopri_step_summary(const ode::SolveTrace& trace, int bins = 10, double t0 = 0.0,
                               double t1 = 1.0);

/// Mean h over accepted steps whose start lies in [lo, hi); NaN if none.
double mean_accepted_step(const ode::SolveTrace& trace, double lo, double hi);

// -- Euler stability demo ----------------------------------------------------

struct StabilityDemoTrace {
  double h = 0.0;
  std::vector<double> y;  ///< y_0 = 1, y_1, ..., y_N
  bool diverged = false;  ///< some |y_n| > 1e3 |y_0|
};

inline constexpr double kDivergenceFactor = 1e3;

/// Euler on y' = lambda y, y(0) = 1, for each h: min(max_steps, ceil(t1 / h))
/// steps. Requires lambda < 0.
std::vector<StabilityDemoTrace> stability_demo(double lambda, std::span<const double> h_values,
                                               double t1, int max_steps);

}  // namespace fmsolve::analysis
