#pragma once

#include "fmsolve/numeric.hpp"

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fmsolve::ode {

enum class Method { euler, midpoint, rk4, dopri5 };

std::string_view to_string(Method m);
/// Throws ConfigError for unknown names.
Method parse_method(std::string_view name);
/// Field evaluations per step for the fixed-step methods (1, 2, 4).
int stages_per_step(Method m);
/// Classical order of accuracy.
int order(Method m);

/// f(t, y) -> dy/dt with a monotone evaluation counter.
class VectorFieldHandle {
 public:
  using Function = std::function<StateVector(double, const StateVector&)>;

  explicit VectorFieldHandle(Function fn) : fn_(std::move(fn)) {}

  /// One field evaluation. Throws ConfigError if the output dimension differs
  /// from the input dimension.
  StateVector eval(double t, const StateVector& y);

  [[nodiscard]] std::uint64_t nfe() const { return nfe_; }

 private:
  Function fn_;
  std::uint64_t nfe_ = 0;
};

/// Thrown when a stage produces non-finite values or the adaptive driver gives up.
class IntegrationError : public NumericError {
 public:
  IntegrationError(const std::string& what, double t, double h, StateVector y, std::size_t step)
      : NumericError(what), t_(t), h_(h), y_(std::move(y)), step_(step) {}

  [[nodiscard]] double t() const { return t_; }
  [[nodiscard]] double h() const { return h_; }
  [[nodiscard]] const StateVector& y() const { return y_; }
  [[nodiscard]] std::size_t step_index() const { return step_; }

 private:
  double t_;
  double h_;
  StateVector y_;
  std::size_t step_;
};

struct StepRecord {
  double t = 0.0;  ///< start of the attempted step
  double h = 0.0;
  std::optional<double> err;  ///< scaled error norm, adaptive runs only
  bool accepted = true;
  std::uint64_t nfe_cum = 0;  ///< evaluations spent so far, including this attempt
};

struct SolveTrace {
  std::vector<StepRecord> steps;
  std::uint64_t nfe_total = 0;
  StateVector y_final;

  [[nodiscard]] std::size_t accepted_count() const;
  [[nodiscard]] std::size_t rejected_count() const;
};

/// Dormand-Prince 5(4) coefficients. Row i of `a` holds the stage-i weights.
struct ButcherTableau {
  static constexpr int stages = 7;
  std::array<double, stages> c{};
  std::array<std::array<double, stages>, stages> a{};
  std::array<double, stages> b{};       ///< fifth-order (propagated) weights
  std::array<double, stages> b_star{};  ///< embedded fourth-order weights
};

const ButcherTableau& dopri5_tableau();

/// Adaptive step control. `exponent` is the power applied to 1/err in the
/// step-size update; defaults follow h_new = h * clamp(0.9 * err^(-1/6)).
struct StepControlConfig {
  double atol = 1e-5;
  double rtol = 1e-5;
  double safety = 0.9;
  double alpha_min = 0.2;
  double alpha_max = 5.0;
  double exponent = 1.0 / 6.0;
  std::optional<double> h_init;
  std::size_t max_steps = 100000;

  /// Throws ConfigError unless atol, rtol > 0 and 0 < alpha_min < 1 < alpha_max.
  void validate() const;
};

StateVector step_euler(VectorFieldHandle& f, double t, const StateVector& y, double h);
StateVector step_midpoint(VectorFieldHandle& f, double t, const StateVector& y, double h);
StateVector step_rk4(VectorFieldHandle& f, double t, const StateVector& y, double h);

/// Uniform steps h = (t1 - t0) / n_steps with one of the fixed-step methods.
SolveTrace integrate_fixed(VectorFieldHandle& f, const StateVector& y0, double t0, double t1,
                           int n_steps, Method method);

/// RMS over components of e_j / (atol + max(|y_n,j|, |y_next,j|) * rtol).
double error_norm(const StateVector& e, const StateVector& y_n, const StateVector& y_next,
                  double atol, double rtol);

/// h * min(alpha_max, max(alpha_min, safety * err^-exponent)); err == 0 gives alpha_max.
double propose_step(double h, double err, const StepControlConfig& cfg);

/// Starting step for the adaptive driver.
///
/// Returns cfg.h_init when set. Otherwise, with scaled RMS norms
/// ||v|| = rms(v_j / (atol + |y0_j| * rtol)):
///
///   d0 = ||y0||, d1 = ||f(t0, y0)||
///   h0 = 0.01 * d0 / d1, or 1e-6 if d0 or d1 is below 1e-5
///   y1 = y0 + h0 * f(t0, y0),  d2 = ||f(t0 + h0, y1) - f(t0, y0)|| / h0
///   h1 = (0.01 / max(d1, d2))^(1/6)
///   h  = min(100 * h0, h1)
///
/// If max(d1, d2) <= 1e-15 the field carries no scale information and the
/// whole interval is returned. The result is always clipped to t1 - t0. Costs
/// two evaluations, or one when `f0` is supplied.
double initial_step_guess(VectorFieldHandle& f, const StateVector& y0, double t0, double t1,
                          const StepControlConfig& cfg,
                          const std::optional<StateVector>& f0 = std::nullopt);

/// Adaptive Dormand-Prince 5(4) with FSAL reuse.
///
/// Evaluation budget: 1 for the initial slope, 1 for the initial step guess
/// (0 when cfg.h_init is set), then 6 per attempted step, accepted or not.
/// The last step is shortened to land exactly on t1. Every attempt is
/// recorded in the trace.
SolveTrace integrate_dopri5(VectorFieldHandle& f, const StateVector& y0, double t0, double t1,
                            const StepControlConfig& cfg);

/// Evaluations spent by integrate_dopri5 outside the 6-per-attempt stages.
int dopri5_overhead_nfe(const StepControlConfig& cfg);

// -- stability ---------------------------------------------------------------

/// Coefficients r_k of R(z) = sum_k r_k z^k for the method. The Dormand-Prince
/// coefficients are r_0 = 1, r_k = b^T A^(k-1) 1, computed from the tableau.
std::vector<double> stability_coefficients(Method m);

/// R(z), the amplification factor on y' = lambda y with z = h lambda.
std::complex<double> stability_value(Method m, std::complex<double> z);

struct StabilityRaster {
  Method method = Method::euler;
  double re_min = 0.0;
  double re_max = 0.0;
  double im_min = 0.0;
  double im_max = 0.0;
  int n_re = 0;
  int n_im = 0;
  std::vector<double> abs_r;  ///< row-major, row index = imaginary index (ascending)
  std::vector<char> inside;   ///< |R(z)| <= 1

  [[nodiscard]] double re_at(int i) const;
  [[nodiscard]] double im_at(int j) const;
  [[nodiscard]] double re_spacing() const { return (re_max - re_min) / (n_re - 1); }
  [[nodiscard]] double im_spacing() const { return (im_max - im_min) / (n_im - 1); }
  [[nodiscard]] bool is_inside(int i, int j) const {
    return inside[static_cast<std::size_t>(j) * n_re + i] != 0;
  }
};

/// Samples |R(z)| on an n_re x n_im lattice including both range endpoints.
StabilityRaster stability_region_grid(Method m, double re_min, double re_max, double im_min,
                                      double im_max, int n_re, int n_im);

/// Most negative grid abscissa on the row nearest Im z = 0 that is connected
/// to the origin through inside cells.
double real_axis_extent(const StabilityRaster& raster);

}  // namespace fmsolve::ode
