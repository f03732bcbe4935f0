#include "fmsolve/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace fmsolve::ode {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::euler:
      return "euler";
    case Method::midpoint:
      return "midpoint";
    case Method::rk4:
      return "rk4";
    case Method::dopri5:
      return "dopri5";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::euler, Method::midpoint, Method::rk4, Method::dopri5}) {
    if (name == to_string(m)) {
      return m;
    }
  }
  throw ConfigError(fmt::format("unknown solver '{}' (expected euler, midpoint, rk4 or dopri5)",
                                name));
}

int stages_per_step(Method m) {
  switch (m) {
    case Method::euler:
      return 1;
    case Method::midpoint:
      return 2;
    case Method::rk4:
      return 4;
    case Method::dopri5:
      return 6;
  }
  return 0;
}

int order(Method m) {
  switch (m) {
    case Method::euler:
      return 1;
    case Method::midpoint:
      return 2;
    case Method::rk4:
      return 4;
    case Method::dopri5:
      return 5;
  }
  return 0;
}

StateVector VectorFieldHandle::eval(double t, const StateVector& y) {
  ++nfe_;
  StateVector out = fn_(t, y);
  if (out.size() != y.size()) {
    throw ConfigError(fmt::format("vector field returned dimension {} for input dimension {}",
                                  out.size(), y.size()));
  }
  return out;
}

std::size_t SolveTrace::accepted_count() const {
  return static_cast<std::size_t>(
      std::count_if(steps.begin(), steps.end(), [](const StepRecord& r) { return r.accepted; }));
}

std::size_t SolveTrace::rejected_count() const { return steps.size() - accepted_count(); }

const ButcherTableau& dopri5_tableau() {
  static const ButcherTableau tableau = [] {
    ButcherTableau t;
    t.c = {0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0};
    t.a[1] = {1.0 / 5.0};
    t.a[2] = {3.0 / 40.0, 9.0 / 40.0};
    t.a[3] = {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0};
    t.a[4] = {19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0};
    t.a[5] = {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
              -5103.0 / 18656.0};
    t.a[6] = {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0};
    t.b = {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0};
    t.b_star = {5179.0 / 57600.0,    0.0,           7571.0 / 16695.0, 393.0 / 640.0,
                -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0};
    return t;
  }();
  return tableau;
}

void StepControlConfig::validate() const {
  if (!(atol > 0.0) || !(rtol > 0.0)) {
    throw ConfigError(fmt::format("tolerances must be positive (atol={}, rtol={})", atol, rtol));
  }
  if (!(alpha_min > 0.0 && alpha_min < 1.0 && alpha_max > 1.0)) {
    throw ConfigError(fmt::format("need 0 < alpha_min < 1 < alpha_max (got {}, {})", alpha_min,
                                  alpha_max));
  }
  if (!(safety > 0.0) || !(exponent > 0.0)) {
    throw ConfigError("safety and exponent must be positive");
  }
  if (h_init && !(*h_init > 0.0)) {
    throw ConfigError(fmt::format("h_init must be positive (got {})", *h_init));
  }
  if (max_steps == 0) {
    throw ConfigError("max_steps must be at least 1");
  }
}

namespace {

// Evaluates a stage and rejects non-finite output.
StateVector stage(VectorFieldHandle& f, double t, const StateVector& y, double h,
                  std::size_t step) {
  StateVector k = f.eval(t, y);
  if (!k.allFinite()) {
    throw IntegrationError(fmt::format("non-finite field value at t={}", t), t, h, y, step);
  }
  return k;
}

StateVector fixed_step(Method m, VectorFieldHandle& f, double t, const StateVector& y, double h,
                       std::size_t step) {
  switch (m) {
    case Method::euler: {
      return y + h * stage(f, t, y, h, step);
    }
    case Method::midpoint: {
      const StateVector k1 = stage(f, t, y, h, step);
      const StateVector k2 = stage(f, t + 0.5 * h, y + (0.5 * h) * k1, h, step);
      return y + h * k2;
    }
    case Method::rk4: {
      const StateVector k1 = stage(f, t, y, h, step);
      const StateVector k2 = stage(f, t + 0.5 * h, y + (0.5 * h) * k1, h, step);
      const StateVector k3 = stage(f, t + 0.5 * h, y + (0.5 * h) * k2, h, step);
      const StateVector k4 = stage(f, t + h, y + h * k3, h, step);
      return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    case Method::dopri5:
      break;
  }
  throw ConfigError("dopri5 is adaptive; use integrate_dopri5");
}

double scaled_rms(const StateVector& v, const StateVector& y, double atol, double rtol) {
  const auto scale = atol + y.array().abs() * rtol;
  return std::sqrt((v.array() / scale).square().mean());
}

}  // namespace

StateVector step_euler(VectorFieldHandle& f, double t, const StateVector& y, double h) {
  return fixed_step(Method::euler, f, t, y, h, 0);
}

StateVector step_midpoint(VectorFieldHandle& f, double t, const StateVector& y, double h) {
  return fixed_step(Method::midpoint, f, t, y, h, 0);
}

StateVector step_rk4(VectorFieldHandle& f, double t, const StateVector& y, double h) {
  return fixed_step(Method::rk4, f, t, y, h, 0);
}

SolveTrace integrate_fixed(VectorFieldHandle& f, const StateVector& y0, double t0, double t1,
                           int n_steps, Method method) {
  if (n_steps < 1) {
    throw ConfigError(fmt::format("n_steps must be >= 1 (got {})", n_steps));
  }
  if (!(t1 > t0)) {
    throw ConfigError(fmt::format("need t1 > t0 (got [{}, {}])", t0, t1));
  }
  if (method == Method::dopri5) {
    throw ConfigError("integrate_fixed: dopri5 is adaptive; use integrate_dopri5");
  }
  const double h = (t1 - t0) / n_steps;
  const std::uint64_t nfe_start = f.nfe();

  SolveTrace trace;
  trace.steps.reserve(static_cast<std::size_t>(n_steps));
  StateVector y = y0;
  for (int n = 0; n < n_steps; ++n) {
    const double t = t0 + n * h;
    y = fixed_step(method, f, t, y, h, static_cast<std::size_t>(n));
    if (!y.allFinite()) {
      throw IntegrationError(fmt::format("state became non-finite at step {}", n), t, h, y,
                             static_cast<std::size_t>(n));
    }
    trace.steps.push_back({t, h, std::nullopt, true, f.nfe() - nfe_start});
  }
  trace.nfe_total = f.nfe() - nfe_start;
  trace.y_final = std::move(y);
  return trace;
}

double error_norm(const StateVector& e, const StateVector& y_n, const StateVector& y_next,
                  double atol, double rtol) {
  if (e.size() != y_n.size() || e.size() != y_next.size() || e.size() == 0) {
    throw ConfigError("error_norm: dimension mismatch");
  }
  const auto scale = atol + y_n.array().abs().max(y_next.array().abs()) * rtol;
  return std::sqrt((e.array() / scale).square().mean());
}

double propose_step(double h, double err, const StepControlConfig& cfg) {
  if (err <= 0.0) {
    return h * cfg.alpha_max;
  }
  const double factor = cfg.safety * std::pow(err, -cfg.exponent);
  return h * std::min(cfg.alpha_max, std::max(cfg.alpha_min, factor));
}

double initial_step_guess(VectorFieldHandle& f, const StateVector& y0, double t0, double t1,
                          const StepControlConfig& cfg, const std::optional<StateVector>& f0) {
  const double span = t1 - t0;
  if (cfg.h_init) {
    return std::min(*cfg.h_init, span);
  }
  const StateVector slope0 = f0 ? *f0 : stage(f, t0, y0, 0.0, 0);
  const double d0 = scaled_rms(y0, y0, cfg.atol, cfg.rtol);
  const double d1 = scaled_rms(slope0, y0, cfg.atol, cfg.rtol);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);

  const StateVector y1 = y0 + h0 * slope0;
  const StateVector slope1 = stage(f, t0 + h0, y1, h0, 0);
  const double d2 = scaled_rms(slope1 - slope0, y0, cfg.atol, cfg.rtol) / h0;

  const double dmax = std::max(d1, d2);
  if (dmax <= 1e-15) {
    return span;
  }
  const double h1 = std::pow(0.01 / dmax, 1.0 / (order(Method::dopri5) + 1));
  return std::min({100.0 * h0, h1, span});
}

int dopri5_overhead_nfe(const StepControlConfig& cfg) { return cfg.h_init ? 1 : 2; }

SolveTrace integrate_dopri5(VectorFieldHandle& f, const StateVector& y0, double t0, double t1,
                            const StepControlConfig& cfg) {
  cfg.validate();
  if (!(t1 > t0)) {
    throw ConfigError(fmt::format("need t1 > t0 (got [{}, {}])", t0, t1));
  }
  const ButcherTableau& tab = dopri5_tableau();
  constexpr int S = ButcherTableau::stages;
  const std::uint64_t nfe_start = f.nfe();

  SolveTrace trace;
  double t = t0;
  StateVector y = y0;
  std::array<StateVector, S> k;
  k[0] = stage(f, t, y, 0.0, 0);
  double h = initial_step_guess(f, y0, t0, t1, cfg, k[0]);
  bool rejected_last = false;

  while (t < t1) {
    if (trace.steps.size() >= cfg.max_steps) {
      throw IntegrationError(
          fmt::format("dopri5 exceeded max_steps={} at t={} h={}", cfg.max_steps, t, h), t, h, y,
          trace.steps.size());
    }
    bool last = false;
    if (t + h >= t1) {
      h = t1 - t;
      last = true;
    }
    if (!(h > 0.0) || t + h == t) {
      throw IntegrationError(fmt::format("dopri5 step size underflow at t={} h={}", t, h), t, h,
                             y, trace.steps.size());
    }

    const std::size_t step = trace.steps.size();
    for (int i = 1; i < S; ++i) {
      StateVector yi = y;
      for (int j = 0; j < i; ++j) {
        if (tab.a[i][j] != 0.0) {
          yi += (h * tab.a[i][j]) * k[j];
        }
      }
      k[i] = stage(f, t + tab.c[i] * h, yi, h, step);
    }
    // Row 7 of A is b, so the propagated solution is the last stage's input.
    StateVector y5 = y;
    StateVector e = StateVector::Zero(y.size());
    for (int i = 0; i < S; ++i) {
      if (tab.b[i] != 0.0) {
        y5 += (h * tab.b[i]) * k[i];
      }
      const double db = tab.b[i] - tab.b_star[i];
      if (db != 0.0) {
        e += (h * db) * k[i];
      }
    }
    const double err = error_norm(e, y, y5, cfg.atol, cfg.rtol);
    if (!std::isfinite(err)) {
      throw IntegrationError(fmt::format("non-finite error estimate at t={}", t), t, h, y, step);
    }
    const bool accept = err <= 1.0;
    trace.steps.push_back({t, h, err, accept, f.nfe() - nfe_start});

    double h_next = propose_step(h, err, cfg);
    if (accept) {
      if (rejected_last) {
        h_next = std::min(h_next, h);
      }
      t = last ? t1 : t + h;
      y = std::move(y5);
      k[0] = k[S - 1];
      rejected_last = false;
    } else {
      rejected_last = true;
    }
    h = h_next;
  }
  trace.nfe_total = f.nfe() - nfe_start;
  trace.y_final = std::move(y);
  return trace;
}

}  // namespace fmsolve::ode
