#include "fmsolve/ode.hpp"

#include <cmath>

#include <fmt/format.h>

namespace fmsolve::ode {

namespace {

// Taylor truncation of exp(z) through z^p.
std::vector<double> taylor_coefficients(int p) {
  std::vector<double> r(static_cast<std::size_t>(p) + 1);
  double fact = 1.0;
  for (int k = 0; k <= p; ++k) {
    if (k > 0) {
      fact *= k;
    }
    r[static_cast<std::size_t>(k)] = 1.0 / fact;
  }
  return r;
}

std::vector<double> dopri5_coefficients() {
  const ButcherTableau& tab = dopri5_tableau();
  constexpr int S = ButcherTableau::stages;
  // R(z) = 1 + z b^T (I - zA)^-1 1 = 1 + sum_k z^k b^T A^(k-1) 1; A is
  // strictly lower triangular so the series stops at k = S.
  std::vector<double> r{1.0};
  std::array<double, S> v;
  v.fill(1.0);
  for (int k = 1; k <= S; ++k) {
    double coeff = 0.0;
    for (int i = 0; i < S; ++i) {
      coeff += tab.b[i] * v[i];
    }
    r.push_back(coeff);
    std::array<double, S> next{};
    for (int i = 0; i < S; ++i) {
      for (int j = 0; j < i; ++j) {
        next[i] += tab.a[i][j] * v[j];
      }
    }
    v = next;
  }
  while (r.size() > 1 && r.back() == 0.0) {
    r.pop_back();
  }
  return r;
}

}  // namespace

std::vector<double> stability_coefficients(Method m) {
  if (m == Method::dopri5) {
    static const std::vector<double> coeffs = dopri5_coefficients();
    return coeffs;
  }
  return taylor_coefficients(order(m));
}

std::complex<double> stability_value(Method m, std::complex<double> z) {
  const std::vector<double> r = stability_coefficients(m);
  std::complex<double> acc = 0.0;
  for (auto it = r.rbegin(); it != r.rend(); ++it) {
    acc = acc * z + *it;
  }
  return acc;
}

double StabilityRaster::re_at(int i) const {
  return i == n_re - 1 ? re_max : re_min + i * re_spacing();
}

double StabilityRaster::im_at(int j) const {
  return j == n_im - 1 ? im_max : im_min + j * im_spacing();
}

StabilityRaster stability_region_grid(Method m, double re_min, double re_max, double im_min,
                                      double im_max, int n_re, int n_im) {
  if (n_re < 2 || n_im < 2) {
    throw ConfigError(fmt::format("stability grid needs >= 2 points per axis (got {}x{})", n_re,
                                  n_im));
  }
  if (!(re_max > re_min) || !(im_max > im_min)) {
    throw ConfigError("stability grid ranges must be increasing");
  }
  StabilityRaster out;
  out.method = m;
  out.re_min = re_min;
  out.re_max = re_max;
  out.im_min = im_min;
  out.im_max = im_max;
  out.n_re = n_re;
  out.n_im = n_im;
  const std::vector<double> coeffs = stability_coefficients(m);
  const auto total = static_cast<std::size_t>(n_re) * static_cast<std::size_t>(n_im);
  out.abs_r.resize(total);
  out.inside.resize(total);
  for (int j = 0; j < n_im; ++j) {
    for (int i = 0; i < n_re; ++i) {
      const std::complex<double> z(out.re_at(i), out.im_at(j));
      std::complex<double> acc = 0.0;
      for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
        acc = acc * z + *it;
      }
      const auto idx = static_cast<std::size_t>(j) * n_re + i;
      out.abs_r[idx] = std::abs(acc);
      out.inside[idx] = out.abs_r[idx] <= 1.0 ? 1 : 0;
    }
  }
  return out;
}

double real_axis_extent(const StabilityRaster& raster) {
  int row = 0;
  for (int j = 1; j < raster.n_im; ++j) {
    if (std::abs(raster.im_at(j)) < std::abs(raster.im_at(row))) {
      row = j;
    }
  }
  int col = 0;
  for (int i = 1; i < raster.n_re; ++i) {
    if (std::abs(raster.re_at(i)) < std::abs(raster.re_at(col))) {
      col = i;
    }
  }
  // Step back from the origin cell if it sits on the boundary to the right.
  while (col > 0 && !raster.is_inside(col, row)) {
    --col;
    if (raster.re_at(col) < -raster.re_spacing()) {
      return 0.0;
    }
  }
  while (col > 0 && raster.is_inside(col - 1, row)) {
    --col;
  }
  return raster.re_at(col);
}

}  // namespace fmsolve::ode
