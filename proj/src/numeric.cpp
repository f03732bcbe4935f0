#include "fmsolve/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <fmt/format.h>

namespace fmsolve {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

namespace {

std::uint64_t engine_key(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x9E3779B97F4A7C15ULL));
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(engine_key(seed, stream)) {}

Rng Rng::fork(std::uint64_t index) const {
  return Rng(engine_key(seed_, stream_), index);
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) {
    throw ConfigError("Rng::below requires n > 0");
  }
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) {
    x = engine_();
  }
  return x % n;
}

double Rng::gaussian() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * scale;
  return u * scale;
}

PointBatch gaussian_sample(Rng& rng, Eigen::Index n, Eigen::Index d) {
  if (n < 1 || d < 1) {
    throw ConfigError(fmt::format("gaussian_sample: need n >= 1 and d >= 1, got n={} d={}", n, d));
  }
  PointBatch out(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      out(i, j) = rng.gaussian();
    }
  }
  return out;
}

bool Matrix2::finite() const {
  return std::isfinite(a) && std::isfinite(b) && std::isfinite(c) && std::isfinite(d);
}

std::array<std::complex<double>, 2> eig2x2(const Matrix2& m) {
  const double half_tr = 0.5 * m.trace();
  const double det = m.det();
  // Discriminant of lambda^2 - tr*lambda + det, written to avoid cancellation
  // for nearly-diagonal matrices.
  const double half_diff = 0.5 * (m.a - m.d);
  const double disc = half_diff * half_diff + m.b * m.c;

  std::array<std::complex<double>, 2> ev;
  if (disc >= 0.0) {
    const double root = std::sqrt(disc);
    const double big = half_tr >= 0.0 ? half_tr + root : half_tr - root;
    const double small = big != 0.0 ? det / big : 0.0;
    ev = {std::complex<double>(big, 0.0), std::complex<double>(small, 0.0)};
  } else {
    const double root = std::sqrt(-disc);
    ev = {std::complex<double>(half_tr, root), std::complex<double>(half_tr, -root)};
  }
  if (ev[1].real() > ev[0].real() ||
      (ev[1].real() == ev[0].real() && ev[1].imag() > ev[0].imag())) {
    std::swap(ev[0], ev[1]);
  }
  return ev;
}

double cond2x2(const Matrix2& m) {
  // sigma_max^2 + sigma_min^2 = ||m||_F^2 and sigma_max * sigma_min = |det|.
  const double fro2 = m.a * m.a + m.b * m.b + m.c * m.c + m.d * m.d;
  const double abs_det = std::abs(m.det());
  if (abs_det == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  const double gap = std::sqrt(std::max(0.0, fro2 * fro2 - 4.0 * abs_det * abs_det));
  const double smax2 = 0.5 * (fro2 + gap);
  return smax2 / abs_det;
}

double wasserstein2_1d(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw ConfigError(fmt::format("wasserstein2_1d: need equal non-empty sizes, got {} and {}",
                                  a.size(), b.size()));
  }
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const double diff = sa[i] - sb[i];
    acc += diff * diff;
  }
  return std::sqrt(acc / static_cast<double>(sa.size()));
}

double median(std::span<const double> values) {
  if (values.empty()) {
    throw ConfigError("median of empty list");
  }
  std::vector<double> v(values.begin(), values.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) {
    return upper;
  }
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  if (std::isinf(upper) && std::isinf(lower) && upper == lower) {
    return upper;
  }
  return 0.5 * (lower + upper);
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace fmsolve
