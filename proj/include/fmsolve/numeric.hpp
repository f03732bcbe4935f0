#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace fmsolve {

/// Flat state of an ODE: y(t) of a single system or a row-major batch of points.
using StateVector = Eigen::VectorXd;

/// n x d batch of points, one point per row. Row-major so that the storage of
/// a batch is exactly the flat StateVector that the integrators advance.
using PointBatch = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised for malformed arguments (shape mismatches, invalid counts, bad configs).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces non-finite values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deterministic random stream keyed by (seed, stream).
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Its 64-bit seed is splitmix64(splitmix64(seed) ^ stream'), where
/// stream' = splitmix64(stream + 0x9E3779B97F4A7C15), so distinct stream
/// indices give unrelated sequences for the same seed. Uniform doubles take the
/// top 53 bits of one draw; Gaussian draws use the Marsaglia polar method
/// (pairs, the second value cached). None of the std::*_distribution adaptors
/// are used because their algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Independent child stream. Children of the same parent with different
  /// indices are distinct; the parent's own position is not consumed.
  [[nodiscard]] Rng fork(std::uint64_t index) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n). Rejection sampling, so unbiased.
  std::uint64_t below(std::uint64_t n);
  double gaussian();

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// n x d matrix of i.i.d. N(0, 1) draws, filled row by row.
PointBatch gaussian_sample(Rng& rng, Eigen::Index n, Eigen::Index d);

/// 2x2 real matrix, row-major: [[a, b], [c, d]].
struct Matrix2 {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;

  [[nodiscard]] double trace() const { return a + d; }
  [[nodiscard]] double det() const { return a * d - b * c; }
  [[nodiscard]] bool finite() const;
};

/// Roots of the characteristic polynomial, ordered by descending real part and
/// then by descending imaginary part.
std::array<std::complex<double>, 2> eig2x2(const Matrix2& m);

/// sigma_max / sigma_min; +infinity when m is singular.
double cond2x2(const Matrix2& m);

/// W2 distance between two equal-size empirical measures on the line.
double wasserstein2_1d(std::span<const double> a, std::span<const double> b);

/// Median of a copy of `values` (mean of the two middle elements for even sizes).
double median(std::span<const double> values);

bool all_finite(std::span<const double> values);

}  // namespace fmsolve
