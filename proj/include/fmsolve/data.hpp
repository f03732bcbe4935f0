#pragma once

#include "fmsolve/numeric.hpp"

#include <string_view>
#include <vector>

namespace fmsolve::data {

enum class DatasetKind { moons, circles, gaussian_nd };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_kind(std::string_view name);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::moons;
  int n = 2000;
  double noise = 0.05;
  int dim = 2;  ///< gaussian_nd only; moons and circles are always 2D

  void validate() const;
  [[nodiscard]] int data_dim() const { return kind == DatasetKind::gaussian_nd ? dim : 2; }
};

struct Dataset {
  PointBatch points;
  std::vector<int> labels;  ///< component index (0 or 1); all 0 for gaussian_nd
};

/// Moons: ceil(n/2) points on the outer arc (cos a, sin a) followed by
/// floor(n/2) on the inner arc (1 - cos a, 0.5 - sin a), a ~ U[0, pi].
/// Circles: ceil(n/2) on the unit circle, floor(n/2) on radius 0.5, a ~ U[0, 2pi).
/// Gaussian noise N(0, noise^2) is added to every coordinate of moons and circles.
/// gaussian_nd: N(0, I_dim).
Dataset generate(const DatasetSpec& spec, Rng& rng);

}  // namespace fmsolve::data
