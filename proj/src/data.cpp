#include "fmsolve/data.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace fmsolve::data {

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::moons:
      return "moons";
    case DatasetKind::circles:
      return "circles";
    case DatasetKind::gaussian_nd:
      return "gaussian_nd";
  }
  return "unknown";
}

DatasetKind parse_kind(std::string_view name) {
  for (DatasetKind k : {DatasetKind::moons, DatasetKind::circles, DatasetKind::gaussian_nd}) {
    if (name == to_string(k)) {
      return k;
    }
  }
  throw ConfigError(
      fmt::format("unknown dataset '{}' (expected moons, circles or gaussian_nd)", name));
}

void DatasetSpec::validate() const {
  if (n < 1) {
    throw ConfigError(fmt::format("dataset size must be >= 1 (got {})", n));
  }
  if (!(noise >= 0.0) || !std::isfinite(noise)) {
    throw ConfigError(fmt::format("dataset noise must be finite and >= 0 (got {})", noise));
  }
  if (kind == DatasetKind::gaussian_nd && dim < 1) {
    throw ConfigError(fmt::format("gaussian_nd dimension must be >= 1 (got {})", dim));
  }
}

Dataset generate(const DatasetSpec& spec, Rng& rng) {
  spec.validate();
  Dataset out;
  out.labels.assign(static_cast<std::size_t>(spec.n), 0);
  if (spec.kind == DatasetKind::gaussian_nd) {
    out.points = gaussian_sample(rng, spec.n, spec.dim);
    return out;
  }

  out.points.resize(spec.n, 2);
  const int first = (spec.n + 1) / 2;
  const double pi = std::numbers::pi;
  for (int i = 0; i < spec.n; ++i) {
    const int label = i < first ? 0 : 1;
    double x = 0.0;
    double y = 0.0;
    if (spec.kind == DatasetKind::moons) {
      const double a = rng.uniform(0.0, pi);
      if (label == 0) {
        x = std::cos(a);
        y = std::sin(a);
      } else {
        x = 1.0 - std::cos(a);
        y = 0.5 - std::sin(a);
      }
    } else {
      const double a = rng.uniform(0.0, 2.0 * pi);
      const double r = label == 0 ? 1.0 : 0.5;
      x = r * std::cos(a);
      y = r * std::sin(a);
    }
    if (spec.noise > 0.0) {
      x += spec.noise * rng.gaussian();
      y += spec.noise * rng.gaussian();
    }
    out.points(i, 0) = x;
    out.points(i, 1) = y;
    out.labels[static_cast<std::size_t>(i)] = label;
  }
  return out;
}

}  // namespace fmsolve::data
