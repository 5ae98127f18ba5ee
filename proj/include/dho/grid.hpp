#pragma once

#include <cstddef>
#include <vector>

namespace dho {

enum class GridKind { Spatial, Temporal };

/// Uniform sampling of [min, max] with `count` points, endpoints included.
struct GridSpec {
  double min = 0.0;
  double max = 1.0;
  std::size_t count = 2;
  GridKind kind = GridKind::Temporal;

  /// Throws Error(InvalidParams) unless min < max, both finite, count >= 2.
  void validate() const;
  double step() const;
  double at(std::size_t i) const;
  std::vector<double> points() const;

  /// Grid on [0, t_max] whose spacing is `dt` (rounded so the endpoint lands).
  static GridSpec temporal(double t_max, double dt);
  static GridSpec spatial(double half_width, std::size_t count);
};

}  // namespace dho
