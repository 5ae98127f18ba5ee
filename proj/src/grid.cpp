#include "dho/grid.hpp"

#include <cmath>
#include <string>

#include "dho/errors.hpp"

namespace dho {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::Overdamped: return "Overdamped";
    case ErrorCode::ConstraintInfeasible: return "ConstraintInfeasible";
    case ErrorCode::QuadratureUnderResolved: return "QuadratureUnderResolved";
    case ErrorCode::TruncationLeak: return "TruncationLeak";
    case ErrorCode::ToleranceUnachievable: return "ToleranceUnachievable";
    case ErrorCode::SeriesDivergence: return "SeriesDivergence";
    case ErrorCode::ContourUnderResolved: return "ContourUnderResolved";
  }
  return "Unknown";
}

void GridSpec::validate() const {
  if (!std::isfinite(min) || !std::isfinite(max) || !(min < max)) {
    throw Error(ErrorCode::InvalidParams,
                "grid requires finite min < max (got " + std::to_string(min) + ", " +
                    std::to_string(max) + ")");
  }
  if (count < 2) {
    throw Error(ErrorCode::InvalidParams, "grid requires at least 2 samples");
  }
}

double GridSpec::step() const { return (max - min) / static_cast<double>(count - 1); }

double GridSpec::at(std::size_t i) const {
  // Last point is pinned to max so the endpoint is exact.
  if (i + 1 == count) return max;
  return min + static_cast<double>(i) * step();
}

std::vector<double> GridSpec::points() const {
  validate();
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = at(i);
  return out;
}

GridSpec GridSpec::temporal(double t_max, double dt) {
  if (!(dt > 0.0) || !(t_max > 0.0)) {
    throw Error(ErrorCode::InvalidParams, "temporal grid requires t_max > 0 and dt > 0");
  }
  const auto intervals = static_cast<std::size_t>(std::llround(t_max / dt));
  GridSpec g{0.0, t_max, (intervals < 1 ? 1 : intervals) + 1, GridKind::Temporal};
  g.validate();
  return g;
}

GridSpec GridSpec::spatial(double half_width, std::size_t count) {
  GridSpec g{-half_width, half_width, count, GridKind::Spatial};
  g.validate();
  return g;
}

}  // namespace dho
