#pragma once

#include <cstddef>
#include <vector>

namespace jcm {

// Observable sampled on the uniform grid t0 + k dt.
struct TimeSeries {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double t(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
  double t_last() const { return values.empty() ? t0 : t(values.size() - 1); }
};

}  // namespace jcm
