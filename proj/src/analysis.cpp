#include "jcm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "jcm/errors.hpp"

namespace jcm {

namespace {

// Grace added to the matching window so grid-quantized extremum times landing
// exactly on the window edge are not lost to rounding.
constexpr double kWindowGrace = 1e-9;

std::vector<Extremum> filter_kind(const std::vector<Extremum>& all,
                                  ExtremumKind kind) {
  std::vector<Extremum> out;
  for (const auto& e : all)
    if (e.kind == kind) out.push_back(e);
  return out;
}

struct Alignment {
  int matches = 0;
  double cost = 0.0;
  double tsum = 0.0;
  int action = -1;  // 0 match, 1 skip a, 2 skip b
};

bool better(const Alignment& lhs, const Alignment& rhs) {
  if (lhs.matches != rhs.matches) return lhs.matches > rhs.matches;
  if (lhs.cost != rhs.cost) return lhs.cost < rhs.cost;
  return lhs.tsum < rhs.tsum;
}

// Optimal order-preserving alignment: maximize pairs, then minimize total
// |dt|, then total pair time (the last tie-break keeps the result symmetric
// in the two inputs).
void align(const std::vector<Extremum>& a, const std::vector<Extremum>& b,
           double window, CorrespondenceReport& report) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<Alignment> table((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> Alignment& {
    return table[i * (m + 1) + j];
  };

  for (std::size_t i = n;; --i) {
    for (std::size_t j = m;; --j) {
      if (i < n || j < m) {
        Alignment options[3];
        bool valid[3] = {false, false, false};
        if (i < n && j < m) {
          const double gap = std::abs(a[i].t - b[j].t);
          if (gap <= window + kWindowGrace) {
            options[0] = at(i + 1, j + 1);
            options[0].matches += 1;
            options[0].cost += gap;
            options[0].tsum += a[i].t + b[j].t;
            options[0].action = 0;
            valid[0] = true;
          }
        }
        if (i < n) {
          options[1] = at(i + 1, j);
          options[1].action = 1;
          valid[1] = true;
        }
        if (j < m) {
          options[2] = at(i, j + 1);
          options[2].action = 2;
          valid[2] = true;
        }
        // Tie preference: match first, then skip the earlier-time event, so
        // the choice does not depend on the argument order.
        int order[3] = {0, 1, 2};
        if (i < n && j < m && b[j].t < a[i].t) {
          order[1] = 2;
          order[2] = 1;
        }
        bool have = false;
        Alignment best;
        for (int idx : order) {
          if (!valid[idx]) continue;
          if (!have || better(options[idx], best)) {
            best = options[idx];
            have = true;
          }
        }
        at(i, j) = best;
      }
      if (j == 0) break;
    }
    if (i == 0) break;
  }

  std::size_t i = 0, j = 0;
  while (i < n || j < m) {
    const Alignment& cell = at(i, j);
    if (cell.action == 0) {
      report.matched.push_back({a[i].t, b[j].t, std::abs(a[i].t - b[j].t)});
      ++i, ++j;
    } else if (cell.action == 1) {
      ++report.unmatched_a;
      ++i;
    } else {
      ++report.unmatched_b;
      ++j;
    }
  }
}

}  // namespace

std::vector<Extremum> ExtremaList::maxima() const {
  return filter_kind(extrema, ExtremumKind::maximum);
}

std::vector<Extremum> ExtremaList::minima() const {
  return filter_kind(extrema, ExtremumKind::minimum);
}

ExtremaList detect_extrema(const TimeSeries& series, double prominence) {
  if (series.size() < 5)
    throw std::invalid_argument("extrema detection needs at least 5 samples");
  if (!(series.dt > 0.0))
    throw std::invalid_argument("extrema detection needs a positive grid step");
  if (prominence < 0.0)
    throw std::invalid_argument("prominence must be non-negative");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : series.values) {
    if (!std::isfinite(v))
      throw std::invalid_argument("series contains non-finite samples");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  ExtremaList list;
  const auto& v = series.values;

  // Collapse runs of equal samples first, so a crest landing exactly between
  // two grid points (a two-sample plateau) still counts once.
  std::vector<std::pair<std::size_t, double>> runs;
  for (std::size_t k = 0; k < series.size();) {
    std::size_t j = k;
    while (j + 1 < series.size() && v[j + 1] == v[k]) ++j;
    runs.emplace_back(k, v[k]);
    k = j + 1;
  }
  for (std::size_t r = 1; r + 1 < runs.size(); ++r) {
    const double value = runs[r].second;
    const double t = series.t(runs[r].first);
    if (value > runs[r - 1].second && value > runs[r + 1].second)
      list.extrema.push_back({t, value, ExtremumKind::maximum});
    else if (value < runs[r - 1].second && value < runs[r + 1].second)
      list.extrema.push_back({t, value, ExtremumKind::minimum});
  }

  // Persistence-style simplification: repeatedly drop the shallowest adjacent
  // pair until every remaining neighbor gap clears the threshold. Dropping
  // pairs keeps the max/min alternation intact.
  const double threshold = prominence * (hi - lo);
  auto& e = list.extrema;
  while (e.size() >= 2) {
    std::size_t arg = 0;
    double smallest = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < e.size(); ++k) {
      const double gap = std::abs(e[k].value - e[k + 1].value);
      if (gap < smallest) {
        smallest = gap;
        arg = k;
      }
    }
    if (smallest >= threshold) break;
    e.erase(e.begin() + arg, e.begin() + arg + 2);
  }
  return list;
}

CorrespondenceReport match_extrema(const ExtremaList& a, const ExtremaList& b,
                                   double window) {
  if (window < 0.0) throw std::invalid_argument("window must be non-negative");
  CorrespondenceReport report;
  report.window = window;
  align(a.maxima(), b.maxima(), window, report);
  align(a.minima(), b.minima(), window, report);
  std::sort(report.matched.begin(), report.matched.end(),
            [](const MatchedPair& lhs, const MatchedPair& rhs) {
              return lhs.t_a < rhs.t_a;
            });
  return report;
}

double oscillation_period(const TimeSeries& series, double t_lo, double t_hi,
                          double prominence) {
  if (!(t_hi > t_lo)) throw std::invalid_argument("empty period window");
  const ExtremaList list = detect_extrema(series, prominence);
  std::vector<double> times;
  for (const auto& e : list.maxima())
    if (e.t >= t_lo - 1e-12 && e.t <= t_hi + 1e-12) times.push_back(e.t);
  if (times.size() < 3)
    throw InsufficientExtrema("oscillation period needs >= 3 maxima in the "
                              "window, found " +
                              std::to_string(times.size()));
  return (times.back() - times.front()) / static_cast<double>(times.size() - 1);
}

double rise_end(const TimeSeries& series) {
  if (series.values.empty())
    throw std::invalid_argument("rise_end needs a non-empty series");
  const double peak =
      *std::max_element(series.values.begin(), series.values.end());
  const double threshold = 0.95 * peak;
  for (std::size_t k = 0; k < series.size(); ++k)
    if (series.values[k] > threshold) return series.t(k);
  return series.t_last();
}

}  // namespace jcm
