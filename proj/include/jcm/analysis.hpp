#pragma once

#include <vector>

#include "jcm/timeseries.hpp"

namespace jcm {

enum class ExtremumKind { maximum, minimum };

struct Extremum {
  double t;
  double value;
  ExtremumKind kind;
};

struct ExtremaList {
  std::vector<Extremum> extrema;  // increasing t, alternating kinds

  std::vector<Extremum> maxima() const;
  std::vector<Extremum> minima() const;
};

// Strict 3-point local extrema (endpoints excluded), then alternation-
// preserving simplification: adjacent max/min pairs whose value difference is
// below prominence * (series range) are removed, shallowest first. The
// surviving list still alternates and shrinking never adds extrema as the
// prominence grows.
ExtremaList detect_extrema(const TimeSeries& series, double prominence);

struct MatchedPair {
  double t_a;
  double t_b;
  double dt_abs;
};

struct CorrespondenceReport {
  std::vector<MatchedPair> matched;  // one-to-one, order preserving
  int unmatched_a = 0;
  int unmatched_b = 0;
  double window = 0.0;
};

// Order-preserving pairing of same-kind extrema with |t_a - t_b| <= window.
// The pairing maximizes the number of pairs and then minimizes the total time
// mismatch, which makes match_extrema(a, b) and match_extrema(b, a) agree.
CorrespondenceReport match_extrema(const ExtremaList& a, const ExtremaList& b,
                                   double window);

// Mean spacing of consecutive maxima inside [t_lo, t_hi]. Throws
// InsufficientExtrema when the window holds fewer than three of them.
double oscillation_period(const TimeSeries& series, double t_lo, double t_hi,
                          double prominence = 0.05);

// End of the initial rise: first time the series exceeds 95% of its maximum
// over the whole horizon.
double rise_end(const TimeSeries& series);

}  // namespace jcm
