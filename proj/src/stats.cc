#include "fabco/stats.h"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace fabco {

double Mean(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("Mean: empty input");
  return std::accumulate(values.begin(), values.end(), 0.0) / values.size();
}

double SampleVariance(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  double m = Mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return ss / (values.size() - 1);
}

WelchResult WelchTTest(const std::vector<double>& a,
                       const std::vector<double>& b) {
  WelchResult r;
  r.mean_a = Mean(a);
  r.mean_b = Mean(b);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (a.size() < 2 || b.size() < 2) {
    r.t = nan;
    r.df = nan;
    r.p_value = nan;
    return r;
  }
  double va = SampleVariance(a) / a.size();
  double vb = SampleVariance(b) / b.size();
  double se2 = va + vb;
  double diff = r.mean_a - r.mean_b;
  if (se2 == 0.0) {
    // degenerate: both groups constant
    r.t = diff == 0.0 ? 0.0 : std::copysign(
                                   std::numeric_limits<double>::infinity(), diff);
    r.df = static_cast<double>(a.size() + b.size() - 2);
    r.p_value = diff == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = diff / std::sqrt(se2);
  r.df = se2 * se2 /
         (va * va / (a.size() - 1) + vb * vb / (b.size() - 1));
  boost::math::students_t dist(r.df);
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

PairedFeasibilityStats ComparePairedFeasibility(
    const std::vector<double>& fb, const std::vector<double>& no_fb) {
  PairedFeasibilityStats s;
  s.welch = WelchTTest(fb, no_fb);
  s.mean_fb = s.welch.mean_a;
  s.mean_no_fb = s.welch.mean_b;
  s.std_fb = std::sqrt(SampleVariance(fb));
  s.std_no_fb = std::sqrt(SampleVariance(no_fb));
  s.p_defined = fb.size() >= 2 && no_fb.size() >= 2;
  return s;
}

}  // namespace fabco
