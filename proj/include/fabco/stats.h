#ifndef FABCO_STATS_H_
#define FABCO_STATS_H_

#include <vector>

namespace fabco {

struct WelchResult {
  double mean_a = 0.0;
  double mean_b = 0.0;
  double t = 0.0;
  double df = 0.0;
  // two-sided; NaN when either group has fewer than 2 samples
  double p_value = 0.0;
};

double Mean(const std::vector<double>& values);
// Unbiased (n - 1) sample variance; 0 for fewer than 2 samples.
double SampleVariance(const std::vector<double>& values);

// Welch's unequal-variance t-test of mean(a) vs mean(b).
WelchResult WelchTTest(const std::vector<double>& a,
                       const std::vector<double>& b);

// Feasibility of two demonstration arms, one value per demonstration.
struct PairedFeasibilityStats {
  double mean_fb = 0.0;
  double mean_no_fb = 0.0;
  double std_fb = 0.0;  // sample standard deviation
  double std_no_fb = 0.0;
  WelchResult welch;
  // false when either arm has a single demonstration
  bool p_defined = false;
};

PairedFeasibilityStats ComparePairedFeasibility(
    const std::vector<double>& fb, const std::vector<double>& no_fb);

}  // namespace fabco

#endif  // FABCO_STATS_H_
