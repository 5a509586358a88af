#ifndef FABCO_TESTS_GRAD_CHECK_H_
#define FABCO_TESTS_GRAD_CHECK_H_

// Finite-difference check of the weighted L1 objective. The loss used for
// the differences is evaluated by a scalar forward pass written here, not by
// the library, so the two sides share nothing but the parameter layout.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fabco/nn.h"

namespace fabco::testing {

struct GradCheckCase {
  nn::NetSpec spec;
  std::uint64_t init_seed = 0;
  Eigen::MatrixXd inputs;   // input_dim x batch
  Eigen::MatrixXd targets;  // output_dim x batch
  Eigen::VectorXd weights;  // batch
  double scale = 1.0;
};

struct GradCheckStats {
  int checked = 0;
  int skipped_kinks = 0;
  int failures = 0;
  double worst_rel_error = 0.0;
  std::string first_failure;
};

inline GradCheckCase RandomGradCheckCase(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  GradCheckCase c;
  const int hidden_layers = pick(0, 3);
  c.spec.layer_widths.push_back(pick(1, 7));
  for (int l = 0; l < hidden_layers; ++l) {
    c.spec.layer_widths.push_back(pick(1, 9));
  }
  c.spec.layer_widths.push_back(pick(1, 4));
  c.spec.output_activation = pick(0, 1) == 0 ? nn::OutputActivation::kSigmoid
                                             : nn::OutputActivation::kIdentity;
  c.init_seed = rng();
  const int batch = pick(1, 6);
  c.inputs = Eigen::MatrixXd::NullaryExpr(
      c.spec.input_dim(), batch, [&] { return unit(rng); });
  c.targets = Eigen::MatrixXd::NullaryExpr(
      c.spec.output_dim(), batch, [&] { return unit(rng); });
  c.weights = Eigen::VectorXd::NullaryExpr(
      batch, [&] { return 1.0 + unit(rng); });  // in [0, 2]
  c.scale = 1.0 / batch;
  return c;
}

// Loss plus the sign of every ReLU pre-activation and residual.
struct OracleEval {
  double loss = 0.0;
  std::vector<int> pattern;
};

inline OracleEval OracleLoss(const GradCheckCase& c,
                             const nn::NetParams& p) {
  OracleEval out;
  const int layers = c.spec.num_layers();
  for (int k = 0; k < c.inputs.cols(); ++k) {
    std::vector<double> a(c.inputs.rows());
    for (int i = 0; i < c.inputs.rows(); ++i) a[i] = c.inputs(i, k);
    for (int l = 0; l < layers; ++l) {
      const Eigen::MatrixXd& w = p.weights[l];
      std::vector<double> z(w.rows());
      for (int r = 0; r < w.rows(); ++r) {
        double s = p.biases[l](r);
        for (int col = 0; col < w.cols(); ++col) s += w(r, col) * a[col];
        z[r] = s;
      }
      if (l + 1 < layers) {
        for (double& v : z) {
          out.pattern.push_back(v > 0.0);
          v = std::max(v, 0.0);
        }
      } else if (c.spec.output_activation == nn::OutputActivation::kSigmoid) {
        for (double& v : z) v = 1.0 / (1.0 + std::exp(-v));
      }
      a = std::move(z);
    }
    double sample = 0.0;
    for (int i = 0; i < c.targets.rows(); ++i) {
      double r = a[i] - c.targets(i, k);
      out.pattern.push_back(r > 0.0);
      sample += std::abs(r);
    }
    out.loss += c.weights(k) * sample;
  }
  out.loss *= c.scale;
  return out;
}

// Central differences with step h against the analytic gradient. A
// component is kink-adjacent, and skipped, when perturbing it by +-h flips
// any ReLU or residual sign.
inline GradCheckStats CheckGradients(const GradCheckCase& c, double h,
                                     double rel_tol) {
  nn::Network net(c.spec, c.init_seed);
  nn::NetParams grad;
  nn::WeightedL1Objective(net, c.inputs, c.targets, c.weights, c.scale, &grad);

  GradCheckStats stats;
  nn::NetParams p = net.params();
  const std::vector<int> base = OracleLoss(c, p).pattern;
  auto check = [&](double& theta, double analytic, const std::string& where) {
    const double saved = theta;
    theta = saved + h;
    OracleEval plus = OracleLoss(c, p);
    theta = saved - h;
    OracleEval minus = OracleLoss(c, p);
    theta = saved;
    if (plus.pattern != base || minus.pattern != base) {
      ++stats.skipped_kinks;
      return;
    }
    const double numeric = (plus.loss - minus.loss) / (2.0 * h);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic - numeric) / denom;
    ++stats.checked;
    stats.worst_rel_error = std::max(stats.worst_rel_error, rel);
    if (rel > rel_tol) {
      if (stats.failures == 0) {
        stats.first_failure = where + " analytic=" + std::to_string(analytic) +
                              " numeric=" + std::to_string(numeric);
      }
      ++stats.failures;
    }
  };
  for (size_t l = 0; l < p.weights.size(); ++l) {
    for (int r = 0; r < p.weights[l].rows(); ++r) {
      for (int col = 0; col < p.weights[l].cols(); ++col) {
        check(p.weights[l](r, col), grad.weights[l](r, col),
              "W" + std::to_string(l) + "(" + std::to_string(r) + "," +
                  std::to_string(col) + ")");
      }
      check(p.biases[l](r), grad.biases[l](r),
            "b" + std::to_string(l) + "(" + std::to_string(r) + ")");
    }
  }
  return stats;
}

}  // namespace fabco::testing

#endif  // FABCO_TESTS_GRAD_CHECK_H_
