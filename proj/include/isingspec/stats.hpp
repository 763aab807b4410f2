#pragma once

#include <functional>
#include <vector>

#include "isingspec/common.hpp"

namespace isingspec::stats {

double mean(const std::vector<double>& x);
// Unbiased sample variance.
double variance(const std::vector<double>& x);

// Flyvbjerg-Petersen blocking. The series is halved repeatedly; the error of
// the mean at each level is sd / sqrt(n - 1). The reported error is taken at
// the first level from which the estimates stay flat within their own
// uncertainty. Without such a plateau the largest estimate is returned and
// `plateau` is false.
struct BlockingResult {
  double mean = 0.0;
  double error = 0.0;
  double naive_error = 0.0;
  double tau_int = 0.5;  // (error / naive_error)^2 / 2
  bool plateau = false;
  std::vector<double> level_errors;
};
BlockingResult blocking(const std::vector<double>& series);

// Jackknife over contiguous blocks. `columns` are observables sampled in
// lock step; f maps a vector of column means to a scalar.
using Reducer = std::function<double(const std::vector<double>&)>;

// Leave-one-block-out means, one row per block.
std::vector<std::vector<double>> jackknife_means(const std::vector<std::vector<double>>& columns,
                                                 int n_blocks);
// Standard error from replicas of a statistic (n-1)/n * sum (f_i - f_bar)^2.
double jackknife_error(const std::vector<double>& replicas);
Estimate jackknife(const std::vector<std::vector<double>>& columns, int n_blocks, const Reducer& f);

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double intercept_error = 0.0;
  double slope_error = 0.0;
  double covariance = 0.0;  // cov(intercept, slope)
  double chi2 = 0.0;
  int dof = 0;
};
// Weighted least squares y = intercept + slope x with weights 1/sigma^2.
// Empty sigma means unit weights with errors scaled by the residual variance.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                     const std::vector<double>& sigma = {});

struct Moments {
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};
// Sample skewness g1 and excess kurtosis g2 (biased moment ratios).
Moments shape_moments(const std::vector<double>& x);
// Standard errors of g1 and g2 for n independent Gaussian draws.
double skewness_null_error(double n);
double kurtosis_null_error(double n);

// Neumaier-compensated sum.
class CompensatedSum {
 public:
  void add(double v);
  double value() const { return sum_ + c_; }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

}  // namespace isingspec::stats
