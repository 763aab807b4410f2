#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isingspec/common.hpp"

namespace isingspec {

struct ExpTerm {
  double amplitude = 0.0;
  double mass = 0.0;
};

// sum_i B_i e^{-m_i |t|}, masses strictly increasing, amplitudes positive.
struct ExpSumModel {
  std::vector<ExpTerm> terms;
  double residual_norm = 0.0;

  double operator()(double t) const;
  void validate() const;  // throws PreconditionError
};

struct KSample {
  double t = 0.0;
  double K = 0.0;
  double error = 0.0;  // standard error, 0 when unknown
};

struct FitWindow {
  double t_min = 0.0;
  double t_max = 0.0;
};

struct FitResult {
  ExpSumModel model;
  Eigen::MatrixXd covariance;  // parameters ordered (B_1, m_1, B_2, m_2, ...)
  FitWindow window;
  int points = 0;
  double condition_number = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;               // relative, at the returned point
  std::vector<double> residual_history;     // one entry per accepted iterate
  Flags flags;
};

// Stage 1 found fewer numerically independent exponentials than requested.
class ResolvableTermsError : public DomainError {
 public:
  ResolvableTermsError(int requested, int resolvable);
  int requested() const { return requested_; }
  int resolvable() const { return resolvable_; }

 private:
  int requested_;
  int resolvable_;
};

// Weighted residual norm of a model on the window: weights 1/stderr when every
// sample in the window has one, else 1/|K| (uniform on log K).
double residual_norm(const ExpSumModel& model, const std::vector<KSample>& samples, FitWindow window);

// Matrix-pencil initializer on the uniform grid, then variable projection:
// amplitudes by weighted linear least squares at each step, log-masses by
// Levenberg-damped Gauss-Newton with only descending steps accepted. A
// solution with a non-positive amplitude is refitted with one term fewer and
// flagged.
FitResult fit_exponentials(const std::vector<KSample>& samples, int n_terms, FitWindow window);

struct GapReport {
  bool ok = true;
  std::vector<std::string> violations;
};
// Strict ordering m_1 < m_2 < ... and m_k < 2 m_1 for every k > 1.
GapReport gap_check(const ExpSumModel& model);

struct M1Estimate {
  double m1 = 0.0;
  double error = 0.0;
  double slope_variation = 0.0;  // relative change of the local log-slope across the window
  Flags flags;
};
// Weighted straight-line fit of log K over the window.
M1Estimate m1_extraction(const std::vector<KSample>& samples, FitWindow window);

// Reference E8 ratios m2/m1 = 2 cos(pi/5), m3/m1 = 2 cos(pi/30), for comparison output only.
struct E8Ratios {
  double m2_over_m1;
  double m3_over_m1;
};
E8Ratios e8_ratios();

}  // namespace isingspec
