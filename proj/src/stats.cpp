#include "isingspec/stats.hpp"

#include <algorithm>
#include <cmath>

namespace isingspec::stats {

double mean(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  CompensatedSum s;
  for (double v : x) s.add(v);
  return s.value() / static_cast<double>(x.size());
}

double variance(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  CompensatedSum s;
  for (double v : x) s.add((v - m) * (v - m));
  return s.value() / static_cast<double>(x.size() - 1);
}

BlockingResult blocking(const std::vector<double>& series) {
  BlockingResult out;
  out.mean = mean(series);
  if (series.size() < 2) {
    out.error = INFINITY;
    out.naive_error = INFINITY;
    return out;
  }
  std::vector<double> x = series;
  std::vector<double> err, err_err;
  while (x.size() >= 2) {
    const double n = static_cast<double>(x.size());
    double c0 = 0.0;
    for (double v : x) c0 += (v - out.mean) * (v - out.mean);
    c0 /= n;
    const double e = std::sqrt(c0 / (n - 1.0));
    err.push_back(e);
    err_err.push_back(e / std::sqrt(2.0 * (n - 1.0)));
    std::vector<double> next(x.size() / 2);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = 0.5 * (x[2 * i] + x[2 * i + 1]);
    x.swap(next);
  }
  out.level_errors = err;
  out.naive_error = err[0];
  // levels with fewer than 16 blocks are too noisy to judge a plateau
  std::size_t usable = 0;
  {
    std::size_t n = series.size();
    while (usable < err.size() && n >= 16) {
      ++usable;
      n /= 2;
    }
  }
  for (std::size_t k = 0; k + 1 < usable; ++k) {
    bool flat = true;
    for (std::size_t j = k + 1; j < usable; ++j) {
      if (err[j] - err[k] > 2.0 * std::hypot(err_err[j], err_err[k]) && err[j] > err[k]) {
        flat = false;
        break;
      }
    }
    if (flat) {
      out.error = err[k];
      out.plateau = true;
      break;
    }
  }
  if (!out.plateau) {
    out.error = *std::max_element(err.begin(), err.begin() + std::max<std::size_t>(usable, 1));
  }
  if (out.naive_error > 0.0) {
    out.tau_int = 0.5 * (out.error / out.naive_error) * (out.error / out.naive_error);
  }
  return out;
}

std::vector<std::vector<double>> jackknife_means(const std::vector<std::vector<double>>& columns,
                                                 int n_blocks) {
  if (columns.empty()) return {};
  const std::size_t n = columns[0].size();
  for (const auto& c : columns) {
    if (c.size() != n) throw PreconditionError("jackknife: columns differ in length");
  }
  n_blocks = static_cast<int>(std::min<std::size_t>(n_blocks, n));
  if (n_blocks < 2) throw PreconditionError("jackknife: need at least two blocks");
  const std::size_t per = n / n_blocks;  // trailing samples beyond n_blocks*per are dropped
  const std::size_t used = per * n_blocks;
  std::vector<std::vector<double>> block_sum(n_blocks, std::vector<double>(columns.size(), 0.0));
  std::vector<double> total(columns.size(), 0.0);
  for (std::size_t c = 0; c < columns.size(); ++c) {
    for (int b = 0; b < n_blocks; ++b) {
      CompensatedSum s;
      for (std::size_t i = b * per; i < (b + 1) * per; ++i) s.add(columns[c][i]);
      block_sum[b][c] = s.value();
      total[c] += s.value();
    }
  }
  std::vector<std::vector<double>> out(n_blocks, std::vector<double>(columns.size()));
  for (int b = 0; b < n_blocks; ++b) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      out[b][c] = (total[c] - block_sum[b][c]) / static_cast<double>(used - per);
    }
  }
  return out;
}

double jackknife_error(const std::vector<double>& replicas) {
  const double n = static_cast<double>(replicas.size());
  if (n < 2) return INFINITY;
  const double m = mean(replicas);
  double s = 0.0;
  for (double r : replicas) s += (r - m) * (r - m);
  return std::sqrt((n - 1.0) / n * s);
}

Estimate jackknife(const std::vector<std::vector<double>>& columns, int n_blocks, const Reducer& f) {
  std::vector<double> full(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) full[c] = mean(columns[c]);
  const auto reps = jackknife_means(columns, n_blocks);
  std::vector<double> vals(reps.size());
  for (std::size_t b = 0; b < reps.size(); ++b) vals[b] = f(reps[b]);
  return {f(full), jackknife_error(vals)};
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                     const std::vector<double>& sigma) {
  const std::size_t n = x.size();
  if (y.size() != n || (!sigma.empty() && sigma.size() != n)) {
    throw PreconditionError("linear_fit: length mismatch");
  }
  if (n < 2) throw PreconditionError("linear_fit: need at least two points");
  double S = 0, Sx = 0, Sy = 0, Sxx = 0, Sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = sigma.empty() ? 1.0 : 1.0 / (sigma[i] * sigma[i]);
    S += w;
    Sx += w * x[i];
    Sy += w * y[i];
  }
  const double xm = Sx / S;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = sigma.empty() ? 1.0 : 1.0 / (sigma[i] * sigma[i]);
    Sxx += w * (x[i] - xm) * (x[i] - xm);
    Sxy += w * (x[i] - xm) * y[i];
  }
  if (!(Sxx > 0.0)) throw PreconditionError("linear_fit: x values are all equal");
  LinearFit fit;
  fit.slope = Sxy / Sxx;
  fit.intercept = Sy / S - fit.slope * xm;
  double var_slope = 1.0 / Sxx;
  double var_int = 1.0 / S + xm * xm / Sxx;
  double cov = -xm / Sxx;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = sigma.empty() ? 1.0 : 1.0 / (sigma[i] * sigma[i]);
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    fit.chi2 += w * r * r;
  }
  fit.dof = static_cast<int>(n) - 2;
  if (sigma.empty()) {
    const double s2 = fit.dof > 0 ? fit.chi2 / fit.dof : 0.0;
    var_slope *= s2;
    var_int *= s2;
    cov *= s2;
  }
  fit.slope_error = std::sqrt(var_slope);
  fit.intercept_error = std::sqrt(var_int);
  fit.covariance = cov;
  return fit;
}

Moments shape_moments(const std::vector<double>& x) {
  const double m = mean(x);
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  const double n = static_cast<double>(x.size());
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) return {};
  return {m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
}

double skewness_null_error(double n) {
  return std::sqrt(6.0 * n * (n - 1.0) / ((n - 2.0) * (n + 1.0) * (n + 3.0)));
}

double kurtosis_null_error(double n) {
  return 2.0 * skewness_null_error(n) * std::sqrt((n * n - 1.0) / ((n - 3.0) * (n + 5.0)));
}

void CompensatedSum::add(double v) {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v)) {
    c_ += (sum_ - t) + v;
  } else {
    c_ += (v - t) + sum_;
  }
  sum_ = t;
}

}  // namespace isingspec::stats
