#include "isingspec/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "isingspec/stats.hpp"
#include "isingspec/text_util.hpp"

namespace isingspec {

double ExpSumModel::operator()(double t) const {
  double v = 0.0;
  for (const auto& term : terms) v += term.amplitude * std::exp(-term.mass * std::abs(t));
  return v;
}

void ExpSumModel::validate() const {
  if (terms.empty()) throw PreconditionError("ExpSumModel: no terms");
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (!(terms[k].amplitude > 0.0) || !(terms[k].mass > 0.0)) {
      throw PreconditionError("ExpSumModel: amplitudes and masses must be positive");
    }
    if (k > 0 && !(terms[k].mass > terms[k - 1].mass)) {
      throw PreconditionError("ExpSumModel: masses must be strictly increasing");
    }
  }
}

ResolvableTermsError::ResolvableTermsError(int requested, int resolvable)
    : DomainError("fewer resolvable terms: requested " + std::to_string(requested) + ", resolvable " +
                  std::to_string(resolvable)),
      requested_(requested),
      resolvable_(resolvable) {}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Data {
  VectorXd t, y, w;
  bool have_errors = false;
};

Data select(const std::vector<KSample>& samples, FitWindow window) {
  std::vector<const KSample*> in;
  const double tol = 1e-9 * std::max(1.0, std::abs(window.t_max));
  for (const auto& s : samples) {
    if (s.t >= window.t_min - tol && s.t <= window.t_max + tol) in.push_back(&s);
  }
  Data d;
  const auto n = static_cast<Eigen::Index>(in.size());
  d.t.resize(n);
  d.y.resize(n);
  d.w.resize(n);
  d.have_errors = !in.empty() && std::all_of(in.begin(), in.end(), [](const KSample* s) { return s->error > 0.0; });
  for (Eigen::Index k = 0; k < n; ++k) {
    d.t[k] = in[k]->t;
    d.y[k] = in[k]->K;
    if (d.have_errors) {
      d.w[k] = 1.0 / in[k]->error;
    } else {
      if (in[k]->K == 0.0) throw DomainError("fit: K vanishes inside the window and no errors were given");
      d.w[k] = 1.0 / std::abs(in[k]->K);
    }
  }
  return d;
}

MatrixXd design(const VectorXd& t, const VectorXd& w, const VectorXd& m) {
  MatrixXd A(t.size(), m.size());
  for (Eigen::Index j = 0; j < m.size(); ++j) A.col(j) = (w.array() * (-m[j] * t.array()).exp()).matrix();
  return A;
}

struct Projection {
  VectorXd B;
  VectorXd r;
  MatrixXd J;  // Kaufman Jacobian with respect to log-masses
};

Projection project(const Data& d, const VectorXd& m) {
  const MatrixXd A = design(d.t, d.w, m);
  const VectorXd b = (d.w.array() * d.y.array()).matrix();
  Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
  Projection p;
  p.B = qr.solve(b);
  p.r = b - A * p.B;
  const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(A.rows(), qr.rank());
  p.J.resize(A.rows(), m.size());
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    // d column_k / d log m_k = -m_k t column_k
    VectorXd dcol = (-m[k] * d.t.array() * A.col(k).array()).matrix() * p.B[k];
    dcol -= Q * (Q.transpose() * dcol);
    p.J.col(k) = -dcol;
  }
  return p;
}

// Matrix pencil: decay rates from the shift structure of the Hankel matrix.
VectorXd pencil_rates(const Data& d, int n_terms, const std::vector<KSample>& samples, FitWindow window) {
  const Eigen::Index M = d.t.size();
  const Eigen::Index L = M / 2;
  const double dt = (d.t[M - 1] - d.t[0]) / static_cast<double>(M - 1);
  MatrixXd Y(M - L, L + 1);
  for (Eigen::Index i = 0; i < M - L; ++i) {
    for (Eigen::Index j = 0; j <= L; ++j) Y(i, j) = d.y[i + j];
  }
  Eigen::JacobiSVD<MatrixXd> svd(Y, Eigen::ComputeThinV);
  const VectorXd sv = svd.singularValues();
  double noise = 0.0;
  int counted = 0;
  for (const auto& s : samples) {
    if (s.t >= window.t_min && s.t <= window.t_max && s.error > 0.0) {
      noise += s.error * s.error;
      ++counted;
    }
  }
  noise = counted > 0 ? std::sqrt(noise / counted) : 0.0;
  const double floor = std::max(1e-11 * sv[0], noise * (std::sqrt(double(M - L)) + std::sqrt(double(L + 1))));
  int rank = 0;
  while (rank < sv.size() && sv[rank] > floor) ++rank;
  if (rank < n_terms) throw ResolvableTermsError(n_terms, rank);
  const MatrixXd V = svd.matrixV().leftCols(n_terms);
  const MatrixXd V1 = V.topRows(L), V2 = V.bottomRows(L);
  const MatrixXd P = V1.completeOrthogonalDecomposition().solve(V2);
  Eigen::EigenSolver<MatrixXd> es(P);
  std::vector<double> rates;
  for (Eigen::Index k = 0; k < n_terms; ++k) {
    const double z = std::abs(es.eigenvalues()[k]);
    rates.push_back(z > 0.0 && z < 1.0 ? -std::log(z) / dt : std::numeric_limits<double>::quiet_NaN());
  }
  // replace unusable roots by a spread above the usable ones
  double top = 0.0;
  for (double r : rates) {
    if (std::isfinite(r)) top = std::max(top, r);
  }
  if (top == 0.0) top = 1.0 / (d.t[M - 1] - d.t[0]);
  for (double& r : rates) {
    if (!std::isfinite(r)) r = (top *= 1.5);
  }
  std::sort(rates.begin(), rates.end());
  for (std::size_t k = 1; k < rates.size(); ++k) rates[k] = std::max(rates[k], rates[k - 1] * 1.01);
  return Eigen::Map<VectorXd>(rates.data(), n_terms);
}

FitResult fit_n(const std::vector<KSample>& samples, int n_terms, FitWindow window, const Data& d) {
  FitResult res;
  res.window = window;
  res.points = static_cast<int>(d.t.size());
  VectorXd theta = pencil_rates(d, n_terms, samples, window).array().log().matrix();
  auto masses = [](const VectorXd& th) { return VectorXd(th.array().exp()); };
  Projection p = project(d, masses(theta));
  double rn = p.r.norm();
  res.residual_history.push_back(rn);
  double lambda = 1e-3;
  const double b_norm = (d.w.array() * d.y.array()).matrix().norm();
  int it = 0;
  for (; it < 1000; ++it) {
    const VectorXd g = p.J.transpose() * p.r;
    res.gradient_norm = g.norm() / std::max(p.J.norm() * rn, 1e-300);
    if (res.gradient_norm < 1e-10 || rn <= 1e-15 * b_norm) break;
    const MatrixXd H = p.J.transpose() * p.J;
    bool accepted = false;
    while (lambda < 1e16) {
      MatrixXd Hd = H;
      Hd.diagonal() += lambda * H.diagonal().cwiseMax(1e-300);
      const VectorXd step = Hd.ldlt().solve(-g);
      const VectorXd trial = theta + step;
      const Projection q = project(d, masses(trial));
      if (q.r.allFinite() && q.r.norm() < rn) {
        theta = trial;
        p = q;
        rn = q.r.norm();
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        break;
      }
      lambda *= 4.0;
    }
    if (!accepted) break;  // no descending step left at working precision
    res.residual_history.push_back(rn);
  }
  res.iterations = it;

  const VectorXd m = masses(theta);
  std::vector<int> order(n_terms);
  for (int k = 0; k < n_terms; ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return m[a] < m[b]; });
  for (int k : order) res.model.terms.push_back({p.B[k], m[k]});

  // covariance and conditioning in (B_1, m_1, B_2, m_2, ...)
  MatrixXd J(d.t.size(), 2 * n_terms);
  for (int k = 0; k < n_terms; ++k) {
    const auto& term = res.model.terms[k];
    const VectorXd e = (d.w.array() * (-term.mass * d.t.array()).exp()).matrix();
    J.col(2 * k) = -e;
    J.col(2 * k + 1) = (term.amplitude * d.t.array() * e.array()).matrix();
  }
  Eigen::JacobiSVD<MatrixXd> jsvd(J);
  const VectorXd js = jsvd.singularValues();
  res.condition_number = js[js.size() - 1] > 0 ? js[0] / js[js.size() - 1] : std::numeric_limits<double>::infinity();
  res.covariance = (J.transpose() * J).completeOrthogonalDecomposition().pseudoInverse();
  const int dof = res.points - 2 * n_terms;
  if (!d.have_errors && dof > 0) res.covariance *= rn * rn / dof;
  return res;
}

}  // namespace

double residual_norm(const ExpSumModel& model, const std::vector<KSample>& samples, FitWindow window) {
  const Data d = select(samples, window);
  stats::CompensatedSum acc;
  for (Eigen::Index k = 0; k < d.t.size(); ++k) {
    const double r = d.w[k] * (d.y[k] - model(d.t[k]));
    acc.add(r * r);
  }
  return std::sqrt(acc.value());
}

FitResult fit_exponentials(const std::vector<KSample>& samples, int n_terms, FitWindow window) {
  if (n_terms < 1) throw PreconditionError("fit_exponentials: n_terms must be at least 1");
  if (!(window.t_max > window.t_min)) throw PreconditionError("fit_exponentials: empty window");
  for (std::size_t k = 1; k < samples.size(); ++k) {
    if (!(samples[k].t > samples[k - 1].t)) throw PreconditionError("fit_exponentials: t must be strictly increasing");
  }
  const Data d = select(samples, window);
  if (d.t.size() < 4 * n_terms) {
    throw PreconditionError("fit_exponentials: window holds " + std::to_string(d.t.size()) + " points, need " +
                            std::to_string(4 * n_terms));
  }
  const double dt = (d.t[d.t.size() - 1] - d.t[0]) / static_cast<double>(d.t.size() - 1);
  for (Eigen::Index k = 1; k < d.t.size(); ++k) {
    if (std::abs(d.t[k] - d.t[k - 1] - dt) > 1e-6 * dt) {
      throw PreconditionError("fit_exponentials: t must be uniformly spaced inside the window");
    }
  }
  Flags flags;
  for (int n = n_terms; n >= 1; --n) {
    FitResult res = fit_n(samples, n, window, d);
    const bool negative = std::any_of(res.model.terms.begin(), res.model.terms.end(),
                                      [](const ExpTerm& t) { return !(t.amplitude > 0.0); });
    bool merged = false;
    for (std::size_t k = 1; k < res.model.terms.size(); ++k) {
      merged = merged || !(res.model.terms[k].mass > res.model.terms[k - 1].mass);
    }
    if (!negative && !merged) {
      res.model.residual_norm = residual_norm(res.model, samples, window);
      res.flags.insert(res.flags.begin(), flags.begin(), flags.end());
      return res;
    }
    if (n == 1) break;
    flags.push_back("non-positive amplitude with " + std::to_string(n) + " terms; refitted with " +
                    std::to_string(n - 1));
  }
  throw DomainError("fit_exponentials: no positive single-exponential fit in the window");
}

namespace {

std::string sub(std::size_t k) {
  // U+2080 + digit
  std::string s;
  for (char c : std::to_string(k)) s += std::string("\xE2\x82") + static_cast<char>(0x80 + (c - '0'));
  return s;
}

}  // namespace

GapReport gap_check(const ExpSumModel& model) {
  GapReport rep;
  const auto& t = model.terms;
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (!(t[k - 1].mass < t[k].mass)) {
      rep.violations.push_back("m" + sub(k) + " < m" + sub(k + 1) + " fails");
    }
  }
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (!(t[k].mass < 2.0 * t[0].mass)) rep.violations.push_back("m" + sub(k + 1) + " < 2m" + sub(1) + " fails");
  }
  rep.ok = rep.violations.empty();
  return rep;
}

M1Estimate m1_extraction(const std::vector<KSample>& samples, FitWindow window) {
  std::vector<double> x, y, s;
  bool errors = true;
  for (const auto& p : samples) {
    if (p.t < window.t_min || p.t > window.t_max) continue;
    if (!(p.K > 0.0)) throw DomainError("m1_extraction: K must be positive inside the window");
    x.push_back(p.t);
    y.push_back(std::log(p.K));
    s.push_back(p.error / p.K);
    errors = errors && p.error > 0.0;
  }
  if (x.size() < 3) throw PreconditionError("m1_extraction: need at least three points in the window");
  auto fit = [&](std::size_t lo, std::size_t hi) {
    std::vector<double> xs(x.begin() + lo, x.begin() + hi), ys(y.begin() + lo, y.begin() + hi);
    if (!errors) return stats::linear_fit(xs, ys);
    std::vector<double> ss(s.begin() + lo, s.begin() + hi);
    return stats::linear_fit(xs, ys, ss);
  };
  const auto all = fit(0, x.size());
  M1Estimate out;
  out.m1 = -all.slope;
  out.error = all.slope_error;
  // local slopes on the first and last thirds
  const std::size_t third = std::max<std::size_t>(2, x.size() / 3);
  const double first = fit(0, third).slope, last = fit(x.size() - third, x.size()).slope;
  out.slope_variation = std::abs(first - last) / std::abs(all.slope);
  if (out.slope_variation >= 0.01) {
    out.flags.push_back("window not asymptotic: local log-slope varies by " +
                        format_double(std::round(1e4 * out.slope_variation) / 100.0) + "%");
  }
  return out;
}

E8Ratios e8_ratios() { return {2.0 * std::cos(kPi / 5.0), 2.0 * std::cos(kPi / 30.0)}; }

}  // namespace isingspec
