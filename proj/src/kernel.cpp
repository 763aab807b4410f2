#include "isingspec/kernel.hpp"

#include <cmath>
#include <string>

#include "isingspec/bessel.hpp"
#include "isingspec/common.hpp"
#include "isingspec/text_util.hpp"

namespace isingspec {
namespace {

// Integral of amplitude * m^exponent * kernel(m) over one piece. `decay_from`
// is a mass beyond which the kernel factor is known to be decreasing.
template <class Kernel>
double integrate_piece(const KernelContext& ctx, const PowerPiece& piece, const Kernel& kernel,
                       double decay_from) {
  auto f = [&](double m) {
    const double k = kernel(m);
    return k == 0.0 ? 0.0 : piece.amplitude * std::pow(m, piece.exponent) * k;
  };
  if (!piece.infinite()) {
    // log-mass variable keeps power laws smooth across decades
    auto g = [&](double u) {
      const double m = piece.m_lo * std::exp(u);
      return f(m) * m;
    };
    return quad::integrate(g, 0.0, std::log(piece.m_hi / piece.m_lo), ctx.options()).value;
  }
  const double u_min = decay_from > piece.m_lo ? std::log(decay_from / piece.m_lo) + 1.0 : 0.0;
  return quad::integrate_log_tail(f, piece.m_lo, ctx.options(), u_min, ctx.tail_cutoff()).value;
}

}  // namespace

KernelContext::KernelContext(const MassSpectralMeasure& measure, double quad_rel_tol,
                             double quad_abs_tol, double tail_cutoff)
    : rho_tilde_(as_kind(measure, MeasureKind::rho_tilde)),
      rho_(as_kind(measure, MeasureKind::rho)),
      tail_cutoff_(tail_cutoff) {
  if (!(quad_rel_tol > 0.0 && quad_rel_tol < 1.0) || !(quad_abs_tol > 0.0 && quad_abs_tol < 1.0)) {
    throw PreconditionError("KernelContext: tolerances must lie in (0, 1)");
  }
  if (!(tail_cutoff > 0.0)) throw PreconditionError("KernelContext: tail_cutoff must be positive");
  options_.rel_tol = quad_rel_tol;
  options_.abs_tol = quad_abs_tol;
}

RadialPoint RadialPoint::make(double s, double y) { return {s, y, std::hypot(s, y)}; }

double kernel_H_hat(const KernelContext& ctx, double r) {
  if (!(r > 0.0)) throw DivergenceError("kernel_H: H diverges at the origin (r = 0)");
  double total = 0.0;
  for (const auto& a : ctx.rho_tilde().atoms()) total += a.weight * bessel_k0(a.mass * r);
  for (const auto& p : ctx.rho_tilde().pieces()) {
    total += integrate_piece(ctx, p, [r](double m) { return bessel_k0(m * r); }, 1.0 / r);
  }
  return total;
}

double kernel_H(const KernelContext& ctx, const RadialPoint& pt) { return kernel_H_hat(ctx, pt.r); }

double kernel_K(const KernelContext& ctx, double s) {
  const double as = std::abs(s);
  double total = 0.0;
  for (const auto& a : ctx.rho().atoms()) total += a.weight * std::exp(-a.mass * as);
  for (const auto& p : ctx.rho().pieces()) {
    total += integrate_piece(ctx, p, [as](double m) { return std::exp(-m * as); },
                             as > 0.0 ? 1.0 / as : 0.0);
  }
  return total;
}

double kernel_K_drop(const KernelContext& ctx, double eps) {
  const double e = std::abs(eps);
  if (e == 0.0) return 0.0;
  double total = 0.0;
  for (const auto& a : ctx.rho().atoms()) total += a.weight * -std::expm1(-a.mass * e);
  for (const auto& p : ctx.rho().pieces()) {
    total += integrate_piece(ctx, p, [e](double m) { return -std::expm1(-m * e); }, 1.0 / e);
  }
  return total;
}

double short_distance_ratio(const KernelContext& ctx, double eps) {
  if (!(eps > 0.0)) throw DomainError("short_distance_ratio: eps must be positive");
  return kernel_K_drop(ctx, eps) / std::pow(eps, 0.75);
}

FirstMoment first_moment_class(const MassSpectralMeasure& measure_rho) {
  if (measure_rho.kind() != MeasureKind::rho) {
    throw PreconditionError("first_moment_class: expects the rho form of the measure");
  }
  FirstMoment out;
  for (const auto& a : measure_rho.atoms()) out.value += a.mass * a.weight;
  for (const auto& p : measure_rho.pieces()) {
    const double q = p.exponent + 2.0;  // m * m^p integrates to m^{p+2}/(p+2)
    if (p.infinite()) {
      if (q >= 0.0) return {false, 0.0};
      out.value += p.amplitude * -std::pow(p.m_lo, q) / q;
    } else if (std::abs(q) < 1e-15) {
      out.value += p.amplitude * std::log(p.m_hi / p.m_lo);
    } else {
      out.value += p.amplitude * (std::pow(p.m_hi, q) - std::pow(p.m_lo, q)) / q;
    }
  }
  return out;
}

void require_upper_gap(const MassSpectralMeasure& measure) {
  const double m1 = measure.m1();
  if (!(measure.atom_weight_at_m1() > 0.0)) {
    throw PreconditionError("upper mass gap: no atom at m1 = " + format_double(m1));
  }
  for (const auto& p : measure.pieces()) {
    if (p.m_lo <= m1) {
      throw PreconditionError("upper mass gap violated by piece [" + format_double(p.m_lo) + ", " +
                              format_double(p.m_hi) + ") which touches m1 = " +
                              format_double(m1));
    }
  }
}

double oz_H_ratio(const KernelContext& ctx, double t) {
  require_upper_gap(ctx.rho_tilde());
  if (!(t > 0.0)) throw DomainError("oz_H_ratio: t must be positive");
  const double m1 = ctx.m1();
  const double sqrt_t = std::sqrt(t);
  // K0(m t) t^{1/2} e^{m1 t} written with the scaled Bessel function
  auto factor = [&](double m) {
    return sqrt_t * bessel_k0_scaled(m * t) * std::exp(-(m - m1) * t);
  };
  double total = 0.0;
  for (const auto& a : ctx.rho_tilde().atoms()) total += a.weight * factor(a.mass);
  for (const auto& p : ctx.rho_tilde().pieces()) total += integrate_piece(ctx, p, factor, 0.0);
  return total;
}

double oz_K_ratio(const KernelContext& ctx, double t) {
  require_upper_gap(ctx.rho_tilde());
  const double at = std::abs(t);
  const double m1 = ctx.m1();
  auto factor = [&](double m) { return std::exp(-(m - m1) * at); };
  double total = 0.0;
  for (const auto& a : ctx.rho().atoms()) total += a.weight * factor(a.mass);
  for (const auto& p : ctx.rho().pieces()) total += integrate_piece(ctx, p, factor, 0.0);
  return total;
}

OzLimits oz_limits(const MassSpectralMeasure& measure) {
  const auto rt = as_kind(measure, MeasureKind::rho_tilde);
  require_upper_gap(rt);
  const double w = rt.atom_weight_at_m1();
  const double m1 = rt.m1();
  OzLimits out;
  out.h_limit = w * std::sqrt(kPi / (2.0 * m1));
  out.k_limit = out.h_limit * std::sqrt(2.0 * kPi / m1);
  return out;
}

std::pair<double, double> lemma_anc_ratios(double m, double t, double alpha, double beta) {
  if (!(m > 0.0)) throw DomainError("lemma_anc_ratios: m must be positive");
  if (!(0.0 < beta && beta < 0.5 && 0.5 < alpha && alpha < 0.75)) {
    throw DomainError("lemma_anc_ratios: need 0 < beta < 1/2 < alpha < 3/4");
  }
  if (!(t > 1.0)) throw DomainError("lemma_anc_ratios: need t > 1 so that t^beta < t^alpha");
  quad::Options opt;
  opt.rel_tol = 1e-12;
  opt.abs_tol = 1e-300;
  // sqrt(u^2+t^2) - t without cancellation
  auto excess = [t](double u) { return u * u / (std::sqrt(u * u + t * t) + t); };
  // past u_end the exponent exceeds 60 and the integrand is negligible
  const double reach = t + 60.0 / m;
  const double u_end = std::sqrt(reach * reach - t * t);
  const double width = std::sqrt(t / m);
  auto first_integrand = [&](double u) {
    return std::pow(u * u + t * t, -0.25) * std::exp(-m * excess(u));
  };
  double first = 0.0;
  for (double a = 0.0; a < u_end; a += 4.0 * width) {
    first += quad::integrate(first_integrand, a, std::min(a + 4.0 * width, u_end), opt).value;
  }
  auto second_integrand = [&](double u) { return std::exp(-m * excess(u)); };
  const double lo = std::pow(t, beta);
  const double hi = std::pow(t, alpha);
  double second = 0.0;
  for (double a = lo; a < hi; a += 4.0 * width) {
    second += quad::integrate(second_integrand, a, std::min(a + 4.0 * width, hi), opt).value;
  }
  return {first, second / std::sqrt(t)};
}

std::vector<double> kernel_K_grid(const KernelContext& ctx, const std::vector<double>& s) {
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = kernel_K(ctx, s[i]);
  return out;
}

std::vector<double> kernel_H_grid(const KernelContext& ctx, const std::vector<RadialPoint>& pts) {
  std::vector<double> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) out[i] = kernel_H(ctx, pts[i]);
  return out;
}

}  // namespace isingspec
