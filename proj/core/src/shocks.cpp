#include "epl/shocks.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <numbers>

namespace epl {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kTailSwitch = -30.0;

template <class... F>
struct overloaded : F... {
  using F::operator()...;
};

void check_finite(std::span<const double> v) {
  if (v.empty()) throw DimensionError("empty value row");
  for (double x : v)
    if (!std::isfinite(x)) throw NumericalError("non-finite value passed to shock functional");
}

void check_interior(std::span<const double> P) {
  for (double p : P)
    if (!(p > 0.0 && p < 1.0)) throw NumericalError("probability row not strictly interior");
}

// ---- F_alpha pieces, w is the value of eps_1 - eps_0 ----

double au_cdf(double a, double w) {
  if (w < a) return a * std::exp((w - a) / a);
  if (w < 1.0 - a) return w;
  return 1.0 - a * std::exp(-(w - (1.0 - a)) / a);
}

double au_log_cdf(double a, double w) {
  if (w < a) return std::log(a) + (w - a) / a;
  if (w < 1.0 - a) return std::log(w);
  return std::log1p(-a * std::exp(-(w - (1.0 - a)) / a));
}

double au_log_sf(double a, double w) {
  if (w < a) return std::log1p(-a * std::exp((w - a) / a));
  if (w < 1.0 - a) return std::log1p(-w);
  return std::log(a) - (w - (1.0 - a)) / a;
}

double au_log_pdf(double a, double w) {
  if (w < a) return (w - a) / a;
  if (w < 1.0 - a) return 0.0;
  return -(w - (1.0 - a)) / a;
}

// f'(w) / f(w)
double au_score(double a, double w) {
  if (w < a) return 1.0 / a;
  if (w < 1.0 - a) return 0.0;
  return -1.0 / a;
}

double au_quantile(double a, double p) {
  if (p < a) return a + a * std::log(p / a);
  if (p < 1.0 - a) return p;
  return (1.0 - a) - a * std::log((1.0 - p) / a);
}

// integral of 1 - F over [y, inf)
double au_tail(double a, double y) {
  const double hi = 1.0 - a;
  if (y >= hi) return a * a * std::exp(-(y - hi) / a);
  const double t_lo = ((hi) * (hi)-a * a) / 2.0 + a * a;
  if (y >= a) return ((1.0 - y) * (1.0 - y) - a * a) / 2.0 + a * a;
  return (a - y) - a * a * (1.0 - std::exp((y - a) / a)) + t_lo;
}

// ln Lambda_a for a binary family as a function of delta = v1 - v0: value, d/ddelta, d2/ddelta2
struct DeltaDerivs {
  double g, g1, g2;
};

LogProb from_delta(const DeltaDerivs& d) {
  LogProb out;
  out.value = d.g;
  out.grad.resize(2);
  out.grad << -d.g1, d.g1;
  out.hess.resize(2, 2);
  out.hess << d.g2, -d.g2, -d.g2, d.g2;
  return out;
}

DeltaDerivs probit_delta(double s, double delta, int a) {
  const double z = delta / s;
  if (a == 1) {
    const double r = inverse_mills(z);
    return {log_normal_cdf(z), r / s, -r * (z + r) / (s * s)};
  }
  const double r = inverse_mills(-z);
  return {log_normal_cdf(-z), -r / s, -r * (-z + r) / (s * s)};
}

DeltaDerivs au_delta(double al, double delta, int a) {
  const double w = -delta;
  const double lf = au_log_pdf(al, w);
  const double sc = au_score(al, w);
  if (a == 1) {
    const double ls = au_log_sf(al, w);
    const double ratio = std::exp(lf - ls);
    return {ls, ratio, -sc * ratio - ratio * ratio};
  }
  const double lc = au_log_cdf(al, w);
  const double ratio = std::exp(lf - lc);
  return {lc, -ratio, sc * ratio - ratio * ratio};
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z - kLogSqrt2Pi); }

double log_normal_cdf(double z) {
  if (z > kTailSwitch) return std::log(0.5 * std::erfc(-z / kSqrt2));
  // asymptotic series of the Mills ratio
  const double w = 1.0 / (z * z);
  const double series = 1.0 - w * (1.0 - 3.0 * w * (1.0 - 5.0 * w * (1.0 - 7.0 * w * (1.0 - 9.0 * w))));
  return -0.5 * z * z - std::log(-z) - kLogSqrt2Pi + std::log(series);
}

double inverse_mills(double z) {
  if (z > kTailSwitch) return normal_pdf(z) / normal_cdf(z);
  return std::exp(-0.5 * z * z - kLogSqrt2Pi - log_normal_cdf(z));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw NumericalError("normal quantile outside (0,1)");
  return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
}

ShockSpec::ShockSpec(Family f) : family_(f) {
  std::visit(overloaded{
                 [](const Logit& l) {
                   if (!(l.scale > 0.0 && std::isfinite(l.scale))) throw DimensionError("logit scale must be positive");
                 },
                 [](const BinaryProbit& p) {
                   if (!(p.variance > 0.0 && std::isfinite(p.variance)))
                     throw DimensionError("probit variance must be positive");
                 },
                 [](const ApproxUniform& u) {
                   if (!(u.alpha > 0.0 && u.alpha < 0.5)) throw DimensionError("approx-uniform alpha must lie in (0, 0.5)");
                 }},
             family_);
}

std::string ShockSpec::name() const {
  return std::visit(overloaded{[](const Logit&) { return std::string("logit"); },
                               [](const BinaryProbit&) { return std::string("probit"); },
                               [](const ApproxUniform&) { return std::string("approx_uniform"); }},
                    family_);
}

void ShockSpec::check_actions(int num_actions) const {
  if (num_actions < 2) throw DimensionError("games need at least 2 actions");
  if (binary_only() && num_actions != 2) throw DimensionError(name() + " shocks require exactly 2 actions");
}

double ShockSpec::surplus(std::span<const double> v) const {
  check_finite(v);
  return std::visit(overloaded{
                        [&](const Logit& l) {
                          double m = v[0];
                          for (double x : v) m = std::max(m, x);
                          double s = 0.0;
                          for (double x : v) s += std::exp((x - m) / l.scale);
                          return m + l.scale * (kEulerGamma + std::log(s));
                        },
                        [&](const BinaryProbit& p) {
                          const double s = std::sqrt(2.0 * p.variance);
                          const double d = v[1] - v[0];
                          return v[0] + d * normal_cdf(d / s) + s * normal_pdf(d / s);
                        },
                        [&](const ApproxUniform& u) { return v[0] + au_tail(u.alpha, -(v[1] - v[0])); }},
                    family_);
}

void ShockSpec::choice_probs(std::span<const double> v, std::span<double> out) const {
  check_finite(v);
  std::visit(overloaded{[&](const Logit& l) {
                          double m = v[0];
                          for (double x : v) m = std::max(m, x);
                          double s = 0.0;
                          for (size_t a = 0; a < v.size(); ++a) s += (out[a] = std::exp((v[a] - m) / l.scale));
                          for (size_t a = 0; a < v.size(); ++a) out[a] /= s;
                        },
                        [&](const BinaryProbit& p) {
                          const double z = (v[1] - v[0]) / std::sqrt(2.0 * p.variance);
                          out[1] = normal_cdf(z);
                          out[0] = normal_cdf(-z);
                        },
                        [&](const ApproxUniform& u) {
                          const double w = -(v[1] - v[0]);
                          out[0] = au_cdf(u.alpha, w);
                          out[1] = std::exp(au_log_sf(u.alpha, w));
                        }},
             family_);
}

void ShockSpec::choice_prob_jacobian(std::span<const double> v, Eigen::Ref<Mat> out) const {
  const auto A = static_cast<Eigen::Index>(v.size());
  if (std::holds_alternative<Logit>(family_)) {
    const double sc = std::get<Logit>(family_).scale;
    Vec p(A);
    choice_probs(v, std::span<double>(p.data(), A));
    out = -(p * p.transpose()) / sc;
    out.diagonal() += p / sc;
    return;
  }
  check_finite(v);
  const double d = v[1] - v[0];
  double dens = 0.0;
  if (auto* p = std::get_if<BinaryProbit>(&family_)) {
    const double s = std::sqrt(2.0 * p->variance);
    dens = normal_pdf(d / s) / s;
  } else {
    const double al = std::get<ApproxUniform>(family_).alpha;
    dens = std::exp(au_log_pdf(al, -d));
  }
  // Lambda_0 rises in v0 and falls in v1
  out(0, 0) = dens;
  out(0, 1) = -dens;
  out(1, 0) = -dens;
  out(1, 1) = dens;
}

void ShockSpec::expected_shock(std::span<const double> P, std::span<double> out) const {
  check_interior(P);
  std::visit(overloaded{[&](const Logit& l) {
                          for (size_t a = 0; a < P.size(); ++a) out[a] = l.scale * (kEulerGamma - std::log(P[a]));
                        },
                        [&](const BinaryProbit& p) {
                          const double s = std::sqrt(2.0 * p.variance);
                          const double z = normal_quantile(P[1]);
                          const double ph = normal_pdf(z);
                          out[1] = 0.5 * s * ph / P[1];
                          out[0] = 0.5 * s * ph / P[0];
                        },
                        [&](const ApproxUniform& u) {
                          const double w = au_quantile(u.alpha, P[0]);
                          out[0] = 0.0;
                          out[1] = au_tail(u.alpha, w) / P[1] + w;
                        }},
             family_);
}

void ShockSpec::invert(std::span<const double> P, std::span<double> out) const {
  check_interior(P);
  std::visit(overloaded{[&](const Logit& l) {
                          for (size_t a = 0; a < P.size(); ++a) out[a] = l.scale * (std::log(P[a]) - std::log(P[0]));
                        },
                        [&](const BinaryProbit& p) {
                          out[0] = 0.0;
                          out[1] = std::sqrt(2.0 * p.variance) * normal_quantile(P[1]);
                        },
                        [&](const ApproxUniform& u) {
                          out[0] = 0.0;
                          out[1] = -au_quantile(u.alpha, P[0]);
                        }},
             family_);
}

LogProb ShockSpec::log_prob(std::span<const double> v, int a) const {
  check_finite(v);
  if (auto* l = std::get_if<Logit>(&family_)) {
    const auto A = static_cast<Eigen::Index>(v.size());
    Vec p(A);
    choice_probs(v, std::span<double>(p.data(), A));
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    double s = 0.0;
    for (double x : v) s += std::exp((x - m) / l->scale);
    LogProb out;
    out.value = (v[a] - m) / l->scale - std::log(s);
    out.grad = -p / l->scale;
    out.grad[a] += 1.0 / l->scale;
    out.hess = (p * p.transpose()) / (l->scale * l->scale);
    out.hess.diagonal() -= p / (l->scale * l->scale);
    return out;
  }
  const double d = v[1] - v[0];
  if (auto* p = std::get_if<BinaryProbit>(&family_)) return from_delta(probit_delta(std::sqrt(2.0 * p->variance), d, a));
  return from_delta(au_delta(std::get<ApproxUniform>(family_).alpha, d, a));
}

double ShockSpec::log_prob_value(std::span<const double> v, int a) const {
  if (auto* l = std::get_if<Logit>(&family_)) {
    check_finite(v);
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    double s = 0.0;
    for (double x : v) s += std::exp((x - m) / l->scale);
    return (v[a] - m) / l->scale - std::log(s);
  }
  check_finite(v);
  const double d = v[1] - v[0];
  if (auto* p = std::get_if<BinaryProbit>(&family_)) {
    const double z = d / std::sqrt(2.0 * p->variance);
    return log_normal_cdf(a == 1 ? z : -z);
  }
  const double al = std::get<ApproxUniform>(family_).alpha;
  return a == 1 ? au_log_sf(al, -d) : au_log_cdf(al, -d);
}

Vec ShockSpec::choice_probs(const Vec& v) const {
  Vec out(v.size());
  choice_probs(std::span<const double>(v.data(), v.size()), std::span<double>(out.data(), out.size()));
  return out;
}

Mat ShockSpec::choice_prob_jacobian(const Vec& v) const {
  Mat out(v.size(), v.size());
  choice_prob_jacobian(std::span<const double>(v.data(), v.size()), out);
  return out;
}

Vec ShockSpec::expected_shock(const Vec& P) const {
  Vec out(P.size());
  expected_shock(std::span<const double>(P.data(), P.size()), std::span<double>(out.data(), out.size()));
  return out;
}

}  // namespace epl
