#pragma once

#include <span>
#include <string>
#include <variant>

#include "epl/types.hpp"

namespace epl {

inline constexpr double kEulerGamma = 0.57721566490153286061;

// i.i.d. type I extreme value with the given scale
struct Logit {
  double scale = 1.0;
};

// binary only: eps_0, eps_1 i.i.d. N(0, variance)
struct BinaryProbit {
  double variance = 0.5;
};

// binary only: eps_0 = 0 and eps_1 - eps_0 ~ F_alpha, uniform on [alpha, 1 - alpha)
// with exponential tails carrying mass alpha on each side
struct ApproxUniform {
  double alpha = 0.01;
};

// log Lambda_a and its gradient/Hessian with respect to the value row
struct LogProb {
  double value = 0.0;
  Vec grad;
  Mat hess;
};

class ShockSpec {
 public:
  using Family = std::variant<Logit, BinaryProbit, ApproxUniform>;

  ShockSpec() = default;
  explicit ShockSpec(Family f);

  static ShockSpec logit(double scale = 1.0) { return ShockSpec(Logit{scale}); }
  static ShockSpec probit(double variance = 0.5) { return ShockSpec(BinaryProbit{variance}); }
  static ShockSpec approx_uniform(double alpha = 0.01) { return ShockSpec(ApproxUniform{alpha}); }

  const Family& family() const { return family_; }
  std::string name() const;
  bool binary_only() const { return !std::holds_alternative<Logit>(family_); }
  // throws unless the family supports this many actions
  void check_actions(int num_actions) const;

  // S(v), expected maximum of v_a + eps_a
  double surplus(std::span<const double> v) const;
  // Lambda(v) = dS/dv
  void choice_probs(std::span<const double> v, std::span<double> out) const;
  // row a, column b: dLambda_a / dv_b
  void choice_prob_jacobian(std::span<const double> v, Eigen::Ref<Mat> out) const;
  // e(a; P) = E[eps_a | a chosen] at the v that generates P
  void expected_shock(std::span<const double> P, std::span<double> out) const;
  // some v with Lambda(v) = P and v_0 = 0
  void invert(std::span<const double> P, std::span<double> out) const;
  // log Lambda_a(v) with derivatives, numerically safe deep in the tails
  LogProb log_prob(std::span<const double> v, int a) const;
  double log_prob_value(std::span<const double> v, int a) const;

  Vec choice_probs(const Vec& v) const;
  Mat choice_prob_jacobian(const Vec& v) const;
  Vec expected_shock(const Vec& P) const;
  double surplus(const Vec& v) const { return surplus(std::span<const double>(v.data(), v.size())); }

 private:
  Family family_ = Logit{};
};

// standard normal helpers shared with tests
double normal_cdf(double z);
double normal_pdf(double z);
double log_normal_cdf(double z);
// phi(z) / Phi(z), stable for very negative z
double inverse_mills(double z);
double normal_quantile(double p);

}  // namespace epl
