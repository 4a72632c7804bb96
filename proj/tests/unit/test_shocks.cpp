#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "epl/error.hpp"
#include "epl/shocks.hpp"
#include "fixtures.hpp"

using namespace epl;

namespace {

const ShockSpec kFamilies[] = {ShockSpec::logit(1.0), ShockSpec::logit(0.7), ShockSpec::probit(0.5),
                               ShockSpec::probit(1.3), ShockSpec::approx_uniform(0.01)};

int width(const ShockSpec& s) { return s.binary_only() ? 2 : 3; }

Vec random_row(std::mt19937_64& g, int n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = u(g);
  return v;
}

// draws from F_alpha by inverting its cdf
double draw_approx_uniform(double a, double p) {
  if (p < a) return a + a * std::log(p / a);
  if (p < 1.0 - a) return p;
  return (1.0 - a) - a * std::log((1.0 - p) / a);
}

}  // namespace

TEST(Surplus, LogitAtZeroIncludesEulerConstant) {
  // E max(eps_0, eps_1) for standard Gumbel shocks
  EXPECT_NEAR(ShockSpec::logit(1.0).surplus(Vec::Zero(2)), kEulerGamma + std::log(2.0), 1e-15);
}

TEST(Surplus, ProbitSymmetricCase) {
  // s = sqrt(2 * 0.5) = 1, S = phi(0)
  EXPECT_NEAR(ShockSpec::probit(0.5).surplus(Vec::Zero(2)), 0.3989422804014327, 1e-15);
}

TEST(Surplus, LogitMatchesGumbelSimulation) {
  std::mt19937_64 g(7);
  std::extreme_value_distribution<double> gumbel(0.0, 1.0);
  const double v[3] = {5.0, 0.0, 0.0};
  const int n = 10'000'000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double m = -1e300;
    for (double vi : v) m = std::max(m, vi + gumbel(g));
    acc += m;
  }
  Vec row(3);
  row << 5.0, 0.0, 0.0;
  EXPECT_NEAR(ShockSpec::logit(1.0).surplus(row), acc / n, 1e-3);
}

TEST(Surplus, ApproxUniformMatchesSimulation) {
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double a = 0.05;
  const ShockSpec s = ShockSpec::approx_uniform(a);
  Vec row(2);
  row << 0.1, -0.25;
  const int n = 10'000'000;
  double acc = 0.0, e1 = 0.0;
  int chose1 = 0;
  for (int i = 0; i < n; ++i) {
    const double w = draw_approx_uniform(a, u(g));
    const double alt = row[1] + w;
    acc += std::max(row[0], alt);
    if (alt > row[0]) {
      ++chose1;
      e1 += w;
    }
  }
  EXPECT_NEAR(s.surplus(row), acc / n, 1e-3);
  const Vec P = s.choice_probs(row);
  EXPECT_NEAR(P[1], static_cast<double>(chose1) / n, 1e-3);
  const Vec e = s.expected_shock(P);
  EXPECT_NEAR(e[1], e1 / chose1, 1e-3);
  EXPECT_EQ(e[0], 0.0);
}

TEST(Surplus, TranslationShiftsByConstant) {
  std::mt19937_64 g(3);
  for (const auto& s : kFamilies)
    for (int i = 0; i < 50; ++i) {
      const Vec v = random_row(g, width(s), 0.4);
      const double c = std::uniform_real_distribution<double>(-3, 3)(g);
      EXPECT_NEAR(s.surplus((v.array() + c).matrix()), s.surplus(v) + c, 1e-12) << s.name();
    }
}

TEST(Surplus, GradientEqualsChoiceProbabilities) {
  std::mt19937_64 g(5);
  for (const auto& s : kFamilies)
    for (int i = 0; i < 100; ++i) {
      const Vec v = random_row(g, width(s), s.name() == "approx_uniform" ? 0.3 : 3.0);
      const Vec P = s.choice_probs(v);
      for (int a = 0; a < v.size(); ++a) {
        const double h = 1e-5;
        Vec up = v, dn = v;
        up[a] += h;
        dn[a] -= h;
        const double fd = (s.surplus(up) - s.surplus(dn)) / (2 * h);
        EXPECT_NEAR(fd, P[a], 1e-6 * std::max(1.0, std::abs(P[a]))) << s.name() << " a=" << a;
      }
    }
}

TEST(ChoiceProbs, HalfAtZero) {
  for (const auto& s : {ShockSpec::logit(1.0), ShockSpec::probit(0.5)}) {
    const Vec P = s.choice_probs(Vec::Zero(2));
    EXPECT_NEAR(P[0], 0.5, 1e-15);
    EXPECT_NEAR(P[1], 0.5, 1e-15);
  }
}

TEST(ChoiceProbs, LogitTranslationInvariant) {
  Vec v(3);
  v << 0.2, -1.0, 2.5;
  const ShockSpec s = ShockSpec::logit(1.0);
  EXPECT_LE(test::sup(s.choice_probs(v) - s.choice_probs((v.array() + 7.5).matrix())), 1e-15);
}

TEST(ChoiceProbs, ProbitMatchesNormalCdfAndSimulation) {
  Vec v(2);
  v << 0.0, 1.0;
  const Vec P = ShockSpec::probit(0.5).choice_probs(v);
  EXPECT_NEAR(P[1], 0.8413447460685429, 1e-14);
  std::mt19937_64 g(13);
  std::normal_distribution<double> eps(0.0, std::sqrt(0.5));
  const int n = 10'000'000;
  int c = 0;
  for (int i = 0; i < n; ++i) c += (v[1] + eps(g) > v[0] + eps(g));
  EXPECT_NEAR(P[1], static_cast<double>(c) / n, 1e-3);
}

TEST(ChoiceProbs, PositiveAndNormalizedOnBoundedValues) {
  std::mt19937_64 g(17);
  for (const auto& s : {ShockSpec::logit(1.0), ShockSpec::probit(0.5)})
    for (int i = 0; i < 200; ++i) {
      const Vec v = random_row(g, width(s), 10.0);
      const Vec P = s.choice_probs(v);
      EXPECT_GT(P.minCoeff(), 0.0);
      EXPECT_NEAR(P.sum(), 1.0, 1e-12);
    }
}

TEST(ChoiceProbJacobian, LogitAtZero) {
  const Mat J = ShockSpec::logit(1.0).choice_prob_jacobian(Vec::Zero(2));
  EXPECT_NEAR(J(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(J(0, 1), -0.25, 1e-15);
  EXPECT_NEAR(J(1, 0), -0.25, 1e-15);
  EXPECT_NEAR(J(1, 1), 0.25, 1e-15);
}

TEST(ChoiceProbJacobian, MatchesFiniteDifferencesAndRowsSumToZero) {
  Vec v(2);
  v << 0.3, -1.2;
  for (const auto& s : kFamilies) {
    const Vec w = s.name() == "approx_uniform" ? Vec((v * 0.2).eval()) : v;
    const Mat J = s.choice_prob_jacobian(w);
    for (int b = 0; b < 2; ++b) {
      const double h = 1e-6;
      Vec up = w, dn = w;
      up[b] += h;
      dn[b] -= h;
      const Vec fd = (s.choice_probs(up) - s.choice_probs(dn)) / (2 * h);
      for (int a = 0; a < 2; ++a) EXPECT_NEAR(J(a, b), fd[a], 1e-6 * std::max(1.0, std::abs(fd[a]))) << s.name();
    }
    // columns of dLambda/dv sum to zero across actions, rows too by translation invariance
    EXPECT_NEAR(J.row(0).sum(), 0.0, 1e-14);
    EXPECT_NEAR(J.col(0).sum(), 0.0, 1e-14);
  }
}

TEST(ExpectedShock, LogitUniform) {
  Vec P(2);
  P << 0.5, 0.5;
  const Vec e = ShockSpec::logit(1.0).expected_shock(P);
  EXPECT_NEAR(e[0], kEulerGamma + std::log(2.0), 1e-15);
  EXPECT_NEAR(e[1], kEulerGamma + std::log(2.0), 1e-15);
}

TEST(ExpectedShock, SurplusIdentityAtGivenValues) {
  Vec v(2);
  v << 0.7, -0.2;
  for (const auto& s : kFamilies) {
    const Vec w = s.name() == "approx_uniform" ? Vec((v * 0.3).eval()) : v;
    const Vec P = s.choice_probs(w);
    const Vec e = s.expected_shock(P);
    EXPECT_NEAR(P.dot(w + e), s.surplus(w), 1e-10) << s.name();
  }
}

TEST(ExpectedShock, SurplusIdentityAtRandomInteriorProbabilities) {
  std::mt19937_64 g(19);
  std::uniform_real_distribution<double> u(0.02, 0.98);
  for (const auto& s : kFamilies)
    for (int i = 0; i < 100; ++i) {
      Vec P(width(s));
      for (int a = 0; a < P.size(); ++a) P[a] = u(g);
      P /= P.sum();
      Vec v(P.size());
      s.invert(std::span<const double>(P.data(), P.size()), std::span<double>(v.data(), v.size()));
      EXPECT_LE(test::sup(s.choice_probs(v) - P), 1e-12) << s.name();
      EXPECT_NEAR(P.dot(v + s.expected_shock(P)), s.surplus(v), 1e-10) << s.name();
    }
}

TEST(ExpectedShock, ProbitMatchesSimulation) {
  const ShockSpec s = ShockSpec::probit(0.5);
  Vec P(2);
  P << 0.3, 0.7;
  Vec v(2);
  s.invert(std::span<const double>(P.data(), 2), std::span<double>(v.data(), 2));
  const Vec e = s.expected_shock(P);
  std::mt19937_64 g(23);
  std::normal_distribution<double> eps(0.0, std::sqrt(0.5));
  const int n = 10'000'000;
  double sum[2] = {0, 0};
  int cnt[2] = {0, 0};
  for (int i = 0; i < n; ++i) {
    const double e0 = eps(g), e1 = eps(g);
    const int a = v[1] + e1 > v[0] + e0;
    sum[a] += a ? e1 : e0;
    ++cnt[a];
  }
  EXPECT_NEAR(e[0], sum[0] / cnt[0], 1e-3);
  EXPECT_NEAR(e[1], sum[1] / cnt[1], 1e-3);
}

TEST(ExpectedShock, BoundaryProbabilitiesRejected) {
  Vec P(2);
  P << 0.0, 1.0;
  for (const auto& s : kFamilies) EXPECT_THROW(s.expected_shock(P), Error) << s.name();
}

TEST(LogProb, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 g(29);
  for (const auto& s : kFamilies)
    for (int i = 0; i < 20; ++i) {
      const Vec v = random_row(g, width(s), s.name() == "approx_uniform" ? 0.3 : 3.0);
      for (int a = 0; a < v.size(); ++a) {
        const LogProb lp = s.log_prob(std::span<const double>(v.data(), v.size()), a);
        EXPECT_NEAR(lp.value, std::log(s.choice_probs(v)[a]), 1e-12);
        for (int b = 0; b < v.size(); ++b) {
          const double h = 1e-5;
          Vec up = v, dn = v;
          up[b] += h;
          dn[b] -= h;
          const auto lu = s.log_prob(std::span<const double>(up.data(), up.size()), a);
          const auto ld = s.log_prob(std::span<const double>(dn.data(), dn.size()), a);
          EXPECT_NEAR(lp.grad[b], (lu.value - ld.value) / (2 * h), 1e-6 * std::max(1.0, std::abs(lp.grad[b])));
          for (int c = 0; c < v.size(); ++c)
            EXPECT_NEAR(lp.hess(b, c), (lu.grad[c] - ld.grad[c]) / (2 * h), 1e-5 * std::max(1.0, std::abs(lp.hess(b, c))));
        }
      }
    }
}

TEST(LogProb, ProbitFarTailStaysFinite) {
  Vec v(2);
  v << 0.0, -60.0;
  const LogProb lp = ShockSpec::probit(0.5).log_prob(std::span<const double>(v.data(), 2), 1);
  EXPECT_TRUE(std::isfinite(lp.value));
  EXPECT_LT(lp.value, -1000.0);
  EXPECT_TRUE(lp.grad.allFinite());
}

TEST(ShockSpec, InvalidParametersRejected) {
  EXPECT_THROW(ShockSpec::logit(0.0), Error);
  EXPECT_THROW(ShockSpec::probit(-1.0), Error);
  EXPECT_THROW(ShockSpec::approx_uniform(0.6), Error);
  EXPECT_THROW(ShockSpec::probit(0.5).check_actions(3), Error);
  Vec v(2);
  v << 0.0, std::nan("");
  EXPECT_THROW(ShockSpec::logit().surplus(v), Error);
}

TEST(NormalHelpers, QuantileInvertsCdf) {
  for (double p : {1e-12, 1e-4, 0.3, 0.5, 0.9, 1 - 1e-9}) EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-13 + 1e-10 * p);
  // reference value from 30-digit arithmetic
  EXPECT_NEAR(log_normal_cdf(-40.0), -804.608442013753788, 1e-9);
}
