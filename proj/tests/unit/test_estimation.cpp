#include <gtest/gtest.h>

#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "epl/concave.hpp"
#include "epl/error.hpp"
#include "epl/estimation.hpp"
#include "epl/presets.hpp"
#include "epl/simulate.hpp"
#include "epl/static_game.hpp"
#include "fixtures.hpp"

using namespace epl;
using test::sup;

namespace {

const Preset& psd_i() {
  static const Preset p = preset_psd2008("i", 200);
  return p;
}

// hand-coded renewal primitives, independent of GameSpec accessors
struct Renewal {
  double beta = 0.9, wear = 0.6;
  // f(x' | x, a)
  Mat f(int a) const {
    Mat m = Mat::Zero(2, 2);
    if (a == 1) {
      m(0, 0) = m(1, 0) = 1.0;
    } else {
      m(0, 0) = 1 - wear;
      m(0, 1) = wear;
      m(1, 1) = 1.0;
    }
    return m;
  }
  // u(x, a) as a row of coefficients on (cost, rc)
  Eigen::RowVector2d u(int x, int a) const { return a == 1 ? Eigen::RowVector2d(0, -1) : Eigen::RowVector2d(-x, 0); }
};

// textbook two-step CCP logit: v~ = M theta + m from Hotz-Miller inversion, then Newton on the logit likelihood
ThetaVec ccp_logit_oracle(const Renewal& R, const Mat& P, const Mat& n) {
  Mat F = P.col(0).asDiagonal() * R.f(0) + P.col(1).asDiagonal() * R.f(1);
  Mat rhsM = Mat::Zero(2, 2);
  Vec rhsm = Vec::Zero(2);
  for (int x = 0; x < 2; ++x)
    for (int a = 0; a < 2; ++a) {
      rhsM.row(x) += P(x, a) * R.u(x, a);
      rhsm[x] += P(x, a) * (kEulerGamma - std::log(P(x, a)));
    }
  const Mat inv = (Mat::Identity(2, 2) - R.beta * F).inverse();
  const Mat GM = inv * rhsM;
  const Vec Gm = inv * rhsm;
  // rows (x, a)
  Mat M(4, 2);
  Vec m(4);
  for (int x = 0; x < 2; ++x)
    for (int a = 0; a < 2; ++a) {
      M.row(x * 2 + a) = R.u(x, a) + R.beta * R.f(a).row(x) * GM;
      m[x * 2 + a] = R.beta * R.f(a).row(x).dot(Gm);
    }
  ThetaVec th = ThetaVec::Zero(2);
  for (int it = 0; it < 100; ++it) {
    Vec g = Vec::Zero(2);
    Mat H = Mat::Zero(2, 2);
    for (int x = 0; x < 2; ++x) {
      const double d = (M.row(x * 2 + 1) - M.row(x * 2)).dot(th) + m[x * 2 + 1] - m[x * 2];
      const double p1 = 1 / (1 + std::exp(-d));
      const Eigen::RowVector2d z = M.row(x * 2 + 1) - M.row(x * 2);
      const double tot = n(x, 0) + n(x, 1);
      g += (n(x, 1) - tot * p1) * z.transpose();
      H -= tot * p1 * (1 - p1) * z.transpose() * z;
    }
    const Vec step = H.ldlt().solve(-g);
    th += step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-14) break;
  }
  return th;
}

// full-solution likelihood with value iteration inside
double nfxp_loglik(const Renewal& R, const double* th, const Mat& n) {
  Mat v = Mat::Zero(2, 2);
  for (int it = 0; it < 2000; ++it) {
    Mat nv(2, 2);
    Vec S(2);
    for (int x = 0; x < 2; ++x) {
      const double mx = v.row(x).maxCoeff();
      S[x] = kEulerGamma + mx + std::log((v.row(x).array() - mx).exp().sum());
    }
    for (int x = 0; x < 2; ++x)
      for (int a = 0; a < 2; ++a) nv(x, a) = R.u(x, a).dot(Eigen::Vector2d(th[0], th[1])) + R.beta * R.f(a).row(x).dot(S);
    const double d = (nv - v).cwiseAbs().maxCoeff();
    v = nv;
    if (d < 1e-14) break;
  }
  double ll = 0.0;
  for (int x = 0; x < 2; ++x) {
    const double mx = v.row(x).maxCoeff();
    const double lse = mx + std::log((v.row(x).array() - mx).exp().sum());
    for (int a = 0; a < 2; ++a) ll += n(x, a) * (v(x, a) - lse);
  }
  return ll;
}

struct NfxpCtx {
  Renewal R;
  Mat n;
};

double nfxp_objective(const gsl_vector* x, void* p) {
  const auto* c = static_cast<NfxpCtx*>(p);
  const double th[2] = {gsl_vector_get(x, 0), gsl_vector_get(x, 1)};
  return -nfxp_loglik(c->R, th, c->n);
}

ThetaVec nfxp_oracle(const Renewal& R, const Mat& n, ThetaVec start) {
  NfxpCtx ctx{R, n};
  gsl_multimin_function fn{&nfxp_objective, 2, &ctx};
  gsl_vector* x = gsl_vector_alloc(2);
  gsl_vector* step = gsl_vector_alloc(2);
  gsl_vector_set(x, 0, start[0]);
  gsl_vector_set(x, 1, start[1]);
  gsl_vector_set_all(step, 0.1);
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2);
  gsl_multimin_fminimizer_set(s, &fn, x, step);
  for (int it = 0; it < 5000; ++it) {
    gsl_multimin_fminimizer_iterate(s);
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-10) == GSL_SUCCESS) break;
  }
  ThetaVec out(2);
  out << gsl_vector_get(s->x, 0), gsl_vector_get(s->x, 1);
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(x);
  gsl_vector_free(step);
  return out;
}

Mat renewal_counts(const Dataset& d) {
  Mat n = Mat::Zero(2, 2);
  for (size_t i = 0; i < d.size(); ++i) n(d.state[i], d.action(i, 0)) += 1;
  return n;
}

Dataset renewal_data(int N, std::uint64_t seed) {
  const GameSpec g = test::renewal_game();
  const EquilibriumRecord e = solve_equilibrium_newton(g, test::renewal_theta(), ValueProfile(1, 2, 2));
  return simulate_dataset(g, e, N, 1, seed);
}

// Upsilon(theta; gamma) from the primitives, without the EPL system code
Vec upsilon_direct(const GameSpec& g, const ThetaVec& th, const CompoundParam& gamma) {
  const Mat J = Mat(g_jacobian_v(g, gamma.theta, gamma.v()));
  return gamma.v().flat() - J.partialPivLu().solve(g_residual(g, th, gamma.v()));
}

}  // namespace

TEST(FrequencyCcp, ConvergesToEquilibrium) {
  const Preset& p = psd_i();
  const Dataset d = simulate_dataset(p.game, p.equilibrium, 1'000'000, 1, 3);
  EXPECT_LE(sup(frequency_ccp(p.game, d).flat() - p.equilibrium.p_star.flat()), 0.01);
}

TEST(NplPseudoMle, MatchesCcpLogitOracleOnSingleAgent) {
  const GameSpec g = test::renewal_game();
  const Dataset d = renewal_data(5000, 1);
  const CcpProfile P = frequency_ccp(g, d);
  const NplStep s = npl_pseudo_mle(g, d, P);
  Mat Pm(2, 2);
  for (int x = 0; x < 2; ++x)
    for (int a = 0; a < 2; ++a) Pm(x, a) = P(0, x, a);
  const ThetaVec want = ccp_logit_oracle(Renewal{}, Pm, renewal_counts(d));
  EXPECT_LE(sup(s.theta - want), 1e-8);
  EXPECT_LE(sup(s.P.flat() - npl_operator(g, s.theta, P).flat()), 1e-12);
}

TEST(NplPseudoMle, ConsistentAtTrueProbabilities) {
  const Preset& p = psd_i();
  const Dataset d = simulate_dataset(p.game, p.equilibrium, 100'000, 1, 4);
  const NplStep s = npl_pseudo_mle(p.game, d, p.equilibrium.p_star);
  const Vec se = asymptotic_se(p.game, d, CompoundParam{s.theta, s.v});
  for (int k = 0; k < 3; ++k) EXPECT_LE(std::abs(s.theta[k] - p.theta[k]), 3 * se[k]) << k;
}

TEST(NplPseudoMle, ObjectiveIsConcave) {
  const Preset& p = psd_i();
  const Dataset d = simulate_dataset(p.game, p.equilibrium, 1000, 1, 5);
  const Vec counts = cell_counts(p.game, d);
  const LinearValues lin = npl_values_linear(p.game, frequency_ccp(p.game, d));
  const PseudoLikelihood pl(p.game, lin, counts);
  for (unsigned s = 0; s < 10; ++s) {
    Vec grad;
    Mat hess;
    pl.evaluate(p.theta + test::random_theta(s, 3, 1.0), grad, hess);
    EXPECT_LE(Eigen::SelfAdjointEigenSolver<Mat>(hess).eigenvalues().maxCoeff(), 1e-10);
  }
}

TEST(KNpl, FirstStepEqualsPseudoMle) {
  const Preset& p = psd_i();
  const Dataset d = simulate_dataset(p.game, p.equilibrium, 1000, 1, 6);
  const CcpProfile P0 = frequency_ccp(p.game, d);
  const EstimationTrace tr = k_npl(p.game, d, P0, StopRule::fixed(1));
  ASSERT_EQ(tr.iterations(), 1);
  EXPECT_TRUE(tr.converged);
  EXPECT_LE(sup(tr.theta() - npl_pseudo_mle(p.game, d, P0).theta), 1e-12);
}

TEST(InitialGamma, ReproducesEquilibriumAtTruth) {
  const Preset& p = psd_i();
  const Vec counts = cell_counts(p.game, test::population_dataset(p.game, p.equilibrium.p_star, 1e6));
  // population first-order condition: theta-hat_0 close to theta*, v-hat_0 = v~(theta, P*)
  const NplStep s = npl_pseudo_mle(p.game, counts, p.equilibrium.p_star);
  EXPECT_LE(sup(s.theta - p.theta), 1e-3);
  EXPECT_LE(sup(npl_values(p.game, p.theta, p.equilibrium.p_star).flat() - p.equilibrium.v_star.flat()), 1e-10);
}

TEST(InitialGamma, StaticGameGivesBeliefWeightedUtility) {
  const GameSpec g = test::random_game(12, 2, 3, 2, 2, ShockSpec::logit(), 0.0);
  const ThetaVec th = test::random_theta(13, 2);
  const auto eqs = find_equilibria(g, th, 20, 1);
  ASSERT_FALSE(eqs.empty());
  const Dataset d = simulate_dataset(g, eqs.front(), 2000, 1, 2);
  const CcpProfile P = frequency_ccp(g, d);
  const CompoundParam g0 = initial_gamma(g, d, P);
  for (int j = 0; j < 2; ++j) {
    const Vec u = belief_weighted_utility_basis(g, j, P) * g0.theta + belief_weighted_utility_offset(g, j, P);
    EXPECT_LE(sup(g0.v().flat().segment(j * 6, 6) - u), 1e-12);
  }
}

TEST(InitialGamma, ErrorShrinksWithSampleSize) {
  const Preset& p = psd_i();
  double err[2];
  int i = 0;
  for (int N : {1000, 100'000}) {
    double acc = 0.0;
    for (int r = 0; r < 5; ++r) {
      const Dataset d = simulate_dataset(p.game, p.equilibrium, N, 1, 10, r);
      const CompoundParam g0 = initial_gamma(p.game, d, frequency_ccp(p.game, d));
      acc += (g0.v().flat() - p.equilibrium.v_star.flat()).norm();
    }
    err[i++] = acc;
  }
  EXPECT_LT(err[1], err[0]);
}

TEST(EplSystem, FixedPointAtEquilibrium) {
  const Preset& p = psd_i();
  const EplSystem sys = build_epl_system(p.game, CompoundParam{p.theta, p.equilibrium.v_star});
  EXPECT_LE(sup(sys.at(p.theta) - p.equilibrium.v_star.flat()), 1e-10);
  EXPECT_FALSE(sys.jittered);
  EXPECT_GT(sys.rcond, 1e-6);
}

TEST(EplSystem, MatchesNewtonFormulaAtProbes) {
  const GameSpec g = test::random_game(14, 2, 3, 3, 2, ShockSpec::logit());
  const CompoundParam gamma{test::random_theta(15, 2), test::random_values(g, 16)};
  const EplSystem sys = build_epl_system(g, gamma);
  for (unsigned s = 0; s < 5; ++s) {
    const ThetaVec th = test::random_theta(20 + s, 2, 2.0);
    EXPECT_LE(sup(sys.at(th) - upsilon_direct(g, th, gamma)), 1e-10);
  }
}

TEST(EplSystem, OneStateClosedForm) {
  // G(theta, v) = v - (theta e_0 + beta S(v) 1), J = I - beta 1 Lambda'
  const double beta = 0.8;
  const GameSpec g = test::one_state_game(beta);
  ValueProfile v(1, 1, 2);
  v.flat() << 0.4, -0.3;
  const CompoundParam gamma{ThetaVec::Constant(1, 0.7), v};
  const EplSystem sys = build_epl_system(g, gamma);
  const double e0 = std::exp(0.4), e1 = std::exp(-0.3);
  const double L0 = e0 / (e0 + e1), L1 = e1 / (e0 + e1);
  const double S = kEulerGamma + std::log(e0 + e1);
  const double a = 1 - beta * L0, b = -beta * L1, c = -beta * L0, d = 1 - beta * L1;
  const double det = a * d - b * c;
  // inverse of [[a, b], [c, d]]
  const double i00 = d / det, i01 = -b / det, i10 = -c / det, i11 = a / det;
  // H = -(1, 0)', z = v - beta S
  const double z0 = 0.4 - beta * S, z1 = -0.3 - beta * S;
  EXPECT_NEAR(sys.A(0, 0), i00, 1e-12);
  EXPECT_NEAR(sys.A(1, 0), i10, 1e-12);
  EXPECT_NEAR(sys.b[0], 0.4 - (i00 * z0 + i01 * z1), 1e-12);
  EXPECT_NEAR(sys.b[1], -0.3 - (i10 * z0 + i11 * z1), 1e-12);
}

TEST(EplPseudoMle, PopulationScoreVanishesAtTruth) {
  const Preset& p = psd_i();
  const EplSystem sys = build_epl_system(p.game, CompoundParam{p.theta, p.equilibrium.v_star});
  // exact expected counts
  const Vec pi = stationary_distribution(p.game, p.equilibrium.p_star);
  Vec counts(p.game.stacked_size());
  for (int j = 0; j < 2; ++j)
    for (int x = 0; x < 4; ++x)
      for (int a = 0; a < 2; ++a) counts[(j * 4 + x) * 2 + a] = 1e4 * pi[x] * p.equilibrium.p_star(j, x, a);
  const EplStep s = epl_pseudo_mle(p.game, counts, sys, ThetaVec::Zero(3));
  EXPECT_LE(sup(s.theta - p.theta), 1e-8);
}

TEST(EplPseudoMle, ObjectiveIsConcave) {
  const Preset& p = psd_i();
  const Dataset d = simulate_dataset(p.game, p.equilibrium, 1000, 1, 7);
  const CompoundParam g0 = initial_gamma(p.game, d, frequency_ccp(p.game, d));
  const EplSystem sys = build_epl_system(p.game, g0);
  const LinearValues lin = sys.as_linear();
  const Vec counts = cell_counts(p.game, d);
  const PseudoLikelihood pl(p.game, lin, counts);
  for (unsigned s = 0; s < 10; ++s) {
    Vec grad;
    Mat hess;
    pl.evaluate(p.theta + test::random_theta(30 + s, 3, 1.0), grad, hess);
    EXPECT_LE(Eigen::SelfAdjointEigenSolver<Mat>(hess).eigenvalues().maxCoeff(), 1e-10);
  }
}

TEST(KEpl, FrozenAndExactAgreeFromEquilibrium) {
  // start from the equilibrium at the data's maximum likelihood point, where G vanishes and both variants share a score
  const Preset& p = psd_i();
  const Dataset d = test::population_dataset(p.game, p.equilibrium.p_star, 1e5);
  const MultistartResult m = mle_multistart(p.game, d, 2, 3);
  const CompoundParam start{m.best.theta(), m.v_refined};
  const EstimationTrace frozen = k_epl(p.game, d, start, StopRule::fixed(1));
  const EstimationTrace exact = k_epl(p.game, d, start, StopRule::fixed(1), ExactNewton{});
  ASSERT_EQ(frozen.iterations(), 1);
  ASSERT_EQ(exact.iterations(), 1) << exact.failure;
  EXPECT_LE(sup(frozen.theta() - exact.theta()), 1e-8);
  EXPECT_LE(sup(frozen.theta() - m.best.theta()), 1e-8);
}

TEST(KEpl, GeneralizedZWithJacobianMatchesFrozen) {
  const Preset& p = psd_i();
  const Dataset d = simulate_dataset(p.game, p.equilibrium, 1000, 1, 8);
  const CompoundParam g0 = initial_gamma(p.game, d, frequency_ccp(p.game, d));
  const GeneralizedZ z{[](const GameSpec& g, const ThetaVec& th, const ValueProfile& v) { return Mat(g_jacobian_v(g, th, v)); }};
  const EstimationTrace a = k_epl(p.game, d, g0, StopRule::fixed(3));
  const EstimationTrace b = k_epl(p.game, d, g0, StopRule::fixed(3), z);
  for (int k = 0; k < 3; ++k) EXPECT_LE(sup(a.records[k].theta - b.records[k].theta), 1e-10);
}

TEST(KEpl, ZeroJacobianAtEquilibrium) {
  const GameSpec g = test::random_game(40, 2, 3, 2, 2, ShockSpec::logit());
  const ThetaVec th = test::random_theta(41, 2);
  const auto eqs = find_equilibria(g, th, 20, 3);
  ASSERT_FALSE(eqs.empty());
  const ValueProfile& vs = eqs.front().v_star;
  const CompoundParam gamma{th, vs};
  const Eigen::Index n = vs.size();
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index c = 0; c < 2 + n; ++c) {
    CompoundParam up = gamma, dn = gamma;
    if (c < 2) {
      up.theta[c] += h;
      dn.theta[c] -= h;
    } else {
      std::get<ValueProfile>(up.aux).flat()[c - 2] += h;
      std::get<ValueProfile>(dn.aux).flat()[c - 2] -= h;
    }
    const Vec d = (build_epl_system(g, up).at(th) - build_epl_system(g, dn).at(th)) / (2 * h);
    worst = std::max(worst, sup(d));
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(KEpl, ThetaDerivativeMatchesImplicitFunction) {
  const Preset& p = psd_i();
  const CompoundParam gamma{p.theta, p.equilibrium.v_star};
  const EplSystem sys = build_epl_system(p.game, gamma);
  const Mat J = Mat(g_jacobian_v(p.game, p.theta, p.equilibrium.v_star));
  const Mat implicit = -J.partialPivLu().solve(g_decompose(p.game, p.equilibrium.v_star).H);
  for (int k = 0; k < 3; ++k) {
    ThetaVec up = p.theta, dn = p.theta;
    up[k] += 1e-5;
    dn[k] -= 1e-5;
    const Vec fd = (sys.at(up) - sys.at(dn)) / 2e-5;
    for (Eigen::Index r = 0; r < fd.size(); ++r)
      EXPECT_NEAR(fd[r], implicit(r, k), 1e-5 * std::max(1.0, std::abs(implicit(r, k))));
  }
}

TEST(SingleAgentEpl, TraceIdenticalToNpl) {
  const GameSpec g = test::renewal_game();
  const Dataset d = renewal_data(2000, 9);
  const CcpProfile P0 = frequency_ccp(g, d);
  const EstimationTrace a = k_npl(g, d, P0, StopRule::fixed(10));
  const EstimationTrace b = single_agent_epl(g, d, P0, StopRule::fixed(10));
  ASSERT_EQ(a.iterations(), 10);
  ASSERT_EQ(b.iterations(), 10);
  for (int k = 0; k < 10; ++k) {
    EXPECT_LE(sup(a.records[k].theta - b.records[k].theta), 1e-12);
    EXPECT_LE(sup(a.records[k].aux - b.records[k].aux), 1e-12);
  }
  EXPECT_LE(sup(b.records[0].theta - npl_pseudo_mle(g, d, P0).theta), 1e-12);
  EXPECT_THROW(single_agent_epl(psd2008_game(), d, uniform_ccp(psd2008_game())), DimensionError);
}

TEST(SingleAgentEpl, ConvergesToNestedFixedPointMle) {
  const GameSpec g = test::renewal_game();
  const Dataset d = renewal_data(3000, 11);
  const EstimationTrace tr = single_agent_epl(g, d, frequency_ccp(g, d), StopRule::to_convergence(1e-12, 200));
  ASSERT_TRUE(tr.converged);
  const ThetaVec oracle = nfxp_oracle(Renewal{}, renewal_counts(d), ThetaVec::Ones(2));
  EXPECT_LE(sup(tr.theta() - oracle), 1e-6);
}

TEST(MleMultistart, DeterministicGivenSeed) {
  const Preset& p = psd_i();
  const Dataset d = simulate_dataset(p.game, p.equilibrium, 1000, 1, 12);
  const auto a = mle_multistart(p.game, d, 3, 99);
  const auto b = mle_multistart(p.game, d, 3, 99);
  EXPECT_EQ(a.best_index, b.best_index);
  EXPECT_EQ(a.best.theta(), b.best.theta());
  EXPECT_EQ(a.refined_loglik.size(), 3u);
}

TEST(MleMultistart, StaticGameMatchesGridSearch) {
  const StaticGame sg;
  const GameSpec g = sg.game();
  const auto eqs = find_equilibria(g, ThetaVec::Constant(1, -2.0), 50, 1);
  const auto sym = std::find_if(eqs.begin(), eqs.end(), [](const auto& e) { return e.symmetric; });
  ASSERT_NE(sym, eqs.end());
  const Dataset d = simulate_dataset(g, *sym, 5000, 1, 13);
  StaticSample s;
  s.n = static_cast<int>(d.size());
  for (size_t i = 0; i < d.size(); ++i)
    for (int j = 0; j < 2; ++j) s.entries[j] += d.action(i, j);
  const StaticEstimate grid = static_mle(sg, s);
  const MultistartResult m = mle_multistart(g, d, 5, 7);
  EXPECT_NEAR(m.best.theta()[0], grid.theta, 1e-3);
}

TEST(MleMultistart, OneEplStepFromWinnerStaysPut) {
  const Preset& p = psd_i();
  const Dataset d = simulate_dataset(p.game, p.equilibrium, 1000, 1, 14);
  const MultistartResult m = mle_multistart(p.game, d, 3, 5);
  const EstimationTrace one = k_epl(p.game, d, CompoundParam{m.best.theta(), m.v_refined}, StopRule::fixed(1));
  EXPECT_LE(sup(one.theta() - m.best.theta()), 1e-8);
}

TEST(AsymptoticSe, ScalesWithSampleSize) {
  const Preset& p = psd_i();
  double se2[2] = {0, 0};
  int i = 0;
  for (int N : {1000, 2000}) {
    for (int r = 0; r < 10; ++r) {
      const Dataset d = simulate_dataset(p.game, p.equilibrium, N, 1, 15, r);
      const CompoundParam g0 = initial_gamma(p.game, d, frequency_ccp(p.game, d));
      const EstimationTrace tr = k_epl(p.game, d, g0, StopRule::to_convergence());
      const Vec se = asymptotic_se(p.game, d, CompoundParam{tr.theta(), ValueProfile(2, 4, 2, tr.last().aux)});
      se2[i] += se[1] * se[1];
    }
    ++i;
  }
  const double ratio = se2[1] / se2[0];
  EXPECT_GE(ratio, 0.4);
  EXPECT_LE(ratio, 0.6);
}

TEST(AsymptoticSe, ComparableToMonteCarloVariance) {
  const Preset& p = psd_i();
  std::vector<double> est, se2;
  for (int r = 0; r < 200; ++r) {
    const Dataset d = simulate_dataset(p.game, p.equilibrium, 1000, 1, 16, r);
    const CompoundParam g0 = initial_gamma(p.game, d, frequency_ccp(p.game, d));
    const EstimationTrace tr = k_epl(p.game, d, g0, StopRule::to_convergence());
    if (!tr.converged) continue;
    est.push_back(tr.theta()[1]);
    const Vec se = asymptotic_se(p.game, d, CompoundParam{tr.theta(), ValueProfile(2, 4, 2, tr.last().aux)});
    se2.push_back(se[1] * se[1]);
  }
  ASSERT_GT(est.size(), 180u);
  const double mean = std::accumulate(est.begin(), est.end(), 0.0) / est.size();
  double var = 0.0;
  for (double e : est) var += (e - mean) * (e - mean);
  var /= est.size() - 1;
  const double avg_se2 = std::accumulate(se2.begin(), se2.end(), 0.0) / se2.size();
  EXPECT_LE(avg_se2 / var, 1.5);
  EXPECT_GE(avg_se2 / var, 1 / 1.5);
}

TEST(AsymptoticSe, CollinearBasisIsSingular) {
  // two identical utility columns
  std::vector<double> basis = {0.0, 0.0, 1.0, 1.0};
  const GameSpec g(GameDims{1, 2, 1, 2}, 0.5, ShockSpec::logit(), basis, {}, {{0, 0, 0, 1.0}, {0, 1, 0, 1.0}});
  Dataset d;
  d.num_players = 1;
  for (int i = 0; i < 100; ++i) d.push(i, 0, 0, std::vector<int>{i % 3 == 0});
  ValueProfile v(1, 1, 2);
  EXPECT_THROW(asymptotic_se(g, d, CompoundParam{ThetaVec::Zero(2), v}), NumericalError);
}
