#include <gtest/gtest.h>

#include <cmath>

#include "deltalab/baselines.hpp"
#include "deltalab/error.hpp"

using namespace deltalab;

namespace {

std::string error_name(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.name();
  }
  return "";
}

GameSpec bimatrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  GameSpec g;
  g.id = "bm";
  g.family = Family::GeneratedBimatrix;
  g.row_payoffs = a;
  g.col_payoffs = b;
  g.action_spaces = {DiscreteSet{{"r0", "r1"}}, DiscreteSet{{"c0", "c1"}}};
  return g;
}

double weight_of(const Baseline& b, const std::string& label) {
  for (std::size_t i = 0; i < b.support.size(); ++i)
    if (std::get<std::string>(b.support[i]) == label) return b.weights[i];
  return 0.0;
}

// Grid search over bids maximizing (v - b)^rho * P(win) against n-1 rivals
// bidding the symmetric CRRA equilibrium b(v) = v (n-1)/(n-1+rho), values U[0, hi].
double grid_best_bid(double v, int n, double rho, double hi) {
  const double slope = (n - 1.0) / (n - 1.0 + rho);
  double best = 0, best_val = -1;
  for (int i = 0; i <= 10000; ++i) {
    const double b = v * i / 10000.0;
    const double win = std::pow(std::min(1.0, b / (slope * hi)), n - 1);
    const double val = std::pow(v - b, rho) * win;
    if (val > best_val) {
      best_val = val;
      best = b;
    }
  }
  return best;
}

}  // namespace

TEST(ClosedForm, BargainingGames) {
  const auto ug = make_game(Family::Ultimatum, {{"pot", 100}, {"unit", 1}});
  EXPECT_EQ(closed_form_baseline(ug, 0).point, 1.0);
  EXPECT_EQ(closed_form_baseline(ug, 1).point, 0.0);  // accept any positive offer
  const auto dg = make_game(Family::Dictator, {{"pot", 100}});
  EXPECT_EQ(closed_form_baseline(dg, 0).point, 0.0);
  const auto tg = make_game(Family::Trust, {{"pot", 10}});
  EXPECT_EQ(closed_form_baseline(tg, 0).point, 0.0);
  EXPECT_EQ(closed_form_baseline(tg, 1).point, 0.0);
}

TEST(ClosedForm, DominantStrategies) {
  const auto pd = make_game(Family::PrisonersDilemma, {{"T", 5}, {"R", 3}, {"P", 1}, {"S", 0}});
  EXPECT_EQ(weight_of(closed_form_baseline(pd, 0), "defect"), 1.0);
  const auto pg = make_game(Family::PublicGoods, {{"endowment", 20}, {"mpcr", 0.4}, {"n", 4}});
  EXPECT_EQ(closed_form_baseline(pg, 2).point, 0.0);
  const auto sp = make_game(Family::SecondPriceAuction, {{"value", 73}});
  EXPECT_EQ(closed_form_baseline(sp, 0).point, 73.0);
  const auto pb = make_game(Family::PBeauty, {{"p", 2.0 / 3.0}});
  EXPECT_EQ(closed_form_baseline(pb, 0).point, 0.0);
}

TEST(ClosedForm, FirstPriceMatchesGridOracle) {
  const auto g = make_game(Family::FirstPriceAuction, {{"value", 80}, {"value_lo", 0}, {"value_hi", 100}});
  EXPECT_NEAR(closed_form_baseline(g, 0).point, 40.0, 1e-12);
  EXPECT_NEAR(closed_form_baseline(g, 0).point, grid_best_bid(80, 2, 1.0, 100), 1e-3 * 100);
}

TEST(ClosedForm, TullockMatchesBestResponseGrid) {
  const auto g = make_game(Family::TullockContest, {{"prize", 100}, {"r", 1}});
  const double x = closed_form_baseline(g, 0).point;
  EXPECT_DOUBLE_EQ(x, 25.0);
  double best = 0, best_val = -1e9;
  for (int i = 0; i <= 10000; ++i) {
    const double e = 100.0 * i / 10000.0;
    const double val = e + x > 0 ? 100.0 * e / (e + x) - e : 0;
    if (val > best_val) {
      best_val = val;
      best = e;
    }
  }
  EXPECT_NEAR(best, x, 1e-3 * 100);
  const auto three = make_game(Family::TullockContest, {{"prize", 90}, {"r", 0.5}, {"n", 3}});
  EXPECT_NEAR(closed_form_baseline(three, 1).point, 0.5 * 90 * 2 / 9, 1e-12);
  const auto steep = make_game(Family::TullockContest, {{"prize", 100}, {"r", 2}});
  EXPECT_EQ(error_name([&] { closed_form_baseline(steep, 0); }), "Unsupported");
}

TEST(ClosedForm, AllPayUniformMix) {
  const auto g = make_game(Family::AllPayAuction, {{"prize", 100}});
  const auto b = closed_form_baseline(g, 0);
  EXPECT_EQ(b.kind, BaselineKind::Mixed);
  EXPECT_NEAR(b.raw_mean(), 50.0, 1e-9);
  double sum = 0;
  for (double w : b.weights) sum += w;
  EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(BimatrixNash, PrisonersDilemmaPure) {
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 3, 0, 5, 1;
  b << 3, 5, 0, 1;
  const auto sol = solve_bimatrix_nash(bimatrix(a, b));
  ASSERT_EQ(sol.equilibria.size(), 1u);
  EXPECT_EQ(weight_of(sol.equilibria[0].first, "r1"), 1.0);
  EXPECT_EQ(weight_of(sol.equilibria[0].second, "c1"), 1.0);
}

TEST(BimatrixNash, MatchingPenniesMixed) {
  Eigen::MatrixXd a(2, 2);
  a << 1, -1, -1, 1;
  const auto sol = solve_bimatrix_nash(bimatrix(a, -a));
  ASSERT_EQ(sol.equilibria.size(), 1u);
  EXPECT_NEAR(weight_of(sol.equilibria[0].first, "r0"), 0.5, 1e-12);
  EXPECT_NEAR(weight_of(sol.equilibria[0].second, "c0"), 0.5, 1e-12);
}

TEST(BimatrixNash, BattleOfSexesThreeEquilibria) {
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 2, 0, 0, 1;
  b << 1, 0, 0, 2;
  const auto sol = solve_bimatrix_nash(bimatrix(a, b));
  ASSERT_EQ(sol.equilibria.size(), 3u);
  int pure = 0;
  bool mixed_found = false;
  for (const auto& [x, y] : sol.equilibria) {
    const double p = weight_of(x, "r0"), q = weight_of(y, "c0");
    if ((p == 1 && q == 1) || (p == 0 && q == 0)) ++pure;
    if (std::fabs(p - 2.0 / 3.0) < 1e-12 && std::fabs(q - 1.0 / 3.0) < 1e-12) mixed_found = true;
  }
  EXPECT_EQ(pure, 2);
  EXPECT_TRUE(mixed_found);
}

TEST(BimatrixNash, GeneratedGamesVerified) {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto g = generate_novel_game(seed, 2 + seed % 5, 2 + seed % 4);
    const auto sol = solve_bimatrix_nash(g);
    ASSERT_FALSE(sol.equilibria.empty());
    for (const auto& [x, y] : sol.equilibria) {
      Eigen::VectorXd vx = Eigen::Map<const Eigen::VectorXd>(x.weights.data(), x.weights.size());
      Eigen::VectorXd vy = Eigen::Map<const Eigen::VectorXd>(y.weights.data(), y.weights.size());
      EXPECT_LE(max_deviation_gain(g.row_payoffs, g.col_payoffs, vx, vy), 1e-8);
    }
  }
}

TEST(LevelK, PBeautyRecursion) {
  const auto g = make_game(Family::PBeauty, {{"p", 2.0 / 3.0}, {"H", 100}});
  EXPECT_NEAR(std::get<double>(level_k_action(g, 0, 0)), 50.0, 1e-12);
  EXPECT_NEAR(std::get<double>(level_k_action(g, 0, 1)), 33.3333333333, 1e-9);
  EXPECT_NEAR(std::get<double>(level_k_action(g, 0, 2)), 22.2222222222, 1e-9);
  double prev = 100;
  for (int k = 0; k < 40; ++k) {
    const double a = std::get<double>(level_k_action(g, 0, k));
    EXPECT_LT(a, prev);
    prev = a;
  }
  EXPECT_LT(prev, 1e-4);
  EXPECT_NEAR(std::get<double>(level_k_action(g, 0, 1, {Decision{90.0}})), 60.0, 1e-12);
}

TEST(CognitiveHierarchy, PoissonWeightedBestResponse) {
  const auto g = make_game(Family::PBeauty, {{"p", 2.0 / 3.0}, {"H", 100}});
  EXPECT_NEAR(std::get<double>(cognitive_hierarchy_action(g, 0, 2, 1.5)), 26.6667, 1e-4);
  EXPECT_NEAR(std::get<double>(cognitive_hierarchy_action(g, 0, 5, 1e-9)), 33.3333333, 1e-6);
  for (double tau : {0.3, 1.5, 4.0})
    EXPECT_NEAR(std::get<double>(cognitive_hierarchy_action(g, 0, 1, tau)),
                std::get<double>(level_k_action(g, 0, 1)), 1e-12);
  const auto w = truncated_poisson_weights(2, 1.5);
  EXPECT_NEAR(w[0], 0.4, 1e-12);
  EXPECT_NEAR(w[1], 0.6, 1e-12);
}

TEST(Qre, LimitsAndFixedPoint) {
  const auto pd = make_game(Family::PrisonersDilemma, {{"T", 5}, {"R", 3}, {"P", 1}, {"S", 0}});
  for (const auto& r : logit_qre(pd, 0.0).roles) EXPECT_NEAR(r.weights[0], 0.5, 1e-12);
  EXPECT_GT(weight_of(logit_qre(pd, 1000.0).roles[0], "defect"), 0.999);

  const auto g = generate_novel_game(11, 4, 3);
  const auto sol = logit_qre(g, 0.8);
  const auto nf = normal_form(g);
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(sol.roles[0].weights.data(), 4);
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(sol.roles[1].weights.data(), 3);
  EXPECT_NEAR(x.sum(), 1.0, 1e-9);
  const auto [x2, y2] = logit_response(nf, 0.8, x, y);
  EXPECT_LT((x2 - x).lpNorm<Eigen::Infinity>(), 1e-8);
  EXPECT_LT((y2 - y).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(Qre, ConvergesAcrossGeneratedGames) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto g = generate_novel_game(seed, 2 + seed % 6, 2 + seed % 5);
    const auto nf = normal_form(g);
    for (double lambda : {0.1, 1.0, 5.0, 50.0, 200.0}) {
      const auto sol = logit_qre(g, lambda);
      Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(sol.roles[0].weights.data(), sol.roles[0].weights.size());
      Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(sol.roles[1].weights.data(), sol.roles[1].weights.size());
      const auto [x2, y2] = logit_response(nf, lambda, x, y);
      EXPECT_LT(std::max((x2 - x).lpNorm<Eigen::Infinity>(), (y2 - y).lpNorm<Eigen::Infinity>()), 1e-8)
          << "seed " << seed << " lambda " << lambda;
    }
  }
}

TEST(Qre, ContinuousGameOnGrid) {
  const auto g = make_game(Family::TullockContest, {{"prize", 100}, {"r", 1}});
  QreOptions opts;
  opts.grid_points = 51;
  const auto sol = logit_qre(g, 0.5, opts);
  ASSERT_EQ(sol.roles.size(), 2u);
  EXPECT_EQ(sol.roles[0].weights.size(), 51u);
  EXPECT_NEAR(sol.roles[0].raw_mean(), sol.roles[1].raw_mean(), 1e-6);
}

TEST(Fairness, RejectionThreshold) {
  EXPECT_EQ(fairness_rejection_threshold(100, 0.75), 30.0);
  EXPECT_EQ(fairness_rejection_threshold(100, 0.0), 0.0);
  EXPECT_NEAR(fairness_rejection_threshold(100, 1e9), 50.0, 1e-6);
  double prev = -1;
  for (double a = 0; a < 5; a += 0.25) {
    const double s = fairness_rejection_threshold(80, a);
    EXPECT_GT(s, prev);
    EXPECT_LT(s, 40.0);
    prev = s;
  }
}

TEST(RiskAverseBid, ClosedFormAndGridOracle) {
  EXPECT_NEAR(risk_averse_bid(80, 2, 1.0), 40.0, 1e-12);
  EXPECT_NEAR(risk_averse_bid(80, 2, 0.5), 53.3333333, 1e-6);
  EXPECT_NEAR(risk_averse_bid(80, 2, 0.5), grid_best_bid(80, 2, 0.5, 100), 0.05);
  EXPECT_EQ(risk_averse_bid(0, 2, 0.5), 0.0);
  EXPECT_EQ(error_name([] { risk_averse_bid(80, 2, 1.5); }), "InvalidRho");
}

TEST(ComputeBaseline, DispatchesOnBenchmark) {
  const auto pb = make_game(Family::PBeauty, {{"p", 2.0 / 3.0}});
  EXPECT_EQ(compute_baseline(pb, 0, Benchmark::nash()).point, 0.0);
  EXPECT_NEAR(compute_baseline(pb, 0, Benchmark::level_k(2)).point, 200.0 / 9.0, 1e-9);
  EXPECT_EQ(compute_baseline(pb, 0, Benchmark::level_k(2)).benchmark.tag(), "LevelK(2)");
  EXPECT_EQ(error_name([&] { compute_baseline(pb, 0, Benchmark::logit_qre(1.0)); }), "Unsupported");
  const auto pd = make_game(Family::PrisonersDilemma, {{"T", 5}, {"R", 3}, {"P", 1}, {"S", 0}});
  const auto mixed = compute_baseline(pd, 0, Benchmark::logit_qre(0.0));
  EXPECT_EQ(mixed.kind, BaselineKind::Mixed);
  EXPECT_NEAR(mixed.weights[0], 0.5, 1e-9);
}
