#include <gtest/gtest.h>

#include <functional>

#include "deltalab/error.hpp"
#include "deltalab/moderator.hpp"

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

// Two groups with equal sd s and means 0.6 s apart, so d is exactly 0.6.
std::pair<std::vector<double>, std::vector<double>> groups_with_d(double d, int n) {
  std::vector<double> a, b;
  for (int i = 0; i < n; ++i) {
    const double x = 1.0 + 0.1 * ((i % 5) - 2) + 0.01 * (i % 3);
    b.push_back(x);
    a.push_back(x);
  }
  double m = 0, ss = 0;
  for (double v : b) m += v;
  m /= n;
  for (double v : b) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / (n - 1));
  for (double& v : a) v += d * sd;
  return {a, b};
}

std::vector<ModeratorObservation> panel(const std::vector<std::pair<std::string, double>>& games, int subjects,
                                        bool within) {
  std::vector<ModeratorObservation> out;
  for (const auto& [game, d] : games) {
    const auto [a, b] = groups_with_d(d, subjects);
    for (int i = 0; i < subjects; ++i) {
      const std::string named = "n" + std::to_string(i), agg = within ? named : "a" + std::to_string(i);
      out.push_back({game, named, Individuation::Named, a[i]});
      out.push_back({game, agg, Individuation::Aggregate, b[i]});
    }
  }
  return out;
}

}  // namespace

TEST(CohensD, ExactEffectAndHedges) {
  const auto [a, b] = groups_with_d(0.6, 20);
  EffectOptions opts;
  opts.bootstrap = 0;
  const auto r = cohens_d(a, b, opts);
  EXPECT_NEAR(r.d, 0.6, 1e-12);
  EXPECT_NEAR(r.hedges_g, 0.588079, 1e-6);
  EXPECT_EQ(r.verdict, Verdict::Supports);
  EXPECT_EQ(r.ci95.first, r.d);
  EXPECT_EQ(r.n_named, 20);
}

TEST(CohensD, BootstrapIntervalCoversEstimate) {
  const auto [a, b] = groups_with_d(0.6, 40);
  EffectOptions opts;
  opts.bootstrap = 2000;
  opts.seed = 3;
  const auto r = cohens_d(a, b, opts);
  EXPECT_LT(r.ci95.first, r.d);
  EXPECT_GT(r.ci95.second, r.d);
  const auto paired = cohens_d_paired(a, b, opts);
  EXPECT_NEAR(paired.d, r.d, 1e-12);
  // Perfectly paired shifts: every resample has the same d.
  EXPECT_NEAR(paired.ci95.second - paired.ci95.first, 0.0, 0.2);
}

TEST(CohensD, AffineInvariance) {
  const auto [a, b] = groups_with_d(0.35, 15);
  EffectOptions opts;
  opts.bootstrap = 0;
  std::vector<double> a2, b2;
  for (double v : a) a2.push_back(3.0 * v + 7.0);
  for (double v : b) b2.push_back(3.0 * v + 7.0);
  EXPECT_NEAR(cohens_d(a, b, opts).d, cohens_d(a2, b2, opts).d, 1e-12);
}

TEST(CohensD, Errors) {
  EXPECT_EQ(error_name([] { cohens_d(std::vector<double>{1}, std::vector<double>{1, 2}); }), "TooFew");
  EXPECT_EQ(error_name([] { cohens_d(std::vector<double>{1, 1}, std::vector<double>{2, 2}); }), "DegenerateVariance");
}

TEST(Verdicts, Boundaries) {
  EXPECT_EQ(verdict_for(0.5), Verdict::Supports);
  EXPECT_EQ(verdict_for(0.49), Verdict::DirectionOnly);
  EXPECT_EQ(verdict_for(0.0), Verdict::Null);
  EXPECT_EQ(verdict_for(-0.1), Verdict::Reversed);
}

TEST(Power, PlanningMatchesNoncentralT) {
  EXPECT_EQ(power_n_normal_approx(0.5, 0.05, 0.8), 63);
  EXPECT_NEAR(exact_power_two_sample(64, 0.5, 0.05), 0.8014595579287103, 1e-6);
  EXPECT_NEAR(exact_power_two_sample(30, 0.5, 0.05), 0.47789652076016476, 1e-6);
  EXPECT_NEAR(power_n_per_arm(0.5, 0.05, 0.8), 64, 2);
  EXPECT_NEAR(power_n_per_arm(0.25, 0.05, 0.8), 253, 5);
  const int big = power_n_per_arm(2.0, 0.05, 0.8);
  EXPECT_GE(big, 5);
  EXPECT_LE(big, 7);
  EXPECT_EQ(error_name([] { power_n_per_arm(0.0, 0.05, 0.8); }), "InvalidInputs");
  EXPECT_EQ(error_name([] { power_n_per_arm(0.5, 1.5, 0.8); }), "InvalidInputs");
}

TEST(Gradient, SupportsWhenEveryGameShifts) {
  GradientOptions opts;
  opts.bootstrap = 0;
  opts.ordering = {"g1", "g2", "g3"};
  const auto r = individuation_gradient_test(panel({{"g1", 0.55}, {"g2", 0.6}, {"g3", 0.7}}, 30, false), opts);
  ASSERT_EQ(r.games.size(), 3u);
  EXPECT_EQ(r.verdict, Verdict::Supports);
  EXPECT_NEAR(r.pooled_d, 0.62, 0.05);
  EXPECT_FALSE(r.games[0].within_subject);
  ASSERT_TRUE(r.trend_tau.has_value());
  EXPECT_NEAR(*r.trend_tau, 1.0, 1e-12);
  EXPECT_TRUE(*r.trend_monotone);
}

TEST(Gradient, WithinSubjectAndVerdictRules) {
  GradientOptions opts;
  opts.bootstrap = 0;
  const auto within = individuation_gradient_test(panel({{"g1", 0.6}, {"g2", 0.6}, {"g3", 0.6}}, 20, true), opts);
  EXPECT_TRUE(within.games[0].within_subject);
  EXPECT_TRUE(within.games[0].paired_dz.has_value());
  EXPECT_NEAR(within.games[0].effect.d, 0.6, 1e-9);
  const auto mixed = individuation_gradient_test(panel({{"g1", 1.2}, {"g2", 0.8}, {"g3", -0.1}}, 20, false), opts);
  EXPECT_EQ(mixed.verdict, Verdict::DirectionOnly);
  const auto reversed = individuation_gradient_test(panel({{"g1", -0.6}, {"g2", -0.6}, {"g3", -0.6}}, 20, false), opts);
  EXPECT_EQ(reversed.verdict, Verdict::Reversed);
}

TEST(Gradient, Errors) {
  GradientOptions opts;
  opts.bootstrap = 0;
  EXPECT_EQ(error_name([&] { individuation_gradient_test(panel({{"g1", 0.6}, {"g2", 0.6}}, 10, false), opts); }),
            "FewerThanThreeGames");
  auto obs = panel({{"g1", 0.6}, {"g2", 0.6}, {"g3", 0.6}}, 10, false);
  std::erase_if(obs, [](const ModeratorObservation& o) {
    return o.game_id == "g2" && o.individuation == Individuation::Aggregate;
  });
  EXPECT_EQ(error_name([&] { individuation_gradient_test(obs, opts); }), "MissingCondition");
}
