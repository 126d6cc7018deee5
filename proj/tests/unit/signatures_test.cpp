#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "deltalab/error.hpp"
#include "deltalab/rng.hpp"
#include "deltalab/signatures.hpp"

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

TestOptions quick(std::uint64_t seed = 1) {
  TestOptions o;
  o.permutations = 999;
  o.bootstrap = 499;
  o.power_replicates = 0;
  o.seed = seed;
  return o;
}

std::vector<double> normals(std::size_t n, std::uint64_t seed, double mu = 0.0, double sd = 1.0) {
  auto eng = make_engine(seed);
  std::normal_distribution<double> d(mu, sd);
  std::vector<double> out(n);
  for (auto& v : out) v = d(eng);
  return out;
}

std::vector<PathSeries> ar_sessions(double phi, int sessions, int rounds, std::uint64_t seed) {
  auto eng = make_engine(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<PathSeries> out;
  for (int s = 0; s < sessions; ++s) {
    PathSeries p;
    p.id = "s" + std::to_string(s);
    double x = 0.5;
    for (int t = 0; t < rounds; ++t) {
      x = 0.5 + phi * (x - 0.5) + noise(eng);
      p.own.push_back(x);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

TEST(ConditionalDependence, DetectsCategoricalShift) {
  const std::size_t n = 80;
  auto deltas = normals(n, 3, 0.0, 0.1);
  Feature f{"framing", {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    f.levels.push_back(i % 2 ? "Loss" : "Gain");
    if (i % 2) deltas[i] += 0.1;
  }
  const auto r = test_conditional_dependence(deltas, {f}, quick());
  EXPECT_TRUE(r.flagged);
  EXPECT_LT(*r.p_value, 0.01);
}

TEST(ConditionalDependence, NullIsNotFlaggedAndErrorsAreTyped) {
  const auto deltas = normals(60, 4);
  Feature f{"individuation", {}, {}};
  for (std::size_t i = 0; i < deltas.size(); ++i) f.levels.push_back(i % 3 ? "Named" : "Aggregate");
  EXPECT_GT(*test_conditional_dependence(deltas, {f}, quick()).p_value, 0.05);
  Feature constant{"framing", {}, std::vector<std::string>(deltas.size(), "Gain")};
  EXPECT_EQ(error_name([&] { test_conditional_dependence(deltas, {constant}, quick()); }), "RankDeficient");
  EXPECT_EQ(error_name([&] { test_conditional_dependence(deltas, {}, quick()); }), "InvalidInputs");
  const std::vector<double> few(8, 0.0);
  Feature small{"x", {1, 2, 3, 4, 5, 6, 7, 8}, {}};
  EXPECT_EQ(error_name([&] { test_conditional_dependence(few, {small}, quick()); }), "TooFewObservations");
}

TEST(Asymmetry, SkewThresholdAndDirection) {
  const std::vector<double> right{0, 0, 0, 0, 0, 0, 0, 1};
  const auto r = test_distributional_asymmetry(right, Direction::Right, quick());
  EXPECT_NEAR(r.statistic, 2.828427, 1e-6);
  EXPECT_TRUE(r.flagged);
  EXPECT_EQ(*r.direction_observed, "Right");
  EXPECT_FALSE(test_distributional_asymmetry(right, Direction::Left, quick()).flagged);
  const auto sym = test_distributional_asymmetry(std::vector<double>{-2, -1, -1, 0, 0, 1, 1, 2}, Direction::Left, quick());
  EXPECT_NEAR(sym.statistic, 0.0, 1e-12);
  EXPECT_FALSE(sym.flagged);
  EXPECT_EQ(error_name([] { test_distributional_asymmetry(std::vector<double>{0, 0, 0, 1}, Direction::Right); }),
            "TooFewObservations");
  EXPECT_EQ(error_name([] { test_distributional_asymmetry(std::vector<double>(9, 0.3), Direction::Right); }),
            "ZeroVariance");
}

TEST(Asymmetry, PredictedDirectionByFrame) {
  EXPECT_EQ(predicted_direction(Framing::Gain), Direction::Left);
  EXPECT_EQ(predicted_direction(Framing::Loss), Direction::Right);
  EXPECT_FALSE(predicted_direction(Framing::Neutral).has_value());
}

TEST(PathDependence, FlagsAutoregressiveSeries) {
  PathOptions path;
  path.bias_permutations = 50;
  const auto ar = test_path_dependence(ar_sessions(0.5, 20, 30, 5), path, quick());
  EXPECT_TRUE(ar.flagged);
  EXPECT_GT(ar.effect, 0.3);
  const auto iid = test_path_dependence(ar_sessions(0.0, 20, 30, 6), path, quick());
  EXPECT_NEAR(iid.details.at("mean_bias_corrected_coef"), 0.0, 0.06);
}

TEST(PathDependence, InputValidation) {
  PathOptions path;
  EXPECT_EQ(error_name([&] { test_path_dependence(ar_sessions(0.2, 6, 9, 1), path, quick()); }), "SessionTooShort");
  EXPECT_EQ(error_name([&] { test_path_dependence(ar_sessions(0.2, 4, 20, 1), path, quick()); }),
            "InsufficientSessions");
  auto bad = ar_sessions(0.2, 6, 20, 1);
  bad[0].opponent.assign(5, 0.0);
  EXPECT_EQ(error_name([&] { test_path_dependence(bad, path, quick()); }), "InvalidInputs");
  path.lag_order = 0;
  EXPECT_EQ(error_name([&] { test_path_dependence(ar_sessions(0.2, 6, 20, 1), path, quick()); }), "InvalidInputs");
}

TEST(Paraphrase, CoefficientOfVariation) {
  const std::vector<std::vector<double>> stable{{0.50}, {0.51}, {0.52}, {0.49}, {0.50}};
  const auto s = test_paraphrase_robustness(stable, quick());
  EXPECT_NEAR(s.statistic, 0.022622528275776564, 1e-12);
  EXPECT_TRUE(s.flagged);
  const std::vector<std::vector<double>> sensitive{{0.1}, {0.9}, {0.3}, {0.7}, {0.2}};
  const auto t = test_paraphrase_robustness(sensitive, quick());
  EXPECT_NEAR(t.statistic, 0.780707456241712, 1e-12);
  EXPECT_FALSE(t.flagged);
  // Groups are reduced to their means first.
  const std::vector<std::vector<double>> spread{{0.4, 0.6}, {0.51}, {0.52}, {0.49}, {0.50}};
  EXPECT_NEAR(test_paraphrase_robustness(spread, quick()).statistic, s.statistic, 1e-12);
}

TEST(Paraphrase, Errors) {
  EXPECT_EQ(error_name([] { test_paraphrase_robustness({{1}, {1}, {1}, {1}}); }), "TooFewParaphrases");
  EXPECT_EQ(error_name([] { test_paraphrase_robustness({{1}, {1}, {}, {1}, {1}}); }), "TooFewParaphrases");
  EXPECT_EQ(error_name([] { test_paraphrase_robustness({{1}, {-1}, {0}, {0.5}, {-0.5}}); }), "MeanNearZero");
}

TEST(LlmCovariates, BudgetScalingAndFramingInsensitivity) {
  std::vector<double> deltas;
  std::vector<Condition> conds;
  auto noise = normals(120, 9, 0.0, 0.02);
  for (std::size_t i = 0; i < 120; ++i) {
    Condition c;
    c.compute_budget = std::vector<double>{1, 2, 4}[i % 3];
    c.framing = (i / 3) % 2 ? Framing::Loss : Framing::Gain;
    conds.push_back(c);
    deltas.push_back(0.1 * c.compute_budget + noise[i]);
  }
  const auto r = test_llm_covariates(deltas, conds, quick());
  ASSERT_EQ(r.size(), 2u);
  EXPECT_TRUE(r[0].flagged);
  EXPECT_GT(r[0].statistic, 0.8);
  EXPECT_EQ(*r[0].direction_observed, "increasing");
  EXPECT_TRUE(r[1].flagged);  // frames do not move deltas
  for (std::size_t i = 0; i < 120; ++i)
    if (conds[i].framing == Framing::Loss) deltas[i] += 0.5;
  EXPECT_FALSE(test_llm_covariates(deltas, conds, quick())[1].flagged);
}

TEST(LlmCovariates, InsufficientLevels) {
  std::vector<Condition> conds(10);
  for (std::size_t i = 0; i < conds.size(); ++i) {
    conds[i].compute_budget = 1.0 + i % 2;
    conds[i].framing = i % 2 ? Framing::Loss : Framing::Gain;
  }
  const std::vector<double> deltas(10, 0.1);
  EXPECT_EQ(error_name([&] { test_llm_covariates(deltas, conds, quick()); }), "InsufficientLevels");
  for (std::size_t i = 0; i < conds.size(); ++i) {
    conds[i].compute_budget = 1.0 + i % 3;
    conds[i].framing = Framing::Gain;
  }
  EXPECT_EQ(error_name([&] { test_llm_covariates(deltas, conds, quick()); }), "InsufficientLevels");
}

TEST(Classifier, ExplicitCases) {
  SignatureFlags f;
  EXPECT_EQ(classify_flags(f), Classification::Unstructured);
  f = {true, true, true, false, false, false, false};
  EXPECT_EQ(classify_flags(f), Classification::HumanShaped);
  f = {true, false, false, false, true, true, false};
  EXPECT_EQ(classify_flags(f), Classification::LLMShaped);
  f = {true, false, true, false, true, true, false};
  EXPECT_EQ(classify_flags(f), Classification::Mixed);  // path dependence excludes LLM-shaped
  f = {false, false, false, false, false, true, true};
  EXPECT_EQ(classify_flags(f), Classification::Unstructured);  // LLM tests absent
  f = {false, false, false, true, true, true, true};
  EXPECT_EQ(classify_flags(f), Classification::Mixed);  // paraphrase-stable excludes LLM-shaped
}

TEST(Classifier, AllFlagCombinations) {
  for (int mask = 0; mask < 128; ++mask) {
    const SignatureFlags f{bool(mask & 1), bool(mask & 2), bool(mask & 4), bool(mask & 8),
                           bool(mask & 16), bool(mask & 32), bool(mask & 64)};
    const int human = f.conditional_dependence + f.asymmetry + f.path_dependence + f.paraphrase_stable;
    const auto c = classify_flags(f);
    if (human >= 3) {
      EXPECT_EQ(c, Classification::HumanShaped) << mask;
    } else if (f.llm_tests_present && !f.paraphrase_stable && !f.path_dependence &&
               (f.budget_scaling || f.framing_insensitive)) {
      EXPECT_EQ(c, Classification::LLMShaped) << mask;
    } else {
      EXPECT_EQ(c, human == 0 ? Classification::Unstructured : Classification::Mixed) << mask;
    }
  }
}

TEST(Classifier, ProfileRequiresAllHumanTests) {
  SignatureProfile p;
  EXPECT_EQ(error_name([&] { classify_profile(p); }), "IncompleteResults");
  SignatureResult flagged;
  flagged.flagged = true;
  p.conditional_dependence = p.asymmetry = p.path_dependence = flagged;
  p.paraphrase = SignatureResult{};
  EXPECT_EQ(classify_profile(p).classification, Classification::HumanShaped);
}
