#include <gtest/gtest.h>

#include "deltalab/error.hpp"
#include "deltalab/game_model.hpp"

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

}  // namespace

TEST(MakeGame, UltimatumProposerSpace) {
  const auto g = make_game(Family::Ultimatum, {{"pot", 100}, {"unit", 1}});
  ASSERT_TRUE(g.is_continuous(0));
  EXPECT_EQ(std::get<ContinuousInterval>(g.action_space(0)), (ContinuousInterval{0, 100}));
}

TEST(MakeGame, PrisonersDilemmaOrdering) {
  EXPECT_NO_THROW(make_game(Family::PrisonersDilemma, {{"T", 5}, {"R", 3}, {"P", 1}, {"S", 0}}));
  EXPECT_EQ(error_name([] { make_game(Family::PrisonersDilemma, {{"T", 2}, {"R", 3}, {"P", 1}, {"S", 0}}); }),
            "InvalidParams");
}

TEST(MakeGame, RejectsViolatedInvariants) {
  EXPECT_EQ(error_name([] { make_game(Family::Dictator, {{"pot", 0}}); }), "InvalidParams");
  EXPECT_EQ(error_name([] { make_game(Family::Ultimatum, {{"pot", 10}, {"unit", 11}}); }), "InvalidParams");
  EXPECT_EQ(error_name([] { make_game(Family::PublicGoods, {{"endowment", 20}, {"mpcr", 1.0}}); }), "InvalidParams");
  EXPECT_EQ(error_name([] { make_game(Family::PBeauty, {{"p", 1.2}}); }), "InvalidParams");
  EXPECT_EQ(error_name([] { make_game(Family::TullockContest, {{"prize", 100}, {"r", 0}}); }), "InvalidParams");
}

TEST(NormalizeAction, AffineMap) {
  const auto pb = make_game(Family::PBeauty, {{"p", 2.0 / 3.0}, {"H", 100}});
  EXPECT_DOUBLE_EQ(normalize_action(pb, 0, 36.0), 0.36);
  EXPECT_DOUBLE_EQ(normalize_action(pb, 0, 0.0), 0.0);
  const auto ug = make_game(Family::Ultimatum, {{"pot", 100}});
  EXPECT_DOUBLE_EQ(normalize_action(ug, 0, 45.0), 0.45);
}

TEST(NormalizeAction, BinaryAndOutOfRange) {
  const auto pd = make_game(Family::PrisonersDilemma, {{"T", 5}, {"R", 3}, {"P", 1}, {"S", 0}});
  EXPECT_EQ(normalize_action(pd, 0, std::string("cooperate")), 1.0);
  EXPECT_EQ(normalize_action(pd, 0, std::string("defect")), 0.0);
  const auto pb = make_game(Family::PBeauty, {{"p", 0.5}});
  EXPECT_EQ(error_name([&] { normalize_action(pb, 0, 101.0); }), "OutOfRange");
  EXPECT_EQ(error_name([&] { normalize_action(pd, 0, std::string("maybe")); }), "OutOfRange");
}

TEST(NormalizeAction, InvertibleAndMonotone) {
  const auto g = make_game(Family::FirstPriceAuction, {{"value", 30}, {"value_hi", 250}});
  double prev = -1;
  for (double y = 0; y <= 250; y += 3.7) {
    const double u = normalize_action(g, 0, y);
    EXPECT_GT(u, prev);
    prev = u;
    EXPECT_NEAR(std::get<double>(denormalize_action(g, 0, u)), y, 1e-12);
  }
}

TEST(GenerateNovelGame, DeterministicAndSeedSensitive) {
  const auto a = generate_novel_game(1, 3, 3), b = generate_novel_game(1, 3, 3), c = generate_novel_game(2, 3, 3);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.name, b.name);
  EXPECT_NE(a.row_payoffs, c.row_payoffs);
  EXPECT_LE(a.row_payoffs.maxCoeff(), 9);
  EXPECT_GE(a.col_payoffs.minCoeff(), -9);
  EXPECT_EQ(error_name([] { generate_novel_game(1, 11, 3); }), "InvalidShape");
  EXPECT_EQ(error_name([] { generate_novel_game(1, 3, 1); }), "InvalidShape");
}

TEST(Certification, ChecklistForGeneratedGames) {
  const auto g = generate_novel_game(9, 4, 4);
  const auto c = emit_certification_checklist(g);
  EXPECT_EQ(c.corpora.size(), 4u);
  EXPECT_EQ(c.payoff_hash, emit_certification_checklist(g).payoff_hash);
  EXPECT_EQ(c.synthetic_name, g.name);
  EXPECT_TRUE(c.attested_by.empty());
  EXPECT_EQ(error_name([] { emit_certification_checklist(make_game(Family::Ultimatum, {{"pot", 100}})); }),
            "WrongFamily");
}

TEST(GameSpecJson, RoundTripIsExact) {
  for (const auto& g : {make_game(Family::Trust, {{"pot", 10}, {"multiplier", 3}}, "trust"),
                        make_game(Family::PublicGoods, {{"endowment", 20}, {"mpcr", 0.4}, {"n", 4}}, "pg"),
                        make_game(Family::PBeauty, {{"p", 2.0 / 3.0}}, "pb"), generate_novel_game(3, 2, 5)}) {
    const nlohmann::json j = g;
    const auto back = nlohmann::json::parse(j.dump()).get<GameSpec>();
    EXPECT_EQ(back, g) << j.dump();
  }
}

TEST(ConditionJson, DefaultsAndRoundTrip) {
  Condition c;
  c.individuation = Individuation::Named;
  c.framing = Framing::Loss;
  c.paraphrase_id = 3;
  c.compute_budget = 2.5;
  const nlohmann::json j = c;
  EXPECT_EQ(j.get<Condition>(), c);
  const auto d = nlohmann::json{{"individuation", "Aggregate"}}.get<Condition>();
  EXPECT_EQ(d.framing, Framing::Neutral);
  EXPECT_EQ(d.stake_scale, 1.0);
}
