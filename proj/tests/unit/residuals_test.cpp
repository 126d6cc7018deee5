#include <gtest/gtest.h>

#include <functional>
#include <sstream>

#include "deltalab/error.hpp"
#include "deltalab/residuals.hpp"

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

RoundRecord record(const std::string& game, int role, Decision d, int round = 1) {
  RoundRecord r;
  r.session_id = "s1";
  r.subject_id = "p1";
  r.game_id = game;
  r.role = role;
  r.round = round;
  r.decision = std::move(d);
  return r;
}

DeltaSeries series_of(const std::string& game, std::vector<double> values) {
  DeltaSeries s;
  s.key.game_id = game;
  int i = 0;
  for (double v : values) s.values.push_back({++i, v});
  return s;
}

}  // namespace

TEST(ComputeDelta, UltimatumOffer) {
  const auto g = make_game(Family::Ultimatum, {{"pot", 100}, {"unit", 1}});
  const auto b = closed_form_baseline(g, 0);
  EXPECT_NEAR(compute_delta(g, record("ug", 0, 37.0), b), 0.36, 1e-12);
  EXPECT_NEAR(compute_delta(g, record("ug", 0, 1.0), b), 0.0, 1e-12);
}

TEST(ComputeDelta, DictatorGift) {
  const auto g = make_game(Family::Dictator, {{"pot", 100}});
  EXPECT_NEAR(compute_delta(g, record("dg", 0, 44.0), closed_form_baseline(g, 0)), 0.44, 1e-12);
}

TEST(ComputeDelta, MissingOrMismatchedBaseline) {
  const auto g = make_game(Family::Dictator, {{"pot", 100}});
  EXPECT_EQ(error_name([&] { compute_delta(g, record("dg", 0, 44.0), std::nullopt); }), "BaselineMissing");
  const auto ug = make_game(Family::Ultimatum, {{"pot", 100}});
  EXPECT_EQ(error_name([&] { compute_delta(ug, record("ug", 0, 44.0), closed_form_baseline(ug, 1)); }),
            "BaselineMissing");
}

TEST(ComputeDelta, MixedBaselineUsesMean) {
  const auto g = make_game(Family::AllPayAuction, {{"prize", 100}});
  const auto b = closed_form_baseline(g, 0);
  EXPECT_NEAR(compute_delta(g, record("ap", 0, 50.0), b), 0.0, 1e-9);
}

TEST(BlockDelta, CooperationRateAgainstDefection) {
  const auto g = make_game(Family::PrisonersDilemma, {{"T", 5}, {"R", 3}, {"P", 1}, {"S", 0}});
  std::vector<RoundRecord> rounds;
  for (int i = 0; i < 20; ++i)
    rounds.push_back(record("pd", 0, std::string(i < 13 ? "cooperate" : "defect"), i + 1));
  const auto s = block_delta_discrete(g, rounds, closed_form_baseline(g, 0), 20);
  ASSERT_EQ(s.values.size(), 1u);
  EXPECT_NEAR(s.values[0].value, 0.65, 1e-12);
  EXPECT_EQ(s.block_size, 20);
}

TEST(BlockDelta, DropsPartialBlockAndRejectsSmallBlocks) {
  const auto g = make_game(Family::PrisonersDilemma, {{"T", 5}, {"R", 3}, {"P", 1}, {"S", 0}});
  std::vector<RoundRecord> rounds;
  for (int i = 0; i < 23; ++i) rounds.push_back(record("pd", 0, std::string("cooperate"), i + 1));
  const auto b = closed_form_baseline(g, 0);
  const auto s = block_delta_discrete(g, rounds, b, 10);
  ASSERT_EQ(s.values.size(), 2u);
  EXPECT_EQ(s.values[1].index, 2);
  EXPECT_EQ(error_name([&] { block_delta_discrete(g, rounds, b, 4); }), "BlockTooSmall");
  const auto dg = make_game(Family::Dictator, {{"pot", 100}});
  std::vector<RoundRecord> gifts(10, record("dg", 0, 10.0));
  EXPECT_EQ(error_name([&] { block_delta_discrete(dg, gifts, closed_form_baseline(dg, 0), 5); }), "Unsupported");
}

TEST(Standardize, DividesBySampleSd) {
  const auto out = standardize_deltas({series_of("a", {0.2, 0.4})}, Pooling::PerGame);
  EXPECT_NEAR(out[0].values[0].value, 1.41421356, 1e-6);
  EXPECT_NEAR(out[0].values[1].value, 2.82842712, 1e-6);
}

TEST(Standardize, PerGameVersusGlobalPools) {
  const std::vector<DeltaSeries> in{series_of("a", {0.1, 0.3}), series_of("b", {1.0, 3.0})};
  const auto per = standardize_deltas(in, Pooling::PerGame);
  const auto global = standardize_deltas(in, Pooling::Global);
  EXPECT_NEAR(per[0].values[1].value / per[0].values[0].value, 3.0, 1e-12);
  EXPECT_NEAR(per[0].values[0].value * 0.1414213562, 0.1, 1e-9);
  EXPECT_NEAR(per[1].values[0].value * 1.414213562, 1.0, 1e-9);
  EXPECT_NEAR(global[1].values[0].value / global[0].values[0].value, 10.0, 1e-9);
}

TEST(Standardize, DegeneratePools) {
  EXPECT_EQ(error_name([] { standardize_deltas({series_of("a", {0.2})}, Pooling::PerGame); }), "DegeneratePool");
  EXPECT_EQ(error_name([] { standardize_deltas({series_of("a", {0.2, 0.2, 0.2})}, Pooling::Global); }),
            "DegeneratePool");
}

TEST(DeltaCsv, OneRowPerValue) {
  std::ostringstream out;
  write_delta_csv(out, {series_of("a", {0.5, -0.25})});
  const auto text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  EXPECT_NE(text.find(",-0.25\n"), std::string::npos);
}
