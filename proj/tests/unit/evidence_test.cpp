#include <gtest/gtest.h>

#include <functional>

#include "deltalab/error.hpp"
#include "deltalab/evidence.hpp"

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

nlohmann::json table(nlohmann::json row) {
  nlohmann::json base{{"study", "S"},          {"family", "Dictator"}, {"statistic", "share"},
                      {"llm_value", 0.5},      {"human_value", 0.5},   {"is_rate", true},
                      {"direction", "none"},   {"source_note", ""}};
  base.update(row);
  return {{"schema_version", 1}, {"rows", {base}}};
}

}  // namespace

TEST(Evidence, BundledPrisonersDilemmaContrast) {
  const auto rows = load_evidence(bundled_evidence_path());
  const auto contrasts = evidence_summary(rows);
  bool found = false;
  for (const auto& c : contrasts) {
    if (c.row.family != "PrisonersDilemma" || !c.diff) continue;
    found = true;
    EXPECT_EQ(*c.row.llm_value, 0.65);
    EXPECT_EQ(*c.row.human_value, 0.37);
    EXPECT_EQ(*c.diff, 0.28);
    EXPECT_EQ(c.sign, 1);
  }
  EXPECT_TRUE(found);
}

TEST(Evidence, EqualValuesAndMissingMagnitudes) {
  auto c = evidence_contrast(parse_evidence(table(nlohmann::json::object()))[0]);
  EXPECT_EQ(*c.diff, 0.0);
  EXPECT_EQ(c.sign, 0);
  c = evidence_contrast(parse_evidence(table({{"llm_value", nullptr}}))[0]);
  EXPECT_FALSE(c.diff.has_value());
  EXPECT_EQ(c.sign, 0);
  c = evidence_contrast(parse_evidence(table({{"llm_value", 0.1}, {"human_value", 0.3}}))[0]);
  EXPECT_EQ(*c.diff, -0.2);
  EXPECT_EQ(c.sign, -1);
}

TEST(Evidence, MalformedTables) {
  EXPECT_EQ(error_name([] { parse_evidence(table({{"llm_value", 1.3}})); }), "ParseError");
  EXPECT_EQ(error_name([] { parse_evidence(table({{"human_value", -0.1}})); }), "ParseError");
  EXPECT_EQ(error_name([] { parse_evidence(nlohmann::json{{"rows", 3}}); }), "ParseError");
  EXPECT_EQ(error_name([] { parse_evidence(table({{"llm_value", 4.0}, {"is_rate", false}})); }), "");
}

TEST(Evidence, MarkdownListsEveryRow) {
  const auto contrasts = evidence_summary(load_evidence(bundled_evidence_path()));
  const auto md = evidence_markdown(contrasts);
  EXPECT_NE(md.find("+0.28"), std::string::npos);
  EXPECT_NE(md.find("PrisonersDilemma"), std::string::npos);
}
