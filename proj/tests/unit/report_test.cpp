#include <gtest/gtest.h>

#include <filesystem>
#include <functional>

#include "deltalab/error.hpp"
#include "deltalab/report.hpp"

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

nlohmann::json moderator_result() {
  return nlohmann::json::parse(R"({
    "games": [{"game_id": "g1", "d": 0.61, "hedges_g": 0.6, "ci95": [0.3, 0.9], "n_named": 50, "n_aggregate": 50,
               "verdict": "Supports", "within_subject": false}],
    "pooled_d": 0.61, "pooled_se": 0.1, "verdict": "Supports", "trend_tau": null, "trend_monotone": null,
    "schema_version": 1})");
}

}  // namespace

TEST(Envelope, FieldsAndHash) {
  const nlohmann::json config{{"b", 2}, {"a", 1}};
  const auto env = result_envelope("moderator", 7, config, {{"rows", 10}}, moderator_result());
  EXPECT_EQ(env.at("schema_version"), kResultSchemaVersion);
  EXPECT_EQ(env.at("command"), "moderator");
  EXPECT_EQ(env.at("seed"), 7);
  EXPECT_EQ(env.at("config_hash"), config_hash(config));
  EXPECT_EQ(config_hash(config), config_hash(nlohmann::json{{"a", 1}, {"b", 2}}));
  EXPECT_NE(config_hash(config), config_hash(nlohmann::json{{"a", 1}, {"b", 3}}));
  EXPECT_EQ(config_hash(config).rfind("fnv1a64:", 0), 0u);
}

TEST(Report, ModeratorMarkdownAndTables) {
  const auto env = result_envelope("moderator", 7, {}, {}, moderator_result());
  const auto md = report_markdown(env);
  EXPECT_NE(md.find("g1"), std::string::npos);
  EXPECT_NE(md.find("Supports"), std::string::npos);
  const auto tables = report_plot_tables(env);
  ASSERT_TRUE(tables.count("moderator_effects.csv"));
  EXPECT_NE(tables.at("moderator_effects.csv").find("g1,"), std::string::npos);
}

TEST(Report, UnknownCommandFallsBackToJson) {
  const auto env = result_envelope("llm-run", 1, {}, {}, {{"queries", 4}});
  EXPECT_NE(report_markdown(env).find("\"queries\": 4"), std::string::npos);
  EXPECT_TRUE(report_plot_tables(env).empty());
}

TEST(Report, RejectsMalformedEnvelope) {
  EXPECT_EQ(error_name([] { report_markdown(nlohmann::json{{"result", 1}}); }), "ParseError");
  EXPECT_EQ(error_name([] { report_markdown(nlohmann::json::array()); }), "ParseError");
}

TEST(Report, WritesFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "deltalab_report_test";
  std::filesystem::remove_all(dir);
  const auto files = write_report(result_envelope("moderator", 7, {}, {}, moderator_result()), dir);
  EXPECT_EQ(files.size(), 2u);
  for (const auto& f : files) EXPECT_TRUE(std::filesystem::exists(f));
}
