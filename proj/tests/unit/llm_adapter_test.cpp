#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <functional>

#include "deltalab/error.hpp"
#include "deltalab/llm_adapter.hpp"
#include "support/mock_llm.hpp"

using namespace deltalab;
namespace fs = std::filesystem;

namespace {

std::string error_name(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.name();
  }
  return "";
}

const std::vector<Family> kFamilies{Family::Dictator,          Family::Ultimatum,         Family::Trust,
                                    Family::PrisonersDilemma,  Family::PublicGoods,       Family::PBeauty,
                                    Family::FirstPriceAuction, Family::SecondPriceAuction, Family::AllPayAuction,
                                    Family::TullockContest};

fs::path temp_store(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "deltalab_llm_tests";
  fs::create_directories(dir);
  const auto p = dir / name;
  fs::remove(p);
  return p;
}

EndpointConfig mock_endpoint(const deltalab::testing::MockLlm& mock, Transport mode) {
  EndpointConfig cfg;
  cfg.base_url = mock.base_url();
  cfg.model = "mock-model";
  cfg.token_env = "DELTALAB_UNIT_TOKEN";
  cfg.mode = mode;
  cfg.backoff_ms = 1;
  cfg.concurrency = 2;
  ::setenv("DELTALAB_UNIT_TOKEN", "test-token", 1);
  return cfg;
}

GameSpec pd() { return make_game(Family::PrisonersDilemma, {{"T", 5}, {"R", 3}, {"P", 1}, {"S", 0}}); }
GameSpec ug() { return make_game(Family::Ultimatum, {{"pot", 100}, {"unit", 1}}); }

}  // namespace

TEST(Prompts, BanksAreLintFreeAndComplete) {
  EXPECT_FALSE(lint_text("Please be Generous to them").empty());
  EXPECT_TRUE(lint_text("Choose an amount.").empty());
  for (auto family : kFamilies)
    for (int role : {0, 1}) {
      std::vector<PromptTemplate> bank;
      try {
        bank = paraphrase_bank(family, role);
      } catch (const Error& e) {
        EXPECT_EQ(e.name(), "Unsupported");
        continue;
      }
      ASSERT_EQ(bank.size(), static_cast<std::size_t>(kParaphrasesPerGame));
      EXPECT_TRUE(bank[0].is_baseline());
      for (const auto& t : bank) EXPECT_TRUE(lint_text(t.text).empty()) << t.text;
    }
}

TEST(Prompts, RenderFillsEverySlot) {
  const auto g = ug();
  Condition c;
  for (int id = 0; id < kParaphrasesPerGame; ++id) {
    c.paraphrase_id = id;
    const auto text = render_prompt(prompt_template(Family::Ultimatum, 0, id), g, c);
    EXPECT_EQ(text.find('{'), std::string::npos) << text;
    EXPECT_NE(text.find("100"), std::string::npos);
  }
  PromptContext ctx;
  ctx.history = {{1, "40", "accept"}};
  EXPECT_NE(render_prompt(prompt_template(Family::Ultimatum, 0, 0), g, c, ctx).find("40"), std::string::npos);
}

TEST(Prompts, MissingSlot) {
  Condition named;
  named.individuation = Individuation::Named;
  const auto tmpl = prompt_template(Family::Ultimatum, 0, 0);
  EXPECT_EQ(error_name([&] { render_prompt(tmpl, ug(), named); }), "MissingSlot");
  PromptContext ctx;
  ctx.opponent_name = "Alex";
  EXPECT_NE(render_prompt(tmpl, ug(), named, ctx).find("Alex"), std::string::npos);
  PromptTemplate broken = tmpl;
  broken.text += " {undefined_slot}";
  EXPECT_EQ(error_name([&] { render_prompt(broken, ug(), {}); }), "MissingSlot");
  EXPECT_EQ(error_name([&] { render_prompt(tmpl, pd(), {}); }), "MissingSlot");
}

TEST(Parsing, RulesInOrder) {
  const auto g = ug();
  auto p = parse_decision(g, 0, "I think 70 is greedy.\nDECISION: 40");
  EXPECT_EQ(std::get<double>(p.decision), 40.0);
  EXPECT_EQ(p.rule, 1);
  p = parse_decision(g, 0, "Between 10 and 500 options, I offer 35 coins.");
  EXPECT_EQ(std::get<double>(p.decision), 35.0);
  EXPECT_EQ(p.rule, 2);
  const auto pdg = pd();
  p = parse_decision(pdg, 0, "After thinking, I will defect this time.");
  EXPECT_EQ(std::get<std::string>(p.decision), "defect");
  EXPECT_EQ(p.rule, 3);
  p = parse_decision(pdg, 0, "decision: Cooperate");
  EXPECT_EQ(std::get<std::string>(p.decision), "cooperate");
  EXPECT_EQ(p.rule, 1);
}

TEST(Parsing, Failures) {
  EXPECT_EQ(error_name([] { parse_decision(ug(), 0, "DECISION: 140"); }), "OutOfRange");
  EXPECT_EQ(error_name([] { parse_decision(ug(), 0, "I offer 250 and 300."); }), "OutOfRange");
  EXPECT_EQ(error_name([] { parse_decision(ug(), 0, "No idea."); }), "Unparseable");
  EXPECT_EQ(error_name([] { parse_decision(ug(), 0, ""); }), "Unparseable");
  EXPECT_EQ(error_name([] { parse_decision(pd(), 0, "Hmm."); }), "Unparseable");
}

TEST(Parsing, RenderedDecisionsRoundTrip) {
  for (double v : {0.0, 1.0, 33.5, 99.25, 100.0}) {
    const auto p = parse_decision(ug(), 0, render_decision(v));
    EXPECT_EQ(std::get<double>(p.decision), v);
    EXPECT_EQ(render_decision(p.decision), render_decision(v));
  }
  for (const std::string s : {"cooperate", "defect"})
    EXPECT_EQ(std::get<std::string>(parse_decision(pd(), 0, render_decision(s)).decision), s);
}

TEST(Transport, ResponseTextExtraction) {
  EXPECT_EQ(extract_response_text(nlohmann::json::parse(R"({"choices":[{"message":{"content":"hi"}}]})")), "hi");
  EXPECT_EQ(extract_response_text(nlohmann::json::parse(R"({"choices":[{"text":"yo"}]})")), "yo");
}

TEST(Transport, ReplayMissNeverTouchesNetwork) {
  EndpointConfig cfg;
  cfg.mode = Transport::Replay;
  TranscriptStore store(temp_store("empty.jsonl"));
  const auto before = network_request_count();
  EXPECT_EQ(error_name([&] { query_agent(cfg, {"hello", 0.0}, &store); }), "ReplayMiss");
  EXPECT_EQ(network_request_count(), before);
}

TEST(Transport, RecordThenReplay) {
  deltalab::testing::MockLlm mock;
  const auto path = temp_store("record.jsonl");
  auto cfg = mock_endpoint(mock, Transport::Record);
  cfg.budget_labels = {{"1", "low"}};
  const std::string prompt = "Choose a number between 0 and 100.";
  {
    TranscriptStore store(path);
    const QueryRequest req{prompt, 1.0};
    EXPECT_EQ(query_agent(cfg, req, &store), deltalab::testing::mock_answer(prompt));
    EXPECT_EQ(store.size(), 1u);
  }
  EXPECT_EQ(mock.requests.load(), 1);
  cfg.mode = Transport::Replay;
  TranscriptStore reloaded(path);
  const auto before = network_request_count();
  EXPECT_EQ(query_agent(cfg, {prompt, 1.0}, &reloaded), deltalab::testing::mock_answer(prompt));
  EXPECT_EQ(network_request_count(), before);
  // Another budget setting is a different request.
  cfg.budget_labels["2"] = "high";
  EXPECT_EQ(error_name([&] { query_agent(cfg, {prompt, 2.0}, &reloaded); }), "ReplayMiss");
  EXPECT_NE(request_key(cfg, {prompt, 1.0}), request_key(cfg, {prompt, 2.0}));
}

TEST(Transport, RetriesTransientFailures) {
  deltalab::testing::MockLlm mock;
  auto cfg = mock_endpoint(mock, Transport::Live);
  mock.fail_next = 2;
  EXPECT_EQ(query_agent(cfg, {"x", 0.0}), deltalab::testing::mock_answer("x"));
  EXPECT_EQ(mock.requests.load(), 3);
  mock.fail_next = 100;
  EXPECT_EQ(error_name([&] { query_agent(cfg, {"x", 0.0}); }), "NetworkError");
}

TEST(Transport, AuthMissing) {
  deltalab::testing::MockLlm mock;
  auto cfg = mock_endpoint(mock, Transport::Live);
  cfg.token_env = "DELTALAB_UNSET_TOKEN_FOR_TESTS";
  ::unsetenv("DELTALAB_UNSET_TOKEN_FOR_TESTS");
  EXPECT_EQ(error_name([&] { query_agent(cfg, {"x", 0.0}); }), "AuthMissing");
  EXPECT_EQ(mock.requests.load(), 0);
}

TEST(Experiment, RecordedRunReplaysIdentically) {
  deltalab::testing::MockLlm mock;
  ExperimentDesign d;
  d.games = {make_game(Family::Ultimatum, {{"pot", 100}, {"unit", 1}}, "ug")};
  d.framing = {Framing::Gain, Framing::Loss};
  d.paraphrase_ids = {0, 1};
  d.rounds = 3;
  d.master_seed = 4;
  const auto path = temp_store("experiment.jsonl");
  auto cfg = mock_endpoint(mock, Transport::Record);
  TranscriptStore store(path);
  const auto recorded = run_llm_experiment(d, cfg, store);
  EXPECT_EQ(recorded.queries, 2 * 2 * 3 * 2);
  EXPECT_EQ(recorded.dataset.rows.size(), static_cast<std::size_t>(recorded.queries));
  cfg.mode = Transport::Replay;
  TranscriptStore reloaded(path);
  const auto replayed = run_llm_experiment(d, cfg, reloaded);
  EXPECT_EQ(replayed.network_requests, 0u);
  EXPECT_EQ(dataset_hash(replayed.dataset), dataset_hash(recorded.dataset));
}
