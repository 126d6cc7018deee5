#pragma once

// Prompt rendering, chat-completion transport with record/replay, and
// decision parsing for language-model arms.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deltalab/agents.hpp"
#include "deltalab/dataset.hpp"
#include "deltalab/game_model.hpp"

namespace deltalab {

inline constexpr int kParaphrasesPerGame = 5;

/// Phrases that would invite behavioural output; no template may contain them.
const std::vector<std::string>& invitation_lint();

/// Banned phrases found in text (case-insensitive substring scan).
std::vector<std::string> lint_text(const std::string& text);

struct PromptTemplate {
  Family family = Family::Dictator;
  int role = 0;
  int paraphrase_id = 0;  // 0 is the baseline wording
  std::string text;       // with {slot} placeholders

  bool is_baseline() const { return paraphrase_id == 0; }
};

/// Curated bank for a family and role (kParaphrasesPerGame variants).
/// Throws Unsupported for roles that make no decision.
std::vector<PromptTemplate> paraphrase_bank(Family family, int role);
PromptTemplate prompt_template(Family family, int role, int paraphrase_id);

struct HistoryEntry {
  int round = 0;
  std::string own;     // rendered own decision ("40", "cooperate", "no valid decision")
  std::string others;  // rendered opponent decision or group average
};

struct PromptContext {
  std::optional<std::string> opponent_name;  // required under Named
  std::vector<HistoryEntry> history;
};

/// Fills the template. Throws MissingSlot for an unfilled placeholder, a
/// Named condition without an opponent name, or a template/game mismatch.
std::string render_prompt(const PromptTemplate& tmpl, const GameSpec& game, const Condition& condition,
                          const PromptContext& context = {});

// ---- transport ---------------------------------------------------------------

enum class Transport { Live, Record, Replay };
std::string to_string(Transport t);
Transport transport_from_string(const std::string& s);

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8080";
  std::string path = "/v1/chat/completions";
  std::string model = "model";
  std::string token_env = "DELTALAB_API_TOKEN";
  Transport mode = Transport::Replay;
  double temperature = 0.0;
  std::string budget_param = "reasoning_effort";
  std::map<std::string, std::string> budget_labels;  // budget value (as written) -> endpoint setting
  int max_retries = 3;
  int backoff_ms = 250;
  int timeout_s = 60;
  int concurrency = 4;
  std::filesystem::path store;  // transcript JSON-lines file

  std::string budget_setting(double budget) const;
};

EndpointConfig endpoint_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const EndpointConfig& c);

struct QueryRequest {
  std::string prompt;
  double compute_budget = 0.0;
  // When set, recorded transcripts also carry the parsed decision.
  const GameSpec* game = nullptr;
  int role = 0;
};

struct Transcript {
  std::string key;          // replay key: hash of model, budget setting and prompt
  std::string prompt_hash;  // hash of the prompt text alone
  std::string model;
  std::string prompt;
  double temperature = 0.0;
  std::string budget_setting;
  std::string response;
  std::optional<std::string> parsed;  // rendered decision, when parseable
  std::optional<int> parse_rule;
  std::string requested_at;
  std::string received_at;
};

void to_json(nlohmann::json& j, const Transcript& t);
void from_json(const nlohmann::json& j, Transcript& t);

std::string request_key(const EndpointConfig& cfg, const QueryRequest& req);

/// Append-only JSON-lines store keyed by request key; appends are serialized.
class TranscriptStore {
 public:
  TranscriptStore() = default;
  explicit TranscriptStore(std::filesystem::path path);

  std::optional<Transcript> find(const std::string& key) const;
  void append(const Transcript& t);
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, Transcript> by_key_;  // last write wins
};

/// Number of HTTP requests issued by this process (for offline checks).
std::uint64_t network_request_count();

/// Live: one chat-completion request. Record: Live, then append to the store.
/// Replay: stored response by key, never touching the network.
/// Throws AuthMissing, NetworkError or ReplayMiss.
std::string query_agent(const EndpointConfig& cfg, const QueryRequest& req, TranscriptStore* store = nullptr);

/// First text field of a chat-completion style response body.
std::string extract_response_text(const nlohmann::json& body);

// ---- parsing -----------------------------------------------------------------

struct ParsedDecision {
  Decision decision;
  int rule = 0;  // 1 marker, 2 last in-range number, 3 keyword
};

/// Throws Unparseable (with an excerpt) or OutOfRange.
ParsedDecision parse_decision(const GameSpec& game, int role, const std::string& response);

/// "DECISION: <value>" rendering that parse_decision maps back to itself.
std::string render_decision(const Decision& d);

// ---- experiment execution ----------------------------------------------------

struct LlmRunResult {
  Dataset dataset;
  int queries = 0;
  int unparseable = 0;
  int out_of_range = 0;
  std::uint64_t network_requests = 0;
};

/// Runs every session of the design against the endpoint; the model plays
/// each role through its own prompt. Arms in the design are ignored.
LlmRunResult run_llm_experiment(const ExperimentDesign& design, const EndpointConfig& cfg, TranscriptStore& store);

}  // namespace deltalab
