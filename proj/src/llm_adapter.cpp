#include "deltalab/llm_adapter.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <regex>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "deltalab/error.hpp"
#include "deltalab/rng.hpp"

namespace deltalab {

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string hex64(std::uint64_t h) { return fmt::format("{:016x}", h); }

std::string num(double v) { return fmt::format("{}", v); }

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                     tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
}

// ---- prompt bank -------------------------------------------------------------

// Game descriptions use {slot} placeholders filled by render_prompt.
std::string description(Family f, int role) {
  switch (f) {
    case Family::Dictator:
      if (role == 0)
        return "You have {pot} points to divide between yourself and {opponent}. The other participant makes no "
               "choice. Decide how many points to give to them.";
      break;
    case Family::Ultimatum:
      if (role == 0)
        return "You propose how to split {pot} points with {opponent}, who responds to your proposal. If they accept, "
               "the points are split as proposed; if they reject, both of you receive nothing. Offers are made in "
               "steps of {unit}. Decide how many points to offer.";
      if (role == 1)
        return "{opponent} will propose how to split {pot} points with you. Before seeing the proposal, you state the "
               "smallest offer you will accept. Offers below that amount are rejected and both of you receive "
               "nothing. Decide your minimum acceptable offer.";
      break;
    case Family::Trust:
      if (role == 0)
        return "You hold {pot} points. Any points you send to {opponent} are multiplied by {multiplier}, after which "
               "they decide how many points to send back to you. Decide how many points to send.";
      if (role == 1)
        return "{opponent} holds {pot} points and may send you some of them; every point sent reaches you multiplied "
               "by {multiplier}. Decide how many points you will send back to them.";
      break;
    case Family::PrisonersDilemma:
      return "You and {opponent} each choose, at the same time, to cooperate or to defect. If both cooperate, each "
             "receives {R} points. If both defect, each receives {P} points. If one defects while the other "
             "cooperates, the one who defects receives {T} points and the one who cooperates receives {S} points.";
    case Family::PublicGoods:
      return "You and {others} each hold {endowment} points. Points contributed to a shared account are multiplied so "
             "that every member receives {mpcr} points for each point contributed by anyone; points not contributed "
             "stay with their owner. Decide how many points to contribute.";
    case Family::PBeauty:
      return "You and {others} each pick a number between 0 and {H}. The number closest to {p} times the average of "
             "all picked numbers wins. Decide which number to pick.";
    case Family::FirstPriceAuction:
      return "You bid for an item against {others} in a sealed-bid auction. The item is worth {value} points to you. "
             "The highest bid wins the item and the winner pays their own bid. Decide your bid.";
    case Family::SecondPriceAuction:
      return "You bid for an item against {others} in a sealed-bid auction. The item is worth {value} points to you. "
             "The highest bid wins the item and the winner pays the second-highest bid. Decide your bid.";
    case Family::AllPayAuction:
      return "You compete with {others} for a prize worth {prize} points. Every participant pays their own bid, "
             "whether or not they win; the highest bid wins the prize. Decide your bid.";
    case Family::TullockContest:
      return "You compete with {others} for a prize worth {prize} points. Your chance of winning equals your effort "
             "divided by the total effort of all participants, and effort is spent whether or not you win. Decide "
             "your effort.";
    case Family::GeneratedBimatrix:
      return "You are the {role_name} player in a two-person game called {name}, played with {opponent}. Both players "
             "choose at the same time. Payoffs are listed as (your points, their points):\n{payoffs}";
  }
  throw Error("Unsupported", fmt::format("{} role {} makes no decision", to_string(f), role));
}

const std::array<std::string, kParaphrasesPerGame>& wrappers() {
  static const std::array<std::string, kParaphrasesPerGame> w{
      "This is a decision task.\n\n{description}\n{frame}{stakes}{history}Give your decision on the final line in "
      "the form DECISION: <value>, where <value> is {format}.",
      "Please read the situation below and then make a choice.\n\n{description}\n{frame}{stakes}{history}End your "
      "reply with a line of the form DECISION: <value>; <value> must be {format}.",
      "Situation:\n{description}\n{frame}{stakes}{history}State your choice on the last line as DECISION: <value> "
      "({format}).",
      "{description}\n{frame}{stakes}{history}What is your decision? Write it on the last line as DECISION: <value>, "
      "with <value> being {format}.",
      "Consider the following setup.\n\n{description}\n{frame}{stakes}{history}Finish your answer with DECISION: "
      "<value>, where <value> is {format}.",
  };
  return w;
}

std::string replace_slots(std::string text, const std::map<std::string, std::string>& slots) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto open = text.find('{', pos);
    if (open == std::string::npos) {
      out += text.substr(pos);
      break;
    }
    const auto close = text.find('}', open);
    if (close == std::string::npos) throw Error("MissingSlot", "unterminated slot in template");
    const auto key = text.substr(open + 1, close - open - 1);
    const auto it = slots.find(key);
    if (it == slots.end()) throw Error("MissingSlot", "no value for slot '{" + key + "}'");
    out += text.substr(pos, open - pos);
    out += it->second;
    pos = close + 1;
  }
  return out;
}

std::string format_for(const ActionSpace& space) {
  if (const auto* c = std::get_if<ContinuousInterval>(&space))
    return fmt::format("a number between {} and {}", num(c->lo), num(c->hi));
  const auto& labels = std::get<DiscreteSet>(space).labels;
  return fmt::format("one of: {}", fmt::join(labels, ", "));
}

std::string payoff_table(const GameSpec& g, int role) {
  const auto& rows = std::get<DiscreteSet>(g.action_spaces[0]).labels;
  const auto& cols = std::get<DiscreteSet>(g.action_spaces[1]).labels;
  std::string out;
  for (Eigen::Index i = 0; i < g.row_payoffs.rows(); ++i)
    for (Eigen::Index k = 0; k < g.row_payoffs.cols(); ++k) {
      const auto& mine = role == 0 ? rows[static_cast<std::size_t>(i)] : cols[static_cast<std::size_t>(k)];
      const auto& theirs = role == 0 ? cols[static_cast<std::size_t>(k)] : rows[static_cast<std::size_t>(i)];
      const double a = role == 0 ? g.row_payoffs(i, k) : g.col_payoffs(i, k);
      const double b = role == 0 ? g.col_payoffs(i, k) : g.row_payoffs(i, k);
      out += fmt::format("- you {}, they {}: ({}, {})\n", mine, theirs, num(a), num(b));
    }
  return out;
}

}  // namespace

const std::vector<std::string>& invitation_lint() {
  static const std::vector<std::string> lint{"fair", "feel", "emotion", "as a human", "be generous"};
  return lint;
}

std::vector<std::string> lint_text(const std::string& text) {
  const auto t = lower(text);
  std::vector<std::string> hits;
  for (const auto& phrase : invitation_lint())
    if (t.find(phrase) != std::string::npos) hits.push_back(phrase);
  return hits;
}

std::vector<PromptTemplate> paraphrase_bank(Family family, int role) {
  const auto desc = description(family, role);
  std::vector<PromptTemplate> bank;
  for (int id = 0; id < kParaphrasesPerGame; ++id) {
    PromptTemplate t{family, role, id, wrappers()[static_cast<std::size_t>(id)]};
    t.text = t.text.replace(t.text.find("{description}"), 13, desc);
    if (const auto hits = lint_text(t.text); !hits.empty())
      throw Error("LintViolation", fmt::format("template contains '{}'", hits.front()));
    bank.push_back(std::move(t));
  }
  return bank;
}

PromptTemplate prompt_template(Family family, int role, int paraphrase_id) {
  if (paraphrase_id < 0 || paraphrase_id >= kParaphrasesPerGame)
    throw Error("MissingSlot", fmt::format("no paraphrase {} (bank has {})", paraphrase_id, kParaphrasesPerGame));
  return paraphrase_bank(family, role)[static_cast<std::size_t>(paraphrase_id)];
}

std::string render_prompt(const PromptTemplate& tmpl, const GameSpec& game, const Condition& condition,
                          const PromptContext& context) {
  if (tmpl.family != game.family)
    throw Error("MissingSlot", fmt::format("template for {} used with {}", to_string(tmpl.family), to_string(game.family)));
  if (tmpl.role < 0 || tmpl.role >= static_cast<int>(game.action_spaces.size()))
    throw Error("MissingSlot", fmt::format("game has no role {}", tmpl.role));
  const bool named = condition.individuation == Individuation::Named;
  if (named && (!context.opponent_name || context.opponent_name->empty()))
    throw Error("MissingSlot", "Named condition requires an opponent name");

  std::map<std::string, std::string> slots;
  for (const auto& [k, v] : game.params) slots[k] = num(v);
  const int others = game.n_players - 1;
  if (named) {
    slots["opponent"] = *context.opponent_name;
    slots["others"] = others == 1 ? *context.opponent_name
                                  : fmt::format("{} other participants, among them {}", others, *context.opponent_name);
  } else {
    slots["opponent"] = "a participant drawn from a group (you will only see the group's average decision)";
    slots["others"] = fmt::format("{} other participant{} drawn from a group (you will only see the group's average "
                                  "decision)",
                                  others, others == 1 ? "" : "s");
  }
  switch (condition.framing) {
    case Framing::Gain: slots["frame"] = "Every point you end up with is recorded as a gain.\n"; break;
    case Framing::Loss:
      slots["frame"] = "Your full budget has already been credited to you; every point you do not end up with is "
                       "recorded as a loss.\n";
      break;
    case Framing::Neutral: slots["frame"] = ""; break;
  }
  slots["stakes"] = fmt::format("Each point is worth {} units of payment.\n", num(condition.stake_scale));
  std::string history;
  if (!context.history.empty()) {
    history = "Earlier rounds:\n";
    for (const auto& h : context.history)
      history += fmt::format("- round {}: you chose {}; {} {}.\n", h.round, h.own,
                             named ? *context.opponent_name + " chose" : "the group average was", h.others);
  }
  slots["history"] = history;
  slots["format"] = format_for(game.action_space(tmpl.role));
  if (game.family == Family::GeneratedBimatrix) {
    slots["name"] = game.name;
    slots["role_name"] = tmpl.role == 0 ? "row" : "column";
    slots["payoffs"] = payoff_table(game, tmpl.role);
  }
  return replace_slots(tmpl.text, slots);
}

// ---- transport ---------------------------------------------------------------

namespace {
std::atomic<std::uint64_t> g_network_requests{0};
}

std::uint64_t network_request_count() { return g_network_requests.load(); }

std::string to_string(Transport t) {
  switch (t) {
    case Transport::Live: return "Live";
    case Transport::Record: return "Record";
    case Transport::Replay: return "Replay";
  }
  return "Replay";
}

Transport transport_from_string(const std::string& s) {
  const auto l = lower(s);
  if (l == "live") return Transport::Live;
  if (l == "record") return Transport::Record;
  if (l == "replay") return Transport::Replay;
  throw Error("InvalidParams", "unknown transport mode '" + s + "'");
}

std::string EndpointConfig::budget_setting(double budget) const {
  const auto key = num(budget);
  const auto it = budget_labels.find(key);
  return it != budget_labels.end() ? it->second : key;
}

EndpointConfig endpoint_from_json(const nlohmann::json& j) {
  try {
    EndpointConfig c;
    c.base_url = j.value("base_url", c.base_url);
    c.path = j.value("path", c.path);
    c.model = j.value("model", c.model);
    c.token_env = j.value("token_env", c.token_env);
    if (j.contains("mode")) c.mode = transport_from_string(j.at("mode").get<std::string>());
    c.temperature = j.value("temperature", c.temperature);
    c.budget_param = j.value("budget_param", c.budget_param);
    if (j.contains("budget_labels")) c.budget_labels = j.at("budget_labels").get<std::map<std::string, std::string>>();
    c.max_retries = j.value("max_retries", c.max_retries);
    c.backoff_ms = j.value("backoff_ms", c.backoff_ms);
    c.timeout_s = j.value("timeout_s", c.timeout_s);
    c.concurrency = std::max(1, j.value("concurrency", c.concurrency));
    if (j.contains("store")) c.store = j.at("store").get<std::string>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error("ParseError", std::string("endpoint config: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const EndpointConfig& c) {
  j = nlohmann::json{{"schema_version", 1},          {"base_url", c.base_url},
                     {"path", c.path},               {"model", c.model},
                     {"token_env", c.token_env},     {"mode", to_string(c.mode)},
                     {"temperature", c.temperature}, {"budget_param", c.budget_param},
                     {"budget_labels", c.budget_labels}, {"max_retries", c.max_retries},
                     {"backoff_ms", c.backoff_ms},   {"timeout_s", c.timeout_s},
                     {"concurrency", c.concurrency}, {"store", c.store.string()}};
}

void to_json(nlohmann::json& j, const Transcript& t) {
  j = nlohmann::json{{"key", t.key},
                     {"prompt_hash", t.prompt_hash},
                     {"request",
                      {{"model", t.model},
                       {"prompt", t.prompt},
                       {"temperature", t.temperature},
                       {"budget_setting", t.budget_setting}}},
                     {"response", t.response},
                     {"parsed", t.parsed ? nlohmann::json(*t.parsed) : nlohmann::json(nullptr)},
                     {"parse_rule", t.parse_rule ? nlohmann::json(*t.parse_rule) : nlohmann::json(nullptr)},
                     {"requested_at", t.requested_at},
                     {"received_at", t.received_at}};
}

void from_json(const nlohmann::json& j, Transcript& t) {
  t = Transcript{};
  t.key = j.at("key").get<std::string>();
  t.prompt_hash = j.value("prompt_hash", "");
  const auto& r = j.at("request");
  t.model = r.value("model", "");
  t.prompt = r.value("prompt", "");
  t.temperature = r.value("temperature", 0.0);
  t.budget_setting = r.value("budget_setting", "");
  t.response = j.at("response").get<std::string>();
  if (j.contains("parsed") && !j.at("parsed").is_null()) t.parsed = j.at("parsed").get<std::string>();
  if (j.contains("parse_rule") && !j.at("parse_rule").is_null()) t.parse_rule = j.at("parse_rule").get<int>();
  t.requested_at = j.value("requested_at", "");
  t.received_at = j.value("received_at", "");
}

std::string request_key(const EndpointConfig& cfg, const QueryRequest& req) {
  return "fnv1a64:" + hex64(fnv1a64(fmt::format("{}\n{}\n{}\n{}", cfg.model, num(cfg.temperature),
                                                cfg.budget_setting(req.compute_budget), req.prompt)));
}

TranscriptStore::TranscriptStore(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;  // a missing store is an empty store
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto t = nlohmann::json::parse(line).get<Transcript>();
      by_key_[t.key] = std::move(t);
    } catch (const nlohmann::json::exception& e) {
      throw Error("ParseError", fmt::format("{}:{}: {}", path_.string(), line_no, e.what()));
    }
  }
}

std::optional<Transcript> TranscriptStore::find(const std::string& key) const {
  std::lock_guard lock(mutex_);
  const auto it = by_key_.find(key);
  if (it == by_key_.end()) return std::nullopt;
  return it->second;
}

void TranscriptStore::append(const Transcript& t) {
  std::lock_guard lock(mutex_);
  if (!path_.empty()) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error("IOError", "cannot append to " + path_.string());
    out << nlohmann::json(t).dump() << '\n';
  }
  by_key_[t.key] = t;
}

std::size_t TranscriptStore::size() const {
  std::lock_guard lock(mutex_);
  return by_key_.size();
}

std::string extract_response_text(const nlohmann::json& body) {
  if (body.contains("choices") && body["choices"].is_array() && !body["choices"].empty()) {
    const auto& c = body["choices"][0];
    if (c.contains("message") && c["message"].contains("content") && c["message"]["content"].is_string())
      return c["message"]["content"].get<std::string>();
    if (c.contains("text") && c["text"].is_string()) return c["text"].get<std::string>();
  }
  // Fall back to the first string under a "content", "text" or "output_text" key.
  std::optional<std::string> found;
  std::function<void(const nlohmann::json&)> walk = [&](const nlohmann::json& j) {
    if (found) return;
    if (j.is_object()) {
      for (const auto& [k, v] : j.items()) {
        if ((k == "content" || k == "text" || k == "output_text") && v.is_string()) {
          found = v.get<std::string>();
          return;
        }
        walk(v);
        if (found) return;
      }
    } else if (j.is_array()) {
      for (const auto& v : j) {
        walk(v);
        if (found) return;
      }
    }
  };
  walk(body);
  if (!found) throw Error("NetworkError", "response body has no text field");
  return *found;
}

namespace {

std::string live_request(const EndpointConfig& cfg, const QueryRequest& req) {
  const char* token = std::getenv(cfg.token_env.c_str());
  if (token == nullptr || *token == '\0') throw Error("AuthMissing", "environment variable " + cfg.token_env + " is not set");

  nlohmann::json body{{"model", cfg.model},
                      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}})},
                      {"temperature", cfg.temperature}};
  if (req.compute_budget > 0 && !cfg.budget_param.empty()) body[cfg.budget_param] = cfg.budget_setting(req.compute_budget);

  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(cfg.backoff_ms * (1 << (attempt - 1))));
    try {
      httplib::Client client(cfg.base_url);
      client.set_connection_timeout(cfg.timeout_s, 0);
      client.set_read_timeout(cfg.timeout_s, 0);
      client.set_bearer_token_auth(token);
      ++g_network_requests;
      const auto res = client.Post(cfg.path, body.dump(), "application/json");
      if (!res) {
        last_error = "transport failure: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = fmt::format("HTTP {}", res->status);
        continue;
      }
      if (res->status == 401 || res->status == 403)
        throw Error("AuthMissing", fmt::format("endpoint rejected the token (HTTP {})", res->status));
      if (res->status != 200) throw Error("NetworkError", fmt::format("HTTP {}: {}", res->status, res->body.substr(0, 200)));
      return extract_response_text(nlohmann::json::parse(res->body));
    } catch (const nlohmann::json::exception& e) {
      last_error = std::string("malformed response: ") + e.what();
    } catch (const std::invalid_argument& e) {
      throw Error("NetworkError", std::string("invalid endpoint: ") + e.what());
    }
  }
  throw Error("NetworkError", fmt::format("{} after {} attempts", last_error, cfg.max_retries + 1));
}

}  // namespace

std::string query_agent(const EndpointConfig& cfg, const QueryRequest& req, TranscriptStore* store) {
  const auto key = request_key(cfg, req);
  if (cfg.mode == Transport::Replay) {
    if (store != nullptr)
      if (auto t = store->find(key)) return t->response;
    throw Error("ReplayMiss", "no stored transcript for " + key);
  }
  Transcript t;
  t.key = key;
  t.prompt_hash = "fnv1a64:" + hex64(fnv1a64(req.prompt));
  t.model = cfg.model;
  t.prompt = req.prompt;
  t.temperature = cfg.temperature;
  t.budget_setting = cfg.budget_setting(req.compute_budget);
  t.requested_at = utc_now();
  t.response = live_request(cfg, req);
  t.received_at = utc_now();
  if (cfg.mode == Transport::Record) {
    if (store == nullptr) throw Error("InvalidParams", "Record mode needs a transcript store");
    if (req.game != nullptr) {
      try {
        const auto parsed = parse_decision(*req.game, req.role, t.response);
        t.parsed = decision_to_string(parsed.decision);
        t.parse_rule = parsed.rule;
      } catch (const Error&) {
        // unparseable responses are stored without a parsed decision
      }
    }
    store->append(t);
  }
  return t.response;
}

// ---- parsing -----------------------------------------------------------------

namespace {

std::string excerpt(const std::string& s) { return s.size() <= 80 ? s : s.substr(0, 77) + "..."; }

std::vector<double> numbers_in(const std::string& s) {
  static const std::regex number(R"((?:^|[^0-9.])(-?\d+(?:\.\d+)?))");
  std::vector<double> out;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), number); it != std::sregex_iterator(); ++it)
    out.push_back(std::stod((*it)[1].str()));
  return out;
}

// Label whose last whole-word occurrence comes latest in the text.
std::optional<std::string> last_label(const std::string& text, const std::vector<std::string>& labels) {
  const auto t = lower(text);
  std::optional<std::string> best;
  std::ptrdiff_t best_pos = -1;
  auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  for (const auto& label : labels) {
    const auto l = lower(label);
    for (auto pos = t.find(l); pos != std::string::npos; pos = t.find(l, pos + 1)) {
      const bool left = pos == 0 || !is_word(t[pos - 1]);
      const bool right = pos + l.size() >= t.size() || !is_word(t[pos + l.size()]);
      if (left && right && static_cast<std::ptrdiff_t>(pos) > best_pos) {
        best_pos = static_cast<std::ptrdiff_t>(pos);
        best = label;
      }
    }
  }
  return best;
}

}  // namespace

ParsedDecision parse_decision(const GameSpec& game, int role, const std::string& response) {
  if (response.empty()) throw Error("Unparseable", "empty response");
  const auto& space = game.action_space(role);
  const auto* interval = std::get_if<ContinuousInterval>(&space);

  static const std::regex marker(R"(decision\s*:\s*([^\n\r]*))", std::regex::icase);
  std::optional<std::string> marked;
  for (auto it = std::sregex_iterator(response.begin(), response.end(), marker); it != std::sregex_iterator(); ++it)
    marked = (*it)[1].str();
  if (marked) {
    if (interval != nullptr) {
      const auto nums = numbers_in(*marked);
      if (!nums.empty()) {
        const double v = nums.front();
        if (v < interval->lo || v > interval->hi)
          throw Error("OutOfRange", fmt::format("{} outside [{}, {}]", num(v), num(interval->lo), num(interval->hi)));
        return {v, 1};
      }
    } else if (auto label = last_label(*marked, std::get<DiscreteSet>(space).labels)) {
      return {*label, 1};
    }
  }
  if (interval != nullptr) {
    const auto nums = numbers_in(response);
    if (nums.empty()) throw Error("Unparseable", excerpt(response));
    for (auto it = nums.rbegin(); it != nums.rend(); ++it)
      if (*it > interval->lo && *it < interval->hi) return {*it, 2};
    for (auto it = nums.rbegin(); it != nums.rend(); ++it)
      if (*it >= interval->lo && *it <= interval->hi) return {*it, 2};
    throw Error("OutOfRange", fmt::format("no number in [{}, {}] in '{}'", num(interval->lo), num(interval->hi),
                                          excerpt(response)));
  }
  if (auto label = last_label(response, std::get<DiscreteSet>(space).labels)) return {*label, 3};
  throw Error("Unparseable", excerpt(response));
}

std::string render_decision(const Decision& d) { return "DECISION: " + decision_to_string(d); }

// ---- experiment execution ----------------------------------------------------

LlmRunResult run_llm_experiment(const ExperimentDesign& design, const EndpointConfig& cfg, TranscriptStore& store) {
  if (design.games.empty() || design.individuation.empty() || design.framing.empty() || design.paraphrase_ids.empty() ||
      design.budgets.empty() || design.stake_scales.empty() || design.context_lengths.empty() ||
      design.sessions_per_cell < 1)
    throw Error("EmptyDesign", "the design has no cells or no sessions per cell");
  static const std::array<const char*, 12> names{"Alex",  "Jordan", "Sam",   "Taylor", "Morgan", "Casey",
                                                 "Riley", "Jamie",  "Avery", "Quinn",  "Drew",   "Robin"};
  struct Job {
    const GameSpec* game;
    Condition condition;
    std::string session_id;
    int rep;
  };
  std::vector<Job> jobs;
  for (const auto& game : design.games) {
    int cell = 0;
    for (auto ind : design.individuation)
      for (auto frame : design.framing)
        for (int pid : design.paraphrase_ids)
          for (double budget : design.budgets)
            for (double stake : design.stake_scales)
              for (auto ctx : design.context_lengths) {
                for (int rep = 0; rep < design.sessions_per_cell; ++rep)
                  jobs.push_back({&game, Condition{ind, frame, pid, stake, budget, ctx},
                                  fmt::format("llm-{}-c{:03}-s{:03}", game.id, cell, rep), rep});
                ++cell;
              }
  }

  struct SessionOut {
    std::vector<RoundRecord> rows;
    int queries = 0, unparseable = 0, out_of_range = 0;
    std::exception_ptr error;
  };
  std::vector<SessionOut> outs(jobs.size());
  const auto requests_before = network_request_count();

  auto run_job = [&](std::size_t i) {
    const auto& job = jobs[i];
    const auto& game = *job.game;
    auto& out = outs[i];
    const auto roles = static_cast<int>(game.action_spaces.size());
    std::vector<int> active;
    std::vector<PromptTemplate> templates;
    for (int r = 0; r < roles; ++r) {
      if (const auto* d = std::get_if<DiscreteSet>(&game.action_space(r)); d != nullptr && d->labels.size() < 2) continue;
      active.push_back(r);
      templates.push_back(prompt_template(game.family, r, job.condition.paraphrase_id));
    }
    PromptContext context;
    if (job.condition.individuation == Individuation::Named)
      context.opponent_name = names[fnv1a64(job.session_id) % names.size()];
    std::vector<std::vector<HistoryEntry>> history(static_cast<std::size_t>(roles));
    for (int t = 1; t <= design.rounds; ++t) {
      std::vector<std::optional<Decision>> decisions(static_cast<std::size_t>(roles));
      for (std::size_t a = 0; a < active.size(); ++a) {
        const int r = active[a];
        context.history = history[static_cast<std::size_t>(r)];
        const auto prompt = render_prompt(templates[a], game, job.condition, context);
        const auto response = query_agent(cfg, {prompt, job.condition.compute_budget, &game, r}, &store);
        ++out.queries;
        try {
          decisions[static_cast<std::size_t>(r)] = parse_decision(game, r, response).decision;
        } catch (const Error& e) {
          if (e.name() == "OutOfRange")
            ++out.out_of_range;
          else if (e.name() == "Unparseable")
            ++out.unparseable;
          else
            throw;
        }
      }
      for (int r : active) {
        const auto& own = decisions[static_cast<std::size_t>(r)];
        std::optional<Decision> opp;
        if (roles == 2) opp = decisions[static_cast<std::size_t>(1 - r)];
        if (own) {
          RoundRecord rec;
          rec.session_id = job.session_id;
          rec.subject_id = fmt::format("{}-s{:03}-r{}", cfg.model, job.rep, r);
          rec.game_id = game.id;
          rec.role = r;
          rec.round = t;
          rec.condition = job.condition;
          rec.decision = *own;
          rec.opponent_decision = opp;
          rec.arm = Arm::LLM;
          out.rows.push_back(std::move(rec));
        }
        // Others: the opponent in two-role games, otherwise the mean of the rest.
        std::string others = "not shown";
        if (roles == 2 && opp) {
          others = decision_to_string(*opp);
        } else if (roles > 2) {
          double sum = 0.0;
          int n = 0;
          for (int o = 0; o < roles; ++o)
            if (o != r && decisions[static_cast<std::size_t>(o)])
              if (const auto* v = std::get_if<double>(&*decisions[static_cast<std::size_t>(o)])) {
                sum += *v;
                ++n;
              }
          if (n > 0) others = num(sum / n);
        }
        history[static_cast<std::size_t>(r)].push_back(
            {t, own ? decision_to_string(*own) : std::string("no valid decision"), others});
      }
    }
  };

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, cfg.concurrency)), jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        run_job(i);
      } catch (...) {
        outs[i].error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(worker);
  worker();
  for (auto& th : threads) th.join();

  LlmRunResult result;
  result.dataset.generator = "deltalab llm-run";
  result.dataset.master_seed = design.master_seed;
  for (const auto& g : design.games) result.dataset.games.emplace(g.id, g);
  for (auto& o : outs) {
    if (o.error) std::rethrow_exception(o.error);
    result.queries += o.queries;
    result.unparseable += o.unparseable;
    result.out_of_range += o.out_of_range;
    for (auto& r : o.rows) result.dataset.rows.push_back(std::move(r));
  }
  result.network_requests = network_request_count() - requests_before;
  return result;
}

}  // namespace deltalab
