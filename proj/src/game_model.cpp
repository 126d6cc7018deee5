#include "deltalab/game_model.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "deltalab/error.hpp"
#include "deltalab/rng.hpp"

namespace deltalab {

namespace {

struct FamilyName {
  Family family;
  const char* canonical;
  const char* short_name;
};

constexpr std::array<FamilyName, 11> kFamilyNames{{
    {Family::Dictator, "Dictator", "dictator"},
    {Family::Ultimatum, "Ultimatum", "ultimatum"},
    {Family::Trust, "Trust", "trust"},
    {Family::PrisonersDilemma, "PrisonersDilemma", "pd"},
    {Family::PublicGoods, "PublicGoods", "public-goods"},
    {Family::PBeauty, "PBeauty", "pbeauty"},
    {Family::FirstPriceAuction, "FirstPriceAuction", "first-price"},
    {Family::SecondPriceAuction, "SecondPriceAuction", "second-price"},
    {Family::AllPayAuction, "AllPayAuction", "all-pay"},
    {Family::TullockContest, "TullockContest", "tullock"},
    {Family::GeneratedBimatrix, "GeneratedBimatrix", "bimatrix"},
}};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

[[noreturn]] void invalid(const std::string& reason) { throw Error("InvalidParams", reason); }

void require(bool ok, const std::string& reason) {
  if (!ok) invalid(reason);
}

double get(const Params& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) invalid("missing parameter '" + key + "'");
  if (!std::isfinite(it->second)) invalid("parameter '" + key + "' is not finite");
  return it->second;
}

void set_default(Params& p, const std::string& key, double value) { p.emplace(key, value); }

const DiscreteSet kCooperateDefect{{"cooperate", "defect"}};

std::string synthetic_name(std::uint64_t seed) {
  static constexpr std::array<const char*, 16> kOnsets{"b", "d", "f", "g", "k", "l", "m", "n",
                                                       "p", "r", "s", "t", "v", "z", "th", "sk"};
  static constexpr std::array<const char*, 8> kVowels{"a", "e", "i", "o", "u", "ai", "eo", "ou"};
  std::uint64_t h = mix64(seed ^ 0x5eedULL);
  std::string name;
  for (int syllable = 0; syllable < 3; ++syllable) {
    name += kOnsets[h & 15U];
    h >>= 4;
    name += kVowels[h & 7U];
    h >>= 3;
  }
  name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
  return fmt::format("{}-{:04x}", name, static_cast<unsigned>(h & 0xffffU));
}

}  // namespace

std::string to_string(Family f) {
  for (const auto& n : kFamilyNames)
    if (n.family == f) return n.canonical;
  return "Unknown";
}

Family family_from_string(const std::string& s) {
  const std::string key = lower(s);
  for (const auto& n : kFamilyNames)
    if (key == lower(n.canonical) || key == n.short_name) return n.family;
  if (key == "prisoners-dilemma" || key == "prisoner's dilemma") return Family::PrisonersDilemma;
  if (key == "publicgoods" || key == "public_goods") return Family::PublicGoods;
  if (key == "p-beauty" || key == "beauty") return Family::PBeauty;
  if (key == "allpay" || key == "all_pay") return Family::AllPayAuction;
  if (key == "firstprice") return Family::FirstPriceAuction;
  if (key == "secondprice") return Family::SecondPriceAuction;
  if (key == "contest") return Family::TullockContest;
  throw Error("InvalidParams", "unknown game family '" + s + "'");
}

std::string to_string(Individuation i) { return i == Individuation::Named ? "Named" : "Aggregate"; }

std::string to_string(Framing f) {
  switch (f) {
    case Framing::Gain: return "Gain";
    case Framing::Loss: return "Loss";
    case Framing::Neutral: return "Neutral";
  }
  return "Neutral";
}

Individuation individuation_from_string(const std::string& s) {
  const auto key = lower(s);
  if (key == "named") return Individuation::Named;
  if (key == "aggregate") return Individuation::Aggregate;
  throw Error("InvalidParams", "unknown individuation '" + s + "'");
}

Framing framing_from_string(const std::string& s) {
  const auto key = lower(s);
  if (key == "gain") return Framing::Gain;
  if (key == "loss") return Framing::Loss;
  if (key == "neutral" || key.empty()) return Framing::Neutral;
  throw Error("InvalidParams", "unknown framing '" + s + "'");
}

std::string decision_to_string(const Decision& d) {
  if (const auto* x = std::get_if<double>(&d)) return fmt::format("{}", *x);
  return std::get<std::string>(d);
}

double GameSpec::param(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) throw Error("InvalidParams", "game '" + id + "' has no parameter '" + key + "'");
  return it->second;
}

double GameSpec::param_or(const std::string& key, double fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

const ActionSpace& GameSpec::action_space(int role) const {
  if (role < 0 || role >= static_cast<int>(action_spaces.size()))
    throw Error("InvalidParams", fmt::format("game '{}' has no role {}", id, role));
  return action_spaces[static_cast<std::size_t>(role)];
}

bool GameSpec::is_continuous(int role) const {
  return std::holds_alternative<ContinuousInterval>(action_space(role));
}

bool GameSpec::operator==(const GameSpec& o) const {
  return id == o.id && family == o.family && n_players == o.n_players && rounds == o.rounds &&
         params == o.params && action_spaces == o.action_spaces && name == o.name &&
         row_payoffs.rows() == o.row_payoffs.rows() && row_payoffs.cols() == o.row_payoffs.cols() &&
         row_payoffs == o.row_payoffs && col_payoffs.rows() == o.col_payoffs.rows() &&
         col_payoffs.cols() == o.col_payoffs.cols() && col_payoffs == o.col_payoffs;
}

GameSpec make_game(Family family, Params params, std::string id) {
  GameSpec g;
  g.family = family;

  const auto players = params.count("n") ? get(params, "n") : 2.0;
  require(players >= 2 && std::floor(players) == players, "n_players must be an integer >= 2");
  g.n_players = static_cast<int>(players);
  const auto rounds = params.count("rounds") ? get(params, "rounds") : 1.0;
  require(rounds >= 1 && std::floor(rounds) == rounds, "rounds must be an integer >= 1");
  g.rounds = static_cast<int>(rounds);
  params.erase("rounds");

  auto continuous_all = [&](double lo, double hi) {
    g.action_spaces.assign(static_cast<std::size_t>(g.n_players), ContinuousInterval{lo, hi});
  };

  switch (family) {
    case Family::Dictator: {
      const double pot = get(params, "pot");
      require(pot > 0, "pot > 0 violated");
      require(g.n_players == 2, "Dictator is a two-player game");
      g.action_spaces = {ContinuousInterval{0, pot}, DiscreteSet{{"receive"}}};
      break;
    }
    case Family::Ultimatum: {
      set_default(params, "unit", 1.0);
      const double pot = get(params, "pot");
      const double unit = get(params, "unit");
      require(pot > 0, "pot > 0 violated");
      require(unit > 0 && unit <= pot, "0 < u <= P violated");
      require(g.n_players == 2, "Ultimatum is a two-player game");
      // Proposer offers s in [0,P]; responder states a minimum acceptable offer.
      continuous_all(0, pot);
      break;
    }
    case Family::Trust: {
      set_default(params, "multiplier", 3.0);
      const double pot = get(params, "pot");
      const double k = get(params, "multiplier");
      require(pot > 0, "pot > 0 violated");
      require(k > 0, "multiplier > 0 violated");
      require(g.n_players == 2, "Trust is a two-player game");
      g.action_spaces = {ContinuousInterval{0, pot}, ContinuousInterval{0, k * pot}};
      break;
    }
    case Family::PrisonersDilemma: {
      const double t = get(params, "T"), r = get(params, "R"), p = get(params, "P"), s = get(params, "S");
      require(t > r, "T>R violated");
      require(r > p, "R>P violated");
      require(p > s, "P>S violated");
      require(g.n_players == 2, "PrisonersDilemma is a two-player game");
      g.action_spaces.assign(2, kCooperateDefect);
      break;
    }
    case Family::PublicGoods: {
      const double e = get(params, "endowment");
      const double m = get(params, "mpcr");
      require(e > 0, "endowment > 0 violated");
      require(m > 0 && m < 1, "0 < m < 1 violated");
      continuous_all(0, e);
      break;
    }
    case Family::PBeauty: {
      set_default(params, "H", 100.0);
      const double p = get(params, "p");
      const double h = get(params, "H");
      require(p > 0 && p < 1, "0 < p < 1 violated");
      require(h > 0, "H > 0 violated");
      continuous_all(0, h);
      break;
    }
    case Family::FirstPriceAuction: {
      set_default(params, "value_lo", 0.0);
      set_default(params, "value_hi", 100.0);
      const double v = get(params, "value");
      const double lo = get(params, "value_lo");
      const double hi = get(params, "value_hi");
      require(v > 0, "V > 0 violated");
      require(lo >= 0 && lo < hi, "0 <= value_lo < value_hi violated");
      require(v >= lo && v <= hi, "value outside [value_lo, value_hi]");
      continuous_all(0, hi);
      break;
    }
    case Family::SecondPriceAuction: {
      const double v = get(params, "value");
      require(v > 0, "V > 0 violated");
      set_default(params, "value_hi", std::max(v, 100.0));
      const double hi = get(params, "value_hi");
      require(v <= hi, "value > value_hi");
      continuous_all(0, hi);
      break;
    }
    case Family::AllPayAuction: {
      const double v = get(params, "prize");
      require(v > 0, "V > 0 violated");
      continuous_all(0, v);
      break;
    }
    case Family::TullockContest: {
      set_default(params, "r", 1.0);
      const double v = get(params, "prize");
      const double r = get(params, "r");
      require(v > 0, "V > 0 violated");
      require(r > 0, "r > 0 violated");
      continuous_all(0, v);
      break;
    }
    case Family::GeneratedBimatrix:
      invalid("GeneratedBimatrix games are built by generate_novel_game or parsed from JSON");
  }
  params.erase("n");
  g.params = std::move(params);
  g.id = id.empty() ? fmt::format("{}-{:08x}", lower(to_string(family)),
                                  static_cast<std::uint32_t>(fnv1a64(nlohmann::json(g.params).dump())))
                    : std::move(id);
  return g;
}

double normalize_action(const GameSpec& game, int role, const Decision& y) {
  const auto& space = game.action_space(role);
  if (const auto* c = std::get_if<ContinuousInterval>(&space)) {
    const auto* x = std::get_if<double>(&y);
    if (x == nullptr) throw Error("OutOfRange", "label decision on a continuous action space");
    if (!std::isfinite(*x) || *x < c->lo || *x > c->hi)
      throw Error("OutOfRange", fmt::format("{} outside [{}, {}]", *x, c->lo, c->hi));
    return (*x - c->lo) / (c->hi - c->lo);
  }
  const auto& d = std::get<DiscreteSet>(space);
  const auto* label = std::get_if<std::string>(&y);
  if (label == nullptr) throw Error("OutOfRange", "numeric decision on a discrete action space");
  if (d.labels.size() != 2)
    throw Error("Unsupported", "normalization defined only for binary discrete action sets");
  if (*label == d.labels[0]) return 1.0;
  if (*label == d.labels[1]) return 0.0;
  throw Error("OutOfRange", "unknown action label '" + *label + "'");
}

Decision denormalize_action(const GameSpec& game, int role, double unit) {
  const auto& space = game.action_space(role);
  if (const auto* c = std::get_if<ContinuousInterval>(&space)) {
    if (!(unit >= 0.0 && unit <= 1.0)) throw Error("OutOfRange", fmt::format("{} outside [0, 1]", unit));
    return std::clamp(c->lo + unit * (c->hi - c->lo), c->lo, c->hi);
  }
  const auto& d = std::get<DiscreteSet>(space);
  if (d.labels.size() != 2)
    throw Error("Unsupported", "normalization defined only for binary discrete action sets");
  return unit >= 0.5 ? d.labels[0] : d.labels[1];
}

GameSpec generate_novel_game(std::uint64_t seed, int rows, int cols) {
  if (rows < 2 || rows > 10 || cols < 2 || cols > 10)
    throw Error("InvalidShape", fmt::format("shape {}x{} outside 2..10", rows, cols));
  auto engine = make_engine(derive_seed(seed, 0x9a3eULL));
  std::uniform_int_distribution<int> entry(-9, 9);
  GameSpec g;
  g.family = Family::GeneratedBimatrix;
  g.n_players = 2;
  g.rounds = 1;
  g.row_payoffs.resize(rows, cols);
  g.col_payoffs.resize(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      g.row_payoffs(i, j) = entry(engine);
      g.col_payoffs(i, j) = entry(engine);
    }
  DiscreteSet row_labels, col_labels;
  for (int i = 0; i < rows; ++i) row_labels.labels.push_back(fmt::format("r{}", i));
  for (int j = 0; j < cols; ++j) col_labels.labels.push_back(fmt::format("c{}", j));
  g.action_spaces = {row_labels, col_labels};
  g.name = synthetic_name(seed);
  g.id = fmt::format("generated-{}-{}x{}", seed, rows, cols);
  return g;
}

std::string payoff_hash(const GameSpec& game) {
  std::string canon = fmt::format("{}x{}", game.row_payoffs.rows(), game.row_payoffs.cols());
  for (Eigen::Index i = 0; i < game.row_payoffs.rows(); ++i)
    for (Eigen::Index j = 0; j < game.row_payoffs.cols(); ++j)
      canon += fmt::format(";{},{}", game.row_payoffs(i, j), game.col_payoffs(i, j));
  return fmt::format("fnv1a64:{:016x}", fnv1a64(canon));
}

CertificationChecklist emit_certification_checklist(const GameSpec& game) {
  if (game.family != Family::GeneratedBimatrix)
    throw Error("WrongFamily", to_string(game.family) + " is a canonical game; only generated games are certified");
  CertificationChecklist c;
  c.game_id = game.id;
  c.synthetic_name = game.name;
  c.payoff_hash = payoff_hash(game);
  const std::string matrix_query =
      fmt::format("\"{}\" OR payoff matrix {}x{} with the exact entries of this game", game.name,
                  game.row_payoffs.rows(), game.row_payoffs.cols());
  for (const char* corpus : {"Common Crawl", "arXiv", "Stack Exchange", "GitHub game-theory course repositories"})
    c.corpora.push_back({corpus, matrix_query, false, ""});
  c.attestation_statement =
      "The payoff structure and name above were searched for in every listed corpus before any model "
      "was queried, and no match was found.";
  return c;
}

// ---- JSON ------------------------------------------------------------------

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw Error("ParseError", "ragged payoff matrix");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

}  // namespace

void to_json(nlohmann::json& j, const GameSpec& g) {
  j = nlohmann::json{{"schema_version", 1},
                     {"id", g.id},
                     {"family", to_string(g.family)},
                     {"n_players", g.n_players},
                     {"rounds", g.rounds},
                     {"params", g.params}};
  auto spaces = nlohmann::json::array();
  for (const auto& s : g.action_spaces) {
    if (const auto* c = std::get_if<ContinuousInterval>(&s))
      spaces.push_back({{"type", "continuous"}, {"lo", c->lo}, {"hi", c->hi}});
    else
      spaces.push_back({{"type", "discrete"}, {"labels", std::get<DiscreteSet>(s).labels}});
  }
  j["action_spaces"] = std::move(spaces);
  if (g.family == Family::GeneratedBimatrix) {
    j["name"] = g.name;
    j["payoffs"] = {{"row", matrix_to_json(g.row_payoffs)}, {"col", matrix_to_json(g.col_payoffs)}};
  }
}

void from_json(const nlohmann::json& j, GameSpec& g) {
  try {
    const auto family = family_from_string(j.at("family").get<std::string>());
    if (family == Family::GeneratedBimatrix) {
      g = GameSpec{};
      g.family = family;
      g.id = j.at("id").get<std::string>();
      g.n_players = 2;
      g.rounds = j.value("rounds", 1);
      g.name = j.value("name", "");
      g.row_payoffs = matrix_from_json(j.at("payoffs").at("row"));
      g.col_payoffs = matrix_from_json(j.at("payoffs").at("col"));
      const auto r = g.row_payoffs.rows(), c = g.row_payoffs.cols();
      if (r < 1 || r > 10 || c < 1 || c > 10 || g.col_payoffs.rows() != r || g.col_payoffs.cols() != c)
        throw Error("InvalidParams", "bimatrix payoffs must share a shape of at most 10x10");
      if (!g.row_payoffs.allFinite() || !g.col_payoffs.allFinite())
        throw Error("InvalidParams", "bimatrix payoffs must be finite");
      DiscreteSet rows, cols;
      for (Eigen::Index i = 0; i < r; ++i) rows.labels.push_back(fmt::format("r{}", i));
      for (Eigen::Index k = 0; k < c; ++k) cols.labels.push_back(fmt::format("c{}", k));
      if (j.contains("action_spaces")) {
        const auto& s = j.at("action_spaces");
        rows.labels = s.at(0).at("labels").get<std::vector<std::string>>();
        cols.labels = s.at(1).at("labels").get<std::vector<std::string>>();
      }
      g.action_spaces = {rows, cols};
      return;
    }
    auto params = j.at("params").get<Params>();
    params["n"] = j.value("n_players", 2);
    params["rounds"] = j.value("rounds", 1);
    g = make_game(family, std::move(params), j.at("id").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error("ParseError", std::string("game spec: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const Condition& c) {
  j = nlohmann::json{{"individuation", to_string(c.individuation)},
                     {"framing", to_string(c.framing)},
                     {"paraphrase_id", c.paraphrase_id},
                     {"stake_scale", c.stake_scale},
                     {"compute_budget", c.compute_budget},
                     {"context_length", c.context_length}};
}

void from_json(const nlohmann::json& j, Condition& c) {
  c = Condition{};
  c.individuation = individuation_from_string(j.at("individuation").get<std::string>());
  c.framing = framing_from_string(j.value("framing", std::string("Neutral")));
  c.paraphrase_id = j.value("paraphrase_id", 0);
  c.stake_scale = j.value("stake_scale", 1.0);
  c.compute_budget = j.value("compute_budget", 0.0);
  c.context_length = j.value("context_length", std::int64_t{0});
  if (c.paraphrase_id < 0 || !(c.stake_scale > 0) || c.compute_budget < 0 || c.context_length < 0)
    throw Error("InvalidParams", "condition fields out of range");
}

void to_json(nlohmann::json& j, const CertificationChecklist& c) {
  auto corpora = nlohmann::json::array();
  for (const auto& e : c.corpora)
    corpora.push_back({{"corpus", e.corpus}, {"query", e.query}, {"searched", e.searched}, {"result", e.result}});
  j = nlohmann::json{{"schema_version", 1},
                     {"game_id", c.game_id},
                     {"synthetic_name", c.synthetic_name},
                     {"payoff_hash", c.payoff_hash},
                     {"corpora", std::move(corpora)},
                     {"attestation",
                      {{"statement", c.attestation_statement},
                       {"attested_by", c.attested_by},
                       {"attested_on", c.attested_on},
                       {"signed", false}}}};
}

}  // namespace deltalab
