#pragma once

// Game families, conditions and action-space normalization.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace deltalab {

enum class Family {
  Dictator,
  Ultimatum,
  Trust,
  PrisonersDilemma,
  PublicGoods,
  PBeauty,
  FirstPriceAuction,
  SecondPriceAuction,
  AllPayAuction,
  TullockContest,
  GeneratedBimatrix,
};

std::string to_string(Family f);
Family family_from_string(const std::string& s);  // accepts canonical and short names ("pbeauty", "pd", ...)

struct ContinuousInterval {
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const ContinuousInterval&) const = default;
};

struct DiscreteSet {
  std::vector<std::string> labels;
  bool operator==(const DiscreteSet&) const = default;
};

using ActionSpace = std::variant<ContinuousInterval, DiscreteSet>;

/// A raw decision: a number on a continuous action space or a label on a
/// discrete one.
using Decision = std::variant<double, std::string>;

std::string decision_to_string(const Decision& d);

using Params = std::map<std::string, double>;

struct GameSpec {
  std::string id;
  Family family = Family::Dictator;
  int n_players = 2;
  int rounds = 1;
  Params params;
  std::vector<ActionSpace> action_spaces;  // one per role
  std::string name;                        // synthetic name for generated games
  Eigen::MatrixXd row_payoffs;             // GeneratedBimatrix only
  Eigen::MatrixXd col_payoffs;

  double param(const std::string& key) const;
  double param_or(const std::string& key, double fallback) const;
  const ActionSpace& action_space(int role) const;
  bool is_continuous(int role) const;
  bool is_canonical() const { return family != Family::GeneratedBimatrix; }

  bool operator==(const GameSpec& other) const;
};

enum class Individuation { Named, Aggregate };
enum class Framing { Gain, Loss, Neutral };

std::string to_string(Individuation i);
std::string to_string(Framing f);
Individuation individuation_from_string(const std::string& s);
Framing framing_from_string(const std::string& s);

struct Condition {
  Individuation individuation = Individuation::Aggregate;
  Framing framing = Framing::Neutral;
  int paraphrase_id = 0;
  double stake_scale = 1.0;
  double compute_budget = 0.0;
  std::int64_t context_length = 0;

  bool operator==(const Condition&) const = default;
};

/// Builds and validates a game. Recognised parameter keys per family:
///   Dictator/Trust: pot (Trust also multiplier, default 3)
///   Ultimatum: pot, unit (default 1)
///   PrisonersDilemma: T, R, P, S
///   PublicGoods: endowment, mpcr
///   PBeauty: p, H (default 100)
///   FirstPriceAuction: value, value_lo (default 0), value_hi (default 100)
///   SecondPriceAuction: value, value_hi (default max(value, 100))
///   AllPayAuction: prize
///   TullockContest: prize, r (default 1)
/// Any family also accepts "n" (players) and "rounds".
/// Throws Error("InvalidParams") on any violated invariant.
GameSpec make_game(Family family, Params params, std::string id = {});

/// Maps a decision onto [0,1]. Continuous spaces map affinely; binary
/// discrete spaces map the first (cooperative) label to 1 and the second to 0.
double normalize_action(const GameSpec& game, int role, const Decision& y);

/// Inverse of normalize_action for continuous roles; for binary roles returns
/// the label of the nearest endpoint.
Decision denormalize_action(const GameSpec& game, int role, double unit);

/// Seeded GeneratedBimatrix with integer payoffs in [-9, 9].
GameSpec generate_novel_game(std::uint64_t seed, int rows, int cols);

struct CorpusCheck {
  std::string corpus;
  std::string query;
  bool searched = false;
  std::string result;
};

struct CertificationChecklist {
  std::string game_id;
  std::string synthetic_name;
  std::string payoff_hash;
  std::vector<CorpusCheck> corpora;
  std::string attestation_statement;
  std::string attested_by;  // left empty: unsigned
  std::string attested_on;
};

CertificationChecklist emit_certification_checklist(const GameSpec& game);

std::string payoff_hash(const GameSpec& game);

void to_json(nlohmann::json& j, const GameSpec& g);
void from_json(const nlohmann::json& j, GameSpec& g);
void to_json(nlohmann::json& j, const Condition& c);
void from_json(const nlohmann::json& j, Condition& c);
void to_json(nlohmann::json& j, const CertificationChecklist& c);

}  // namespace deltalab
