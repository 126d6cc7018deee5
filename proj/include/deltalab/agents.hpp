#pragma once

// Synthetic decision-makers with known residual structure, sessions of
// repeated play and factorial experiments.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deltalab/baselines.hpp"
#include "deltalab/dataset.hpp"
#include "deltalab/game_model.hpp"
#include "deltalab/residuals.hpp"

namespace deltalab {

enum class AgentKind { Classical, BoundedHuman, Retrieval, Reasoning, Scripted };
std::string to_string(AgentKind k);
AgentKind agent_kind_from_string(const std::string& s);

struct AgentConfig {
  AgentKind kind = AgentKind::Classical;
  double noise_sd = 0.0;  // unit action scale
  // BoundedHuman
  double fairness_alpha = 0.0;
  double loss_aversion = 1.0;
  double imitation_weight = 0.0;
  double anchor_weight = 0.0;
  double anchor = 0.5;
  double individuation_gamma = 0.0;
  // Retrieval
  double paraphrase_amplitude = 0.0;
  // Reasoning
  int k_max = 0;
  double unit_cost = 1.0;
  // Scripted: always plays this action
  std::optional<Decision> scripted_action;
  // Subject-level spread of the BoundedHuman fields (uniform +-heterogeneity).
  double heterogeneity = 0.2;
  Benchmark benchmark = Benchmark::nash();

  void validate() const;  // throws InvalidParams
};

/// Lagged information available at a round; values are on the unit scale.
struct RoundState {
  int round = 1;
  std::optional<double> own_lag;
  std::optional<double> peer_lag;  // mean of the other players' last actions
};

/// Deterministic h(paraphrase_id) in [-1, 1] used by Retrieval agents.
double paraphrase_offset(int paraphrase_id);

/// One player bound to a game and role, with the classical baseline cached.
class Agent {
 public:
  Agent(AgentConfig config, const GameSpec& game, int role);

  /// Draws this subject's behavioural parameters around the configured means.
  Agent with_subject(std::uint64_t subject_seed) const;

  Decision act(const RoundState& state, const Condition& condition, std::uint64_t seed) const;

  /// Mean of the structured part of delta (before noise) for a state.
  double structured_delta(const RoundState& state, const Condition& condition) const;

  const AgentConfig& config() const { return config_; }
  double baseline_unit() const { return base_; }
  int reasoning_level(const Condition& condition) const;

 private:
  AgentConfig config_;
  GameSpec game_;
  int role_;
  double base_ = 0.0;
  bool fixed_label_ = false;  // single-label role (e.g. dictator recipient)
  bool bargaining_ = false;
  std::vector<double> level_k_unit_;  // level-k actions for k = 0..k_max
};

/// Free-function form: builds the agent and acts once.
Decision act(const AgentConfig& agent, const GameSpec& game, int role, const RoundState& state,
             const Condition& condition, std::uint64_t seed);

struct SessionSpec {
  std::string session_id = "session";
  std::vector<std::string> subject_ids;     // one per role; defaults to "<session>-r<role>"
  std::vector<std::uint64_t> subject_seeds;  // one per role; defaults to substreams of the session seed
  Arm arm = Arm::Synthetic;
};

/// Plays the stage game `rounds` times, one agent per role.
/// Throws RoleMismatch when the agent count differs from the role count.
std::vector<RoundRecord> run_session(const GameSpec& game, const std::vector<AgentConfig>& agents, int rounds,
                                     const Condition& condition, std::uint64_t seed, const SessionSpec& spec = {});

struct DesignArm {
  Arm arm = Arm::Synthetic;
  std::string label;                 // used in session/subject ids; defaults to the arm name
  std::vector<AgentConfig> agents;   // one per role
  std::map<std::string, std::vector<AgentConfig>> per_game;  // overrides by game id
};

struct ExperimentDesign {
  std::vector<GameSpec> games;
  std::vector<Individuation> individuation{Individuation::Aggregate};
  std::vector<Framing> framing{Framing::Neutral};
  std::vector<int> paraphrase_ids{0};
  std::vector<double> budgets{0.0};
  std::vector<double> stake_scales{1.0};
  std::vector<std::int64_t> context_lengths{0};
  int sessions_per_cell = 1;
  int rounds = 10;
  bool within_subject = true;  // subject ids repeat across conditions and games
  std::vector<DesignArm> arms;
  std::uint64_t master_seed = 0;

  std::size_t cell_count() const;
};

/// Full factorial: games x arms x individuation x framing x paraphrase x
/// budget x stake x context x sessions_per_cell. Throws EmptyDesign.
Dataset run_experiment(const ExperimentDesign& design);

ExperimentDesign design_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const AgentConfig& c);
void from_json(const nlohmann::json& j, AgentConfig& c);
void to_json(nlohmann::json& j, const ExperimentDesign& d);

struct GammaCalibration {
  int subjects = 4000;
  int rounds = 10;
  int role = 0;
  double target_d = 0.6;
  double tolerance = 1e-3;
  std::uint64_t seed = 0xca11b;
};

/// Finds the individuation_gamma for `agents[role]` whose large-sample
/// Named-vs-Aggregate d on per-subject mean |delta| equals target_d.
/// The same seeds are reused for every candidate so d(gamma) is smooth.
double calibrate_individuation_gamma(const GameSpec& game, std::vector<AgentConfig> agents,
                                     const GammaCalibration& opts = {});

/// Large-sample d for a fixed configuration (the quantity calibrated above).
double simulate_individuation_d(const GameSpec& game, const std::vector<AgentConfig>& agents,
                                const GammaCalibration& opts);

}  // namespace deltalab
